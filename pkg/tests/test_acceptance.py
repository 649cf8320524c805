"""Acceptance criteria, each at its stated tolerance and runtime budget.

Every test prints one ``criterion N [PASS|FAIL]`` line (also collected in
the terminal summary) before asserting.
"""
import math
import time

import numpy as np
import pytest

from chernmetric import build_gammas
from chernmetric.chern import BrillouinGrid, hypersphere_area, mass_sweep
from chernmetric.cli import main
from chernmetric.models import Scheme, qhz4d, qwz2d
from chernmetric.qgt import det_identity_report, metric_closed_form, qgt_spectral
from chernmetric.riemann import curvature_bundle, generic_points, hypersphere_check
from chernmetric.spectroscopy import DriveSpec, integrated_rate, reconstruct_metric

SEED = 0
GAPPED_M = (-3.0, -1.0, 1.0, 3.0)
FAMILIES = {"qwz2d": (qwz2d, 1), "qhz4d": (qhz4d, 2)}


def random_k(n_points, dim, seed=SEED):
    return np.random.default_rng(seed).uniform(-np.pi, np.pi, (n_points, dim))


def test_criterion_1_metric_equivalence(criterion_report):
    start = time.perf_counter()
    worst_analytic = worst_fd = 0.0
    fd = Scheme("fd", 1e-5)
    for family, n in FAMILIES.values():
        gammas = build_gammas(n)
        for m in GAPPED_M:
            model = family(m)
            k = random_k(100, 2 * n)
            closed = metric_closed_form(model, k)
            worst_analytic = max(worst_analytic, np.abs(qgt_spectral(model, gammas, k).metric - closed).max())
            spectral_fd = qgt_spectral(model, gammas, k, fd).metric
            worst_fd = max(worst_fd, np.abs(spectral_fd - closed).max(),
                           np.abs(spectral_fd - metric_closed_form(model, k, fd)).max())
    elapsed = time.perf_counter() - start
    ok = worst_analytic < 1e-10 and worst_fd < 1e-6 and elapsed < 5
    criterion_report(1, "metric equivalence", ok,
                     f"analytic {worst_analytic:.1e} (<1e-10), fd {worst_fd:.1e} (<1e-6), {elapsed:.2f} s (<5 s)")
    assert ok


def test_criterion_2_determinant_identity(criterion_report):
    start = time.perf_counter()
    worst = {}
    for name, (family, n) in FAMILIES.items():
        m = 1.0 if n == 1 else -3.0
        rep = det_identity_report(family(m), build_gammas(n), random_k(100, 2 * n))
        worst[name] = float(rep.max_rel_discrepancy.max())
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) < 1e-8 and elapsed < 10
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    criterion_report(2, "three-way determinant identity", ok, f"{detail} (<1e-8), {elapsed:.2f} s (<10 s)")
    assert ok


def test_criterion_3_chern_reproduction(criterion_report):
    start = time.perf_counter()
    masses = [-5.0, -3.0, -1.0, 1.0, 3.0, 5.0]
    rows = mass_sweep(qhz4d, masses, BrillouinGrid(2, 16), threads=1)
    metric = {r.m: r.result for r in rows if r.result.method.startswith("metric")}
    oracle = {r.m: r.result for r in rows if r.result.method == "plaquette_4d"}
    metric_ints = [metric[m].nearest_integer for m in masses]
    oracle_ints = [oracle[m].nearest_integer for m in masses]
    residual = max(metric[m].residual for m in masses)
    four_ok = (metric_ints == oracle_ints and [abs(c) for c in metric_ints] == [0, 1, 3, 3, 1, 0]
               and residual < 0.05)

    qwz_masses = [-3.0, -1.0, 1.0, 3.0]
    rows2 = mass_sweep(qwz2d, qwz_masses, BrillouinGrid(1, 200), threads=1)
    metric2 = [r.result.nearest_integer for r in rows2 if r.result.method.startswith("metric")]
    fhs2 = [r.result.nearest_integer for r in rows2 if r.result.method == "fhs_2d"]
    elapsed = time.perf_counter() - start
    ok = four_ok and metric2 == fhs2 and elapsed < 300
    criterion_report(3, "Chern-number reproduction", ok,
                     f"C2 metric {metric_ints} oracle {oracle_ints} max residual {residual:.1e} (<0.05); "
                     f"C1 metric {metric2} FHS {fhs2}; {elapsed:.1f} s (<300 s)")
    assert ok


def _geometry_errors(model, points, perturbation=0.0):
    chk = hypersphere_check(curvature_bundle(model, points, metric_perturbation=perturbation), 2)
    return chk


def test_criterion_4_hypersphere_geometry(criterion_report):
    start = time.perf_counter()
    model = qhz4d(-3.0)
    pts = generic_points(model, 20, np.random.default_rng(SEED))
    chk = _geometry_errors(model, pts)
    elapsed = time.perf_counter() - start
    ok = (chk.gauss_codazzi_rel < 1e-3 and chk.scalar_error < 1e-3 and chk.einstein_residual < 1e-4
          and chk.euler_rel < 1e-3 and elapsed < 30)
    criterion_report(4, "hypersphere geometry", ok,
                     f"Gauss-Codazzi {chk.gauss_codazzi_rel:.1e} (<1e-3), R={chk.scalar:.6f} (24+-1e-3), "
                     f"Einstein {chk.einstein_residual:.1e} (<1e-4), Euler {chk.euler_rel:.1e} (<1e-3), "
                     f"{elapsed:.2f} s (<30 s)")
    assert ok


def test_criterion_5_vanishing_curvature_trace(criterion_report):
    gammas = build_gammas(2)
    worst = max(np.abs(qgt_spectral(qhz4d(m), gammas, random_k(100, 4)).curvature_trace).max() for m in GAPPED_M)
    ok = worst < 1e-12
    criterion_report(5, "vanishing curvature trace", ok, f"max |sum_n F^nn| {worst:.1e} (<1e-12)")
    assert ok


def test_criterion_6_spectroscopy(criterion_report):
    start = time.perf_counter()
    model, gammas = qhz4d(-3.0), build_gammas(2)
    worst = max(reconstruct_metric(model, gammas, k, epsilon=1e-2, eta_rel=0.01).max_rel_err
                for k in random_k(10, 4))
    k0 = random_k(1, 4)[0]
    low = integrated_rate(model, gammas, k0, DriveSpec(0, epsilon=1e-3)).gamma_int
    high = integrated_rate(model, gammas, k0, DriveSpec(0, epsilon=1e-2)).gamma_int
    scaling = abs(high / low / 100.0 - 1.0)
    elapsed = time.perf_counter() - start
    ok = worst < 1e-2 and scaling < 1e-3 and elapsed < 60
    criterion_report(6, "spectroscopy protocol", ok,
                     f"max component error {worst:.2%} (<1%), eps^2 scaling deviation {scaling:.1e} (<1e-3), "
                     f"{elapsed:.2f} s (<60 s)")
    assert ok


def test_criterion_7_constants(criterion_report):
    err2 = abs(hypersphere_area(2) - 2 * math.pi**2 / 3) / (2 * math.pi**2 / 3)
    err1 = abs(hypersphere_area(1) - math.pi) / math.pi
    ok = err1 < 1e-15 and err2 < 1e-15
    criterion_report(7, "hypersphere areas", ok, f"S^2 rel err {err1:.1e}, S^4 rel err {err2:.1e} (<1e-15)")
    assert ok


def test_criterion_8_negative_controls(criterion_report, capsys):
    perturb = 0.01
    det = {}
    for name, (family, n) in FAMILIES.items():
        m = 1.0 if n == 1 else -3.0
        rep = det_identity_report(family(m), build_gammas(n), random_k(100, 2 * n), metric_perturbation=perturb)
        det[name] = float(rep.max_rel_discrepancy.max())
    model = qhz4d(-3.0)
    chk = _geometry_errors(model, generic_points(model, 20, np.random.default_rng(SEED)), perturb)
    codes = [main(["identity-check", "--model", name, "--samples", "100", "--perturb", str(perturb)])
             for name in FAMILIES]
    capsys.readouterr()
    breaks_2 = min(det.values()) > 1e-8
    breaks_4 = not chk.passes()
    ok = breaks_2 and breaks_4 and codes == [4, 4]
    criterion_report(8, "negative controls", ok,
                     f"1% perturbed g: identity discrepancy {min(det.values()):.1e} (>1e-8 breaks), "
                     f"Gauss-Codazzi {chk.gauss_codazzi_rel:.1e}, R={chk.scalar:.3f}; identity-check exit codes {codes}")
    assert ok
