"""Riemannian geometry of the quantum metric.

The metric g_ab(k) is treated as a metric on the Brillouin zone. Its first
derivatives come from fourth-order central differences of the closed-form
metric, and the curvature from the same stencil applied to the Christoffel
symbols. Near fold lines of the d-hat map the metric becomes nearly singular
and the coordinate curvature ill-conditioned; :func:`generic_points` samples
momenta away from them.

Index layout: christoffel[..., a, b, c] = Gamma^a_bc,
riemann_up[..., a, b, c, d] = R^a_bcd, riemann_down[..., a, b, c, d] = R_abcd.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .chern import BrillouinGrid, check_gapped
from .errors import DimensionMismatch, SingularMetric
from .models import DiracModel
from .qgt import levi_civita, metric_closed_form, sqrt_det_metric

FD_STEP = 1e-3
MAX_CONDITION = 1e10
EULER_FACTOR = 384.0


def sphere_curvature(n_half_dim: int) -> float:
    """1/r^2 for the sphere of radius 2^((N-3)/2): 2 at N=2."""
    return 2.0 ** (3 - n_half_dim)


def sphere_riemann(g: np.ndarray, curvature: float) -> np.ndarray:
    """K (g_ac g_bd - g_ad g_bc), the curvature of a round sphere."""
    return curvature * (np.einsum("...ac,...bd->...abcd", g, g) - np.einsum("...ad,...bc->...abcd", g, g))


def _metric_fn(model, metric_fn, metric_perturbation):
    base = metric_fn or (lambda k: metric_closed_form(model, k, "analytic"))
    if metric_perturbation:
        return lambda k: base(k) * (1.0 + metric_perturbation)
    return base


def _central(fn, k, h, order=4):
    """Central difference along every axis, inserted after the batch axes."""
    dim = k.shape[-1]
    steps = h * np.eye(dim)
    kk = k[..., None, :]
    first = fn(kk + steps) - fn(kk - steps)
    if order == 2:
        return first / (2.0 * h)
    second = fn(kk + 2 * steps) - fn(kk - 2 * steps)
    return (8.0 * first - second) / (12.0 * h)


def _inverse(g):
    cond = np.linalg.cond(g)
    if np.any(~np.isfinite(cond)) or np.max(cond) > MAX_CONDITION:
        raise SingularMetric(f"metric condition number {np.max(cond):.2e} exceeds {MAX_CONDITION:.0e}")
    try:
        chol = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise SingularMetric("metric is not positive definite") from exc
    eye = np.broadcast_to(np.eye(g.shape[-1]), g.shape)
    lower_inv = np.linalg.solve(chol, eye)
    return np.swapaxes(lower_inv, -1, -2) @ lower_inv


def _christoffel_from(metric, k, h):
    g = metric(k)
    dg = _central(metric, k, h)  # dg[..., c, a, b] = d_c g_ab
    ginv = _inverse(g)
    # lowered[..., d, b, c] = d_b g_dc + d_c g_db - d_d g_bc
    lowered = np.swapaxes(dg, -3, -2) + np.moveaxis(dg, -3, -1) - dg
    return 0.5 * np.einsum("...ad,...dbc->...abc", ginv, lowered)


def christoffel(model: DiracModel, k, fd_step: float = FD_STEP,
                metric_fn: Callable | None = None, metric_perturbation: float = 0.0) -> np.ndarray:
    """Levi-Civita symbols Gamma^a_bc = g^ad (d_b g_dc + d_c g_db - d_d g_bc) / 2."""
    k = model.check_k(k)
    return _christoffel_from(_metric_fn(model, metric_fn, metric_perturbation), k, fd_step)


@dataclass
class CurvatureBundle:
    k: np.ndarray
    metric: np.ndarray
    christoffel: np.ndarray
    riemann_up: np.ndarray
    riemann_down: np.ndarray
    ricci: np.ndarray
    scalar: np.ndarray
    euler_density_lhs: np.ndarray | None
    euler_density_rhs: np.ndarray | None


def _riemann_up(metric, k, h):
    gam = _christoffel_from(metric, k, h)
    dgam = _central(lambda q: _christoffel_from(metric, q, h), k, h)  # [..., c, a, b, d] = d_c Gamma^a_bd
    deriv = np.einsum("...cabd->...abcd", dgam)
    quad = np.einsum("...aec,...ebd->...abcd", gam, gam)
    return gam, deriv - np.swapaxes(deriv, -1, -2) + quad - np.swapaxes(quad, -1, -2)


def euler_density(riemann_down: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(eps_klmn eps_abcd R_klab R_mncd, 384 det g) for a four-dimensional metric."""
    if g.shape[-1] != 4:
        raise DimensionMismatch("the Euler density identity is four-dimensional")
    eps = levi_civita(4)
    contracted = np.einsum("abcd,...klab->...klcd", eps, riemann_down)
    lhs = np.einsum("klmn,...klcd,...mncd->...", eps, contracted, riemann_down)
    return lhs, EULER_FACTOR * np.linalg.det(g)


def curvature_bundle(model: DiracModel, k, fd_step: float = FD_STEP, richardson: bool = False,
                     metric_fn: Callable | None = None, metric_perturbation: float = 0.0) -> CurvatureBundle:
    """Christoffel symbols, Riemann and Ricci tensors, scalar curvature and Euler density.

    With ``richardson`` the curvature is extrapolated from steps h and h/2 as
    (16 R(h/2) - R(h)) / 15, matching the fourth-order stencil.
    """
    k = model.check_k(k)
    metric = _metric_fn(model, metric_fn, metric_perturbation)
    g = metric(k)
    gam, r_up = _riemann_up(metric, k, fd_step)
    if richardson:
        gam_half, r_half = _riemann_up(metric, k, fd_step / 2)
        gam = (16.0 * gam_half - gam) / 15.0
        r_up = (16.0 * r_half - r_up) / 15.0
    r_down = np.einsum("...ae,...ebcd->...abcd", g, r_up)
    ricci = np.einsum("...abad->...bd", r_up)
    scalar = np.einsum("...bd,...bd->...", _inverse(g), ricci)
    lhs = rhs = None
    if g.shape[-1] == 4:
        lhs, rhs = euler_density(r_down, g)
    return CurvatureBundle(k, g, gam, r_up, r_down, ricci, scalar, lhs, rhs)


@dataclass
class SphereCheck:
    """Deviations of a curvature bundle from the round-sphere relations."""

    gauss_codazzi_rel: float
    ricci_rel: float
    scalar: float
    scalar_error: float
    einstein_residual: float
    euler_rel: float | None

    def passes(self, riemann_rel=1e-3, scalar_tol=1e-3, einstein_tol=1e-4, euler_tol=1e-3) -> bool:
        ok = (self.gauss_codazzi_rel < riemann_rel and self.scalar_error < scalar_tol
              and self.einstein_residual < einstein_tol)
        if self.euler_rel is not None:
            ok = ok and self.euler_rel < euler_tol
        return bool(ok)


def _max_abs(arr, rank):
    return np.max(np.abs(arr), axis=tuple(range(-rank, 0)))


def hypersphere_check(bundle: CurvatureBundle, n_half_dim: int) -> SphereCheck:
    """Compare against R_abcd = K (g g - g g), R_ab = (D-1) K g, R = D (D-1) K.

    The Einstein-like residual is R_ab - g_ab R / 2 + Lambda g_ab with
    Lambda = (D-1)(D-2) K / 2, which is 6 at N=2. Tensor errors are relative
    to the largest expected component at the same momentum; every field is
    the worst case over the stacked momenta.
    """
    g = bundle.metric
    dim = g.shape[-1]
    kc = sphere_curvature(n_half_dim)
    expected = sphere_riemann(g, kc)
    gc = np.max(_max_abs(bundle.riemann_down - expected, 4) / _max_abs(expected, 4))
    ricci_expected = (dim - 1) * kc * g
    ricci_rel = np.max(_max_abs(bundle.ricci - ricci_expected, 2) / _max_abs(ricci_expected, 2))
    scalar_target = dim * (dim - 1) * kc
    lam = (dim - 1) * (dim - 2) * kc / 2
    einstein = bundle.ricci - 0.5 * g * bundle.scalar[..., None, None] + lam * g
    euler = None
    if bundle.euler_density_lhs is not None:
        euler = float(np.max(np.abs(bundle.euler_density_lhs / bundle.euler_density_rhs - 1.0)))
    scalar = np.asarray(bundle.scalar)
    worst = scalar.flat[np.argmax(np.abs(scalar - scalar_target))]
    return SphereCheck(float(gc), float(ricci_rel), float(worst), float(abs(worst - scalar_target)),
                       float(np.max(np.abs(einstein))), euler)


def generic_points(model: DiracModel, count: int, rng: np.random.Generator,
                   max_condition: float = 100.0, max_tries: int = 100) -> np.ndarray:
    """Uniform random momenta whose metric has condition number <= ``max_condition``."""
    found = []
    total = 0
    for _ in range(max_tries):
        k = rng.uniform(-np.pi, np.pi, size=(max(2 * count, 16), model.dim))
        g = metric_closed_form(model, k, "analytic")
        keep = k[np.linalg.cond(g) <= max_condition]
        found.append(keep)
        total += len(keep)
        if total >= count:
            return np.concatenate(found)[:count]
    raise SingularMetric(f"found only {total} of {count} momenta with condition number <= {max_condition}")


@dataclass
class EulerCheck:
    lhs: float
    rhs: float
    rel_err: float


def euler_density_check(model: DiracModel, k, fd_step: float = FD_STEP, floor: float = 1e-300,
                        metric_fn: Callable | None = None, metric_perturbation: float = 0.0,
                        riemann_down: np.ndarray | None = None) -> EulerCheck:
    """eps eps R R against 384 det g at a single momentum.

    Passing ``riemann_down`` bypasses the finite-difference curvature.
    """
    if model.dim != 4:
        raise DimensionMismatch("the Euler density identity needs a four-dimensional model")
    k = model.check_k(k)
    metric = _metric_fn(model, metric_fn, metric_perturbation)
    g = metric(k)
    if riemann_down is None:
        riemann_down = curvature_bundle(model, k, fd_step, metric_fn=metric).riemann_down
    lhs, rhs = euler_density(riemann_down, g)
    lhs, rhs = float(lhs), float(rhs)
    return EulerCheck(lhs, rhs, abs(lhs - rhs) / max(abs(rhs), floor))


def euler_integral(model: DiracModel, grid: BrillouinGrid, fd_step: float = FD_STEP,
                   max_condition: float = 1e3) -> dict:
    """int eps eps R R / sqrt(det g) d^4k next to S_BZ.

    The Euler characteristic is only known to be proportional to the first
    number; ``ratio`` is integral / (384 S_BZ), which the sphere relation
    fixes to one. Grid points whose metric has condition number above
    ``max_condition`` (fold lines, where the coordinate curvature is not
    resolvable by finite differences) are skipped in both sums and counted
    in ``excluded``.
    """
    if model.dim != 4:
        raise DimensionMismatch("the Euler integral needs a four-dimensional model")
    check_gapped(model, grid)
    pts = grid.flat_points()
    cond = np.linalg.cond(metric_closed_form(model, pts, "analytic"))
    pts = pts[np.isfinite(cond) & (cond <= max_condition)]
    integral = s_bz = 0.0
    for i in range(0, len(pts), 1024):
        bundle = curvature_bundle(model, pts[i:i + 1024], fd_step)
        root = sqrt_det_metric(bundle.metric)
        integral += float(np.sum(bundle.euler_density_lhs / root))
        s_bz += float(np.sum(root))
    integral *= grid.cell_volume
    s_bz *= grid.cell_volume
    return {"integral": integral, "s_bz": s_bz, "ratio": integral / (EULER_FACTOR * s_bz),
            "excluded": int(grid.n_points - len(pts))}
