"""Quantum-metric spectroscopy by periodic parameter modulation.

A parameter is driven as k_a(t) = k_a + (2 eps / omega) cos(omega t). To
first order the drive couples the levels through eps/omega d_aH, and the
golden-rule rate out of the occupied levels, integrated over the drive
frequency, is 2 pi eps^2 g_aa (hbar = 1). Driving two parameters together,
with relative sign +-, gives g_aa +- 2 g_ab + g_bb, so the difference of the
two integrated rates isolates g_ab.

The delta function of the golden rule is broadened into a unit-area
Lorentzian of half-width eta. The factor (eps/omega)^2 is evaluated at the
transition frequency omega = 2|d|, so the integrated rate divided by
2 pi eps^2 is the metric component up to the Lorentzian mass that falls
outside the sampled window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import WindowTooNarrow
from .gamma import GammaSet
from .models import (
    GAP_TOLERANCE,
    DiracModel,
    _check_gammas,
    _gap,
    hamiltonian_derivatives,
    occupied_projector,
    eval_hamiltonian,
)
from .qgt import metric_closed_form, qgt_spectral

MAX_TAIL = 5e-3
IMAG_TOLERANCE = 1e-12
POINTS_PER_WIDTH = 8


@dataclass(frozen=True)
class DriveSpec:
    """A single-axis (``axis_b`` None) or two-axis drive.

    ``eta`` is the Lorentzian half-width; when None it is ``eta_rel`` times
    the gap 2|d|. ``omega_window`` likewise defaults to
    (0, ``window_rel`` * gap). Axes are 0-based.
    """

    axis: int
    axis_b: int | None = None
    epsilon: float = 1e-2
    relative_sign: int = 1
    eta: float | None = None
    eta_rel: float = 0.01
    omega_window: tuple[float, float] | None = None
    window_rel: float = 10.0
    n_omega: int | None = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("drive strength epsilon must be positive")
        if self.relative_sign not in (1, -1):
            raise ValueError("relative_sign must be +1 or -1")
        if self.eta is not None and not self.eta > 0:
            raise ValueError("broadening eta must be positive")

    def resolve(self, gap: float) -> tuple[float, np.ndarray]:
        """Broadening and frequency samples for a transition at ``gap``."""
        eta = self.eta if self.eta is not None else self.eta_rel * gap
        lo, hi = self.omega_window if self.omega_window is not None else (0.0, self.window_rel * gap)
        if not (lo + 10 * eta <= gap <= hi - 10 * eta):
            raise WindowTooNarrow(
                f"window [{lo:.4g}, {hi:.4g}] must contain the gap {gap:.4g} with margin 10*eta = {10 * eta:.3g}")
        n = self.n_omega or int(math.ceil(POINTS_PER_WIDTH * (hi - lo) / eta)) + 1
        return eta, np.linspace(lo, hi, n)


@dataclass
class RateResult:
    omega: np.ndarray
    gamma_of_omega: np.ndarray
    gamma_int: float
    metric_estimate: float
    reference_metric: float
    rel_err: float
    tail_mass: float


def lorentzian(x, eta):
    return (eta / math.pi) / (x * x + eta * eta)


def lorentzian_tail(lo, hi, center, eta):
    """Mass of the unit Lorentzian outside [lo, hi]."""
    inside = (math.atan((hi - center) / eta) - math.atan((lo - center) / eta)) / math.pi
    return 1.0 - inside


def transition_strength(model: DiracModel, gammas: GammaSet, k, operator_coeffs,
                        gap_tolerance: float = GAP_TOLERANCE) -> float:
    """sum_{m,n} |<m|V|n>|^2 for V = sum_a c_a d_aH, via tr(P V (1-P) V)."""
    proj = occupied_projector(model, gammas, k, gap_tolerance)
    dh = hamiltonian_derivatives(model, gammas, k)
    op = np.tensordot(np.asarray(operator_coeffs, dtype=float), dh, axes=(0, 0))
    unocc = np.eye(gammas.size) - proj
    return float(np.trace(proj @ op @ unocc @ op).real)


def _strength(model, gammas, k, drive, gap_tolerance):
    coeffs = np.zeros(model.dim)
    coeffs[drive.axis] += 1.0
    if drive.axis_b is not None:
        coeffs[drive.axis_b] += drive.relative_sign
    return transition_strength(model, gammas, k, coeffs, gap_tolerance)


def golden_rule_rate(model: DiracModel, gammas: GammaSet, k, drive: DriveSpec, omega,
                     gap_tolerance: float = GAP_TOLERANCE):
    """Gamma(omega) = 2 pi sum_{m,n} |(eps/omega_mn) <m|V|n>|^2 delta_eta(omega_mn - omega)."""
    _check_gammas(model, gammas)
    k = model.check_k(k)
    gap = 2.0 * float(_gap(model.d_vector(k), gap_tolerance))
    eta = drive.eta if drive.eta is not None else drive.eta_rel * gap
    strength = _strength(model, gammas, k, drive, gap_tolerance)
    omega = np.asarray(omega, dtype=float)
    return 2.0 * math.pi * (drive.epsilon / gap) ** 2 * strength * lorentzian(gap - omega, eta)


def _integrate(model, gammas, k, drive, gap_tolerance):
    gap = 2.0 * float(_gap(model.d_vector(k), gap_tolerance))
    eta, omega = drive.resolve(gap)
    tail = lorentzian_tail(omega[0], omega[-1], gap, eta)
    if tail > MAX_TAIL:
        raise WindowTooNarrow(f"Lorentzian tail mass {tail:.2%} outside the window exceeds {MAX_TAIL:.1%}", tail)
    rate = golden_rule_rate(model, gammas, k, drive, omega, gap_tolerance)
    return omega, rate, float(np.trapezoid(rate, omega)), tail


def assert_real_diagonal(model: DiracModel, gammas: GammaSet, k) -> float:
    """Check Im Q_aa = 0, which lets the integrated rate stand for g_aa; returns the largest |Im Q_aa|."""
    q = qgt_spectral(model, gammas, k).qgt
    worst = float(np.max(np.abs(np.diagonal(q, axis1=-2, axis2=-1).imag)))
    if worst >= IMAG_TOLERANCE:
        raise ArithmeticError(f"Im Q_aa = {worst:.2e} is not negligible")
    return worst


def _rel(estimate, reference, scale):
    return abs(estimate - reference) / max(abs(reference), 1e-12 * scale, 1e-300)


def integrated_rate(model: DiracModel, gammas: GammaSet, k, drive: DriveSpec,
                    gap_tolerance: float = GAP_TOLERANCE) -> RateResult:
    """Frequency-integrated rate of a single-axis drive and the g_aa it implies."""
    _check_gammas(model, gammas)
    k = model.check_k(k)
    assert_real_diagonal(model, gammas, k)
    omega, rate, total, tail = _integrate(model, gammas, k, drive, gap_tolerance)
    estimate = total / (2.0 * math.pi * drive.epsilon**2)
    g = metric_closed_form(model, k)
    if drive.axis_b is None:
        ref = g[drive.axis, drive.axis]
    else:
        b = drive.axis_b
        ref = g[drive.axis, drive.axis] + 2 * drive.relative_sign * g[drive.axis, b] + g[b, b]
    return RateResult(omega, rate, total, estimate, float(ref), _rel(estimate, ref, np.abs(g).max()), tail)


def differential_integrated_rate(model: DiracModel, gammas: GammaSet, k, axes, epsilon: float = 1e-2,
                                 eta: float | None = None, eta_rel: float = 0.01,
                                 gap_tolerance: float = GAP_TOLERANCE, **window) -> RateResult:
    """Gamma+ - Gamma- for the two-axis drive; the estimate is that difference / (8 pi eps^2).

    The returned curve is Gamma+(omega) - Gamma-(omega).
    """
    a, b = axes
    plus = DriveSpec(a, b, epsilon, +1, eta, eta_rel, **window)
    minus = DriveSpec(a, b, epsilon, -1, eta, eta_rel, **window)
    omega, rate_p, int_p, tail = _integrate(model, gammas, model.check_k(k), plus, gap_tolerance)
    _, rate_m, int_m, _ = _integrate(model, gammas, model.check_k(k), minus, gap_tolerance)
    delta = int_p - int_m
    estimate = delta / (8.0 * math.pi * epsilon**2)
    g = metric_closed_form(model, k)
    ref = float(g[a, b])
    return RateResult(omega, rate_p - rate_m, delta, estimate, ref, _rel(estimate, ref, np.abs(g).max()), tail)


@dataclass
class MetricReconstruction:
    estimate: np.ndarray
    reference: np.ndarray
    rel_err: np.ndarray
    max_rel_err: float
    tail_mass: float


def reconstruct_metric(model: DiracModel, gammas: GammaSet, k, epsilon: float = 1e-2,
                       eta: float | None = None, eta_rel: float = 0.01,
                       gap_tolerance: float = GAP_TOLERANCE, **window) -> MetricReconstruction:
    """Every g_ab from integrated rates: diagonals from single-axis drives,
    off-diagonals from the differential two-axis rate.
    """
    _check_gammas(model, gammas)
    k = model.check_k(k)
    assert_real_diagonal(model, gammas, k)
    dim = model.dim
    est = np.zeros((dim, dim))
    tail = 0.0
    for a in range(dim):
        res = integrated_rate(model, gammas, k, DriveSpec(a, None, epsilon, 1, eta, eta_rel, **window),
                              gap_tolerance)
        est[a, a] = res.metric_estimate
        tail = res.tail_mass
        for b in range(a):
            off = differential_integrated_rate(model, gammas, k, (a, b), epsilon, eta, eta_rel,
                                               gap_tolerance, **window)
            est[a, b] = est[b, a] = off.metric_estimate
    ref = metric_closed_form(model, k)
    scale = np.abs(ref).max()
    rel = np.vectorize(lambda x, y: _rel(x, y, scale))(est, ref)
    return MetricReconstruction(est, ref, rel, float(rel.max()), tail)


def measured_metric_fn(gammas: GammaSet, epsilon: float = 1e-2, eta_rel: float = 0.01, window_rel: float = 10.0):
    """A ``metric_fn(model, k)`` for stacks of momenta that returns spectroscopic estimates.

    Every drive at one momentum shares the transition frequency, so the
    Lorentzian quadrature is done once per momentum and multiplied by the
    transition strengths of the 2N single-axis and N(2N-1) pairs of
    two-axis drives.
    """

    def metric_fn(model, k):
        k = model.check_k(k)
        flat = k.reshape(-1, model.dim)
        out = np.empty((len(flat), model.dim, model.dim))
        for i, q in enumerate(flat):
            gap = 2.0 * float(_gap(model.d_vector(q), GAP_TOLERANCE))
            drive = DriveSpec(0, epsilon=epsilon, eta_rel=eta_rel, window_rel=window_rel)
            eta, omega = drive.resolve(gap)
            weight = float(np.trapezoid(lorentzian(gap - omega, eta), omega))
            pref = 2.0 * math.pi * (epsilon / gap) ** 2 * weight
            proj = occupied_projector(model, gammas, q)
            dh = hamiltonian_derivatives(model, gammas, q)
            unocc = np.eye(gammas.size) - proj
            # s[a, b] = tr(P dH_a (1-P) dH_b)
            s = np.einsum("ij,ajk,kl,bli->ab", proj, dh, unocc, dh).real
            diag = np.diag(s)
            for a in range(model.dim):
                out[i, a, a] = pref * diag[a] / (2.0 * math.pi * epsilon**2)
                for b in range(a):
                    plus = diag[a] + diag[b] + 2 * s[a, b]
                    minus = diag[a] + diag[b] - 2 * s[a, b]
                    out[i, a, b] = out[i, b, a] = pref * (plus - minus) / (8.0 * math.pi * epsilon**2)
        return out.reshape(k.shape[:-1] + (model.dim, model.dim))

    return metric_fn


def time_domain_check(model: DiracModel, gammas: GammaSet, k, axis: int, epsilon: float = 1e-3,
                      times=(60.0, 120.0), n_omega: int = 161, steps_per_cycle: int = 40,
                      window: float = 20.0) -> dict:
    """Integrate the driven Schroedinger equation and compare with the golden rule.

    The occupied states are evolved under H(k(t)) for a band of drive
    frequencies around the gap. The excitation probability, integrated over
    omega, grows linearly at the golden-rule integrated rate; the slope
    between the two ``times`` (in units of 1/|d|) is compared with
    2 pi eps^2 g_aa. ``window`` sets the half-width of the frequency band in
    units of 2 pi / t_max.
    """
    k = model.check_k(k)
    d = float(_gap(model.d_vector(k), GAP_TOLERANCE))
    gap = 2.0 * d
    times = np.asarray(times, dtype=float) / d
    half = window * 2.0 * math.pi / times[-1]
    omegas = np.linspace(gap - half, gap + half, n_omega)
    dt = 2.0 * math.pi / (gap * steps_per_cycle)
    n_steps = int(math.ceil(times[-1] / dt))
    dt = times[-1] / n_steps
    record = {int(round(t / dt)): t for t in times}

    _, vecs = np.linalg.eigh(eval_hamiltonian(model, gammas, k))
    occ = vecs[:, : gammas.size // 2]
    state = np.broadcast_to(occ, (n_omega,) + occ.shape).astype(complex)
    unit = np.zeros(model.dim)
    unit[axis] = 1.0
    excited = {}
    for step in range(n_steps):
        t_mid = (step + 0.5) * dt
        shift = (2.0 * epsilon / omegas) * np.cos(omegas * t_mid)
        h = eval_hamiltonian(model, gammas, k + shift[:, None] * unit)
        w, v = np.linalg.eigh(h)
        prop = v @ (np.exp(-1j * w * dt)[..., None] * np.swapaxes(v.conj(), -1, -2))
        state = prop @ state
        if step + 1 in record:
            t = record[step + 1]
            shift_t = (2.0 * epsilon / omegas) * np.cos(omegas * t)
            proj_t = occupied_projector(model, gammas, k + shift_t[:, None] * unit)
            leak = np.eye(gammas.size) - proj_t
            prob = np.einsum("wia,wij,wja->w", state.conj(), leak, state).real
            excited[t] = float(np.trapezoid(prob, omegas))
    t1, t2 = times
    slope = (excited[t2] - excited[t1]) / (t2 - t1)
    golden = 2.0 * math.pi * epsilon**2 * float(metric_closed_form(model, k)[axis, axis])
    return {"slope": slope, "golden_rule": golden, "rel_diff": abs(slope - golden) / golden,
            "times": times.tolist(), "integrated_excitation": [excited[t] for t in times]}
