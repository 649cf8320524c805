"""Quantum geometric tensor, quantum metric and Berry-curvature traces.

Projector formulas are the primary path, so no eigenvector gauge is ever
fixed except in :func:`nonabelian_qgt`, which exposes the band-resolved
tensor literally.

Curvature convention: A_a = i<n|d_a n>, F = dA - iA^A, represented on the
occupied space by the operator F_ab = i P [d_a P, d_b P] P. With this sign
the lattice oracles in :mod:`chernmetric.chern` give the same Chern numbers
as the continuum integrals of tr F and eps tr(F F).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np

from .errors import GaugeFixFailure
from .gamma import GammaSet
from .models import (
    GAP_TOLERANCE,
    DiracModel,
    _check_gammas,
    _gap,
    as_scheme,
    d_hat,
    d_hat_jacobian,
    eval_hamiltonian,
    hamiltonian_derivatives,
    occupied_projector,
    projector_derivatives,
)

SIGN_THRESHOLD = 1e-12


@dataclass
class QGTResult:
    """Occupied-trace geometry at one momentum (or a stack of momenta).

    qgt              Q_ab summed over the occupied levels (complex)
    metric           g_ab = Re (Q_ab + Q_ba) / 2
    curvature_trace  sum_n F^nn_ab = i (Q_ab - Q_ba)
    pair_trace       tr(F_ab F_cd), only when requested
    """

    k: np.ndarray
    qgt: np.ndarray
    metric: np.ndarray
    curvature_trace: np.ndarray
    pair_trace: np.ndarray | None = None


def metric_prefactor(n_half_dim: int) -> float:
    return 2.0 ** (n_half_dim - 3)


def metric_closed_form(model: DiracModel, k, scheme="analytic",
                       gap_tolerance: float = GAP_TOLERANCE) -> np.ndarray:
    """g_ab = 2^(N-3) sum_i d_a dhat_i d_b dhat_i."""
    jac = d_hat_jacobian(model, k, scheme, gap_tolerance)
    return metric_prefactor(model.n_half_dim) * np.einsum("...ai,...bi->...ab", jac, jac)


def qgt_spectral(model: DiracModel, gammas: GammaSet, k, scheme="analytic",
                 gap_tolerance: float = GAP_TOLERANCE, with_pairs: bool = False) -> QGTResult:
    """Q_ab = tr(P d_aH (1-P) d_bH) / 4|d|^2, from the Hamiltonian derivatives."""
    _check_gammas(model, gammas)
    k = model.check_k(k)
    d = _gap(model.d_vector(k), gap_tolerance)
    proj = occupied_projector(model, gammas, k, gap_tolerance)
    unocc = np.eye(gammas.size) - proj
    dh = hamiltonian_derivatives(model, gammas, k, scheme)

    left = np.einsum("...ij,...ajk->...aik", proj, dh)
    right = np.einsum("...ij,...bjk->...bik", unocc, dh)
    q = np.einsum("...aij,...bji->...ab", left, right) / (4.0 * d[..., None, None] ** 2)

    metric = 0.5 * (q + np.swapaxes(q, -1, -2)).real
    curvature = (1j * (q - np.swapaxes(q, -1, -2))).real
    pairs = curvature_pair_trace(model, gammas, k, scheme, gap_tolerance) if with_pairs else None
    return QGTResult(k, q, metric, curvature, pairs)


def _gauge_fix(vectors):
    """Make the largest-magnitude component of every column real and positive."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        pivot = col[np.argmax(np.abs(col))]
        if abs(pivot) < 1e-12:
            raise GaugeFixFailure(f"pivot magnitude {abs(pivot):.1e} too small for column {j}")
        out[:, j] = col * (abs(pivot) / pivot)
    return out


def occupied_frame(model: DiracModel, gammas: GammaSet, k,
                   gap_tolerance: float = GAP_TOLERANCE) -> tuple[np.ndarray, np.ndarray]:
    """Gauge-fixed eigenvectors (occupied, unoccupied) as columns at a single k."""
    h = eval_hamiltonian(model, gammas, k)
    _gap(model.d_vector(k), gap_tolerance)
    _, vecs = np.linalg.eigh(h)
    n_occ = gammas.size // 2
    return _gauge_fix(vecs[:, :n_occ]), _gauge_fix(vecs[:, n_occ:])


def nonabelian_qgt(model: DiracModel, gammas: GammaSet, k, scheme="analytic",
                   gauge: np.ndarray | None = None,
                   gap_tolerance: float = GAP_TOLERANCE) -> np.ndarray:
    """Band-resolved Q^{n1 n2}_ab = sum_m <d_a n1|m><m|d_b n2>, shape (2N, 2N, n_occ, n_occ).

    Only the unoccupied projection of |d_a n> enters, and
    (1-P)|d_a n> = (1-P)(d_a P)|n> for any smooth frame, so the derivative
    is taken on the projector. ``gauge`` rotates the occupied frame
    |n_j> -> sum_i |n_i> U_ij before evaluation.
    """
    _check_gammas(model, gammas)
    k = model.check_k(k)
    occ, unocc = occupied_frame(model, gammas, k, gap_tolerance)
    if gauge is not None:
        occ = occ @ np.asarray(gauge)
    dp = projector_derivatives(model, gammas, k, scheme, gap_tolerance)
    # overlaps[a, m, n] = <m| d_a P |n>
    overlaps = np.einsum("im,aij,jn->amn", unocc.conj(), dp, occ)
    return np.einsum("amx,bmy->abxy", overlaps.conj(), overlaps)


def curvature_operators(model: DiracModel, gammas: GammaSet, k, scheme="analytic",
                        gap_tolerance: float = GAP_TOLERANCE) -> np.ndarray:
    """F_ab = i P [d_a P, d_b P] P, shape (..., 2N, 2N, 2^N, 2^N)."""
    proj = occupied_projector(model, gammas, k, gap_tolerance)
    dp = projector_derivatives(model, gammas, k, scheme, gap_tolerance)
    prod = np.einsum("...aij,...bjk->...abik", dp, dp)
    comm = prod - np.swapaxes(prod, -4, -3)
    p = proj[..., None, None, :, :]
    return 1j * (p @ comm @ p)


def curvature_pair_trace(model: DiracModel, gammas: GammaSet, k, scheme="analytic",
                         gap_tolerance: float = GAP_TOLERANCE) -> np.ndarray:
    """tr(F_ab F_cd), real array of shape (..., 2N, 2N, 2N, 2N)."""
    f = curvature_operators(model, gammas, k, scheme, gap_tolerance)
    return np.einsum("...abij,...cdji->...abcd", f, f).real


@lru_cache(maxsize=None)
def _pair_permutations(dim):
    """(sign, index tuple) over permutations with a1<a2, a3<a4, ..."""
    out = []
    for perm in permutations(range(dim)):
        if all(perm[i] < perm[i + 1] for i in range(0, dim, 2)):
            out.append((_parity(perm), perm))
    return tuple(out)


def _parity(perm):
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def levi_civita(dim: int) -> np.ndarray:
    eps = np.zeros((dim,) * dim)
    for perm in permutations(range(dim)):
        eps[perm] = _parity(perm)
    return eps


def curvature_form(model: DiracModel, gammas: GammaSet, k, scheme="analytic",
                   gap_tolerance: float = GAP_TOLERANCE) -> np.ndarray:
    """eps_{a1..a2N} tr(F_{a1a2} ... F_{a(2N-1)a2N}), the integrand behind sgn(TF)."""
    f = curvature_operators(model, gammas, k, scheme, gap_tolerance)
    dim = model.dim
    total = np.zeros(f.shape[:-4], dtype=complex)
    for sign, perm in _pair_permutations(dim):
        prod = f[..., perm[0], perm[1], :, :]
        for i in range(2, dim, 2):
            prod = prod @ f[..., perm[i], perm[i + 1], :, :]
        total = total + sign * np.trace(prod, axis1=-2, axis2=-1)
    return (2 ** model.n_half_dim) * total.real


def d_hat_determinant(model: DiracModel, k, scheme="analytic",
                      gap_tolerance: float = GAP_TOLERANCE) -> np.ndarray:
    """Signed det of the square matrix with rows (dhat, d_1 dhat, ..., d_2N dhat)."""
    dh = d_hat(model, k, gap_tolerance)
    jac = d_hat_jacobian(model, k, scheme, gap_tolerance)
    mat = np.concatenate([dh[..., None, :], jac], axis=-2)
    return np.linalg.det(mat)


def determinant_form_prefactor(n_half_dim: int) -> float:
    return 2.0 ** (n_half_dim * (n_half_dim - 3))


def curvature_form_prefactor(n_half_dim: int) -> float:
    n = n_half_dim
    return 2.0 ** (n * n - 3 * n + 1) / math.factorial(2 * n)


def sqrt_det_metric(g: np.ndarray) -> np.ndarray:
    """sqrt(det g), with rounding-level negative determinants clamped to zero."""
    det = np.linalg.det(g)
    return np.sqrt(np.where((det < 0) & (det > -1e-14), 0.0, det))


@dataclass
class DetIdentityReport:
    sqrt_det_g: np.ndarray
    quarter_det_A: np.ndarray
    ff_form: np.ndarray
    max_rel_discrepancy: np.ndarray


def _rel_gap(x, y):
    scale = np.maximum(np.abs(x), np.abs(y))
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.abs(x - y) / scale
    return np.where(scale > 0, rel, 0.0)


def det_identity_report(model: DiracModel, gammas: GammaSet, k, scheme="analytic",
                        metric_perturbation: float = 0.0,
                        gap_tolerance: float = GAP_TOLERANCE) -> DetIdentityReport:
    """Three expressions for sqrt(det g) and their largest relative disagreement.

    ``quarter_det_A`` is 2^(N(N-3)) |det(dhat, d dhat ...)| (1/4 |det A| at N=2);
    ``ff_form`` is 2^(N^2-3N+1)/(2N)! |eps tr(F...F)|, which at N=1 equals
    |F_12|/2. ``metric_perturbation`` rescales g by (1 + p) to exercise the
    check against a wrong metric.
    """
    n = model.n_half_dim
    g = metric_closed_form(model, k, scheme, gap_tolerance) * (1.0 + metric_perturbation)
    root = sqrt_det_metric(g)
    det_form = determinant_form_prefactor(n) * np.abs(d_hat_determinant(model, k, scheme, gap_tolerance))
    ff = curvature_form_prefactor(n) * np.abs(curvature_form(model, gammas, k, scheme, gap_tolerance))
    worst = np.maximum(np.maximum(_rel_gap(root, det_form), _rel_gap(root, ff)), _rel_gap(det_form, ff))
    return DetIdentityReport(root, det_form, ff, worst)


def sgn_tf(model: DiracModel, gammas: GammaSet, k, scheme="analytic",
           threshold: float = SIGN_THRESHOLD, gap_tolerance: float = GAP_TOLERANCE):
    """Sign of eps tr(F...F): -1, 0 or +1 (array for stacked k).

    The value is declared zero when the implied sqrt(det g) falls below
    ``threshold`` times its Hadamard bound 2^(N(N-3)) prod_a |d_a dhat|,
    i.e. when the tangent vectors are degenerate to that relative accuracy.
    """
    value = curvature_form(model, gammas, k, scheme, gap_tolerance)
    jac = d_hat_jacobian(model, k, scheme, gap_tolerance)
    bound = determinant_form_prefactor(model.n_half_dim) * np.prod(np.linalg.norm(jac, axis=-1), axis=-1)
    implied = curvature_form_prefactor(model.n_half_dim) * np.abs(value)
    sign = np.where(implied > threshold * bound, np.sign(value), 0.0).astype(int)
    return int(sign) if sign.ndim == 0 else sign
