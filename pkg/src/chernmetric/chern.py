"""Brillouin-zone integration and Chern numbers.

Two independent routes are provided. The metric-area route integrates
sgn(TF) sqrt(det g) over the zone and divides by the area of the hypersphere
the zone maps onto. The lattice routes (Fukui-Hatsugai-Suzuki in 2D, a
non-Abelian plaquette field strength in 4D) only use overlaps of occupied
eigenvectors and serve as oracles.

Sign convention: both lattice routes measure F with the same sign as the
operator F_ab = i P [d_a P, d_b P] P of :mod:`chernmetric.qgt`, so
C_1 = (1/2pi) int tr F_12 and C_2 = (1/32pi^2) int eps tr(F F), and the
metric-area route needs no separate calibration.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np

from .errors import DimensionMismatch, GapClosureOnGrid
from .gamma import GammaSet, build_gammas
from .models import GAP_TOLERANCE, DiracModel, _check_gammas, eval_hamiltonian
from .qgt import metric_closed_form, sgn_tf, sqrt_det_metric

METHODS = ("metric_area_sgn", "metric_area_split", "fhs_2d", "plaquette_4d")
CHUNK = 4096


@dataclass(frozen=True)
class BrillouinGrid:
    """Uniform periodic grid on [-pi, pi)^(2N), L points per axis.

    With ``offset`` the points sit at cell midpoints, -pi + (j + 1/2) 2pi/L.
    """

    n_half_dim: int
    points_per_axis: int
    offset: bool = True

    def __post_init__(self):
        if self.points_per_axis < 1:
            raise ValueError("points_per_axis must be positive")

    @property
    def dim(self) -> int:
        return 2 * self.n_half_dim

    @property
    def spacing(self) -> float:
        return 2.0 * math.pi / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def n_points(self) -> int:
        return self.points_per_axis ** self.dim

    def axis(self) -> np.ndarray:
        shift = 0.5 if self.offset else 0.0
        return -math.pi + (np.arange(self.points_per_axis) + shift) * self.spacing

    def points(self) -> np.ndarray:
        """All momenta, shape (L, ..., L, 2N) in C order."""
        ax = self.axis()
        return np.stack(np.meshgrid(*([ax] * self.dim), indexing="ij"), axis=-1)

    def flat_points(self) -> np.ndarray:
        return self.points().reshape(-1, self.dim)


@dataclass
class ChernResult:
    value: float
    nearest_integer: int
    residual: float
    method: str
    grid: BrillouinGrid
    s_bz_plus: float | None = None
    s_bz_minus: float | None = None
    sign_constant: bool | None = None
    wall_time_ms: float = 0.0

    @property
    def s_bz(self) -> float | None:
        if self.s_bz_plus is None:
            return None
        return self.s_bz_plus + self.s_bz_minus


def _result(value, method, grid, **kw):
    value = float(value)
    nearest = int(round(value))
    return ChernResult(value, nearest, abs(value - nearest), method, grid, **kw)


def hypersphere_area_coefficient(n_half_dim: int) -> Fraction:
    """Rational c with S^(2N) = c * pi^N, c = N! 2^(N^2-N+1) / (2N)!."""
    n = int(n_half_dim)
    if n < 1:
        raise ValueError("N must be >= 1")
    return Fraction(math.factorial(n) * 2 ** (n * n - n + 1), math.factorial(2 * n))


def hypersphere_area(n_half_dim: int) -> float:
    """Area of the 2N-sphere of radius 2^((N-3)/2) that the zone maps onto."""
    c = hypersphere_area_coefficient(n_half_dim)
    return c.numerator * math.pi ** n_half_dim / c.denominator


def _check_grid(model: DiracModel, grid: BrillouinGrid):
    if grid.n_half_dim != model.n_half_dim:
        raise DimensionMismatch(f"grid has N={grid.n_half_dim}, model has N={model.n_half_dim}")


def check_gapped(model: DiracModel, grid: BrillouinGrid, gap_tolerance: float = GAP_TOLERANCE):
    pts = grid.flat_points()
    d = np.linalg.norm(model.d_vector(pts), axis=-1)
    bad = d < gap_tolerance
    if bad.any():
        raise GapClosureOnGrid(pts[bad], float(d.min()))


def _chunked_sum(fn, pts, threads):
    """Sum fn over fixed-size chunks; the reduction order never depends on ``threads``."""
    chunks = [pts[i:i + CHUNK] for i in range(0, len(pts), CHUNK)]
    if threads and threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(fn, chunks))
    else:
        parts = [fn(c) for c in chunks]
    total = np.zeros_like(np.asarray(parts[0], dtype=float))
    for p in parts:
        total = total + p
    return total


def area_density(model: DiracModel, k, scheme="analytic", metric_fn=None) -> np.ndarray:
    """sqrt(det g) at each momentum; ``metric_fn(model, k)`` overrides the metric."""
    g = metric_closed_form(model, k, scheme) if metric_fn is None else metric_fn(model, k)
    return sqrt_det_metric(g)


def bz_area(model: DiracModel, gammas: GammaSet | None, grid: BrillouinGrid, scheme="analytic",
            threads: int = 1, metric_fn=None) -> float:
    """S_BZ = int sqrt(det g) d^(2N)k by the midpoint rule."""
    _check_grid(model, grid)
    check_gapped(model, grid)
    total = _chunked_sum(lambda k: area_density(model, k, scheme, metric_fn).sum(), grid.flat_points(), threads)
    return float(total) * grid.cell_volume


def chern_metric_method(model: DiracModel, gammas: GammaSet, grid: BrillouinGrid, scheme="analytic",
                        threads: int = 1, metric_fn: Callable | None = None) -> ChernResult:
    """C_N = (S_BZ+ - S_BZ-) / S^(2N) with S_BZ+- the area where sgn(TF) = +-1.

    When sgn(TF) takes a single nonzero value on the whole grid the result is
    tagged ``metric_area_sgn`` (C_N = sgn S_BZ / S^(2N)); otherwise
    ``metric_area_split``.
    """
    _check_gammas(model, gammas)
    _check_grid(model, grid)
    check_gapped(model, grid)
    start = time.perf_counter()

    def part(k):
        root = area_density(model, k, scheme, metric_fn)
        sign = sgn_tf(model, gammas, k, scheme)
        return np.array([root[sign > 0].sum(), root[sign < 0].sum(),
                         np.count_nonzero(sign > 0), np.count_nonzero(sign < 0)], dtype=float)

    plus, minus, n_plus, n_minus = _chunked_sum(part, grid.flat_points(), threads)
    plus *= grid.cell_volume
    minus *= grid.cell_volume
    area = hypersphere_area(model.n_half_dim)
    constant = (n_plus == 0) != (n_minus == 0)
    if constant:
        sign = 1.0 if n_plus else -1.0
        value = sign * (plus + minus) / area
    else:
        value = (plus - minus) / area
    return _result(value, "metric_area_sgn" if constant else "metric_area_split", grid,
                   s_bz_plus=float(plus), s_bz_minus=float(minus), sign_constant=bool(constant),
                   wall_time_ms=1e3 * (time.perf_counter() - start))


def occupied_vectors(model: DiracModel, gammas: GammaSet, grid: BrillouinGrid) -> np.ndarray:
    """Occupied eigenvectors on the grid, shape (L, ..., L, 2^N, n_occ)."""
    check_gapped(model, grid)
    h = eval_hamiltonian(model, gammas, grid.points())
    _, vecs = np.linalg.eigh(h)
    return vecs[..., : gammas.size // 2]


def _unitary_part(m):
    """Closest unitary matrix (polar factor), batched over leading axes."""
    u, _, vh = np.linalg.svd(m)
    return u @ vh


def _links(vecs, dim):
    """U_a(k) = polar(V(k)^dag V(k + e_a)) for each axis a."""
    return [_unitary_part(np.swapaxes(vecs.conj(), -1, -2) @ np.roll(vecs, -1, axis=a)) for a in range(dim)]


def chern_first_fhs(model: DiracModel, gammas: GammaSet, grid: BrillouinGrid) -> ChernResult:
    """First Chern number from plaquette phases of the occupied band.

    Each plaquette is traversed k -> k+e2 -> k+e1+e2 -> k+e1 -> k and
    C_1 = (1/2pi) sum Arg(U_12 U_23 U_34 U_41).
    """
    _check_gammas(model, gammas)
    _check_grid(model, grid)
    if model.n_half_dim != 1:
        raise DimensionMismatch("the FHS oracle needs a two-dimensional model")
    start = time.perf_counter()
    vecs = occupied_vectors(model, gammas, grid)[..., 0]

    def link(u, v):
        z = np.sum(u.conj() * v, axis=-1)
        return z / np.abs(z)

    v00 = vecs
    v01 = np.roll(vecs, -1, axis=1)
    v11 = np.roll(v01, -1, axis=0)
    v10 = np.roll(vecs, -1, axis=0)
    loop = link(v00, v01) * link(v01, v11) * link(v11, v10) * link(v10, v00)
    value = np.angle(loop).sum() / (2.0 * math.pi)
    return _result(value, "fhs_2d", grid, wall_time_ms=1e3 * (time.perf_counter() - start))


def _log_unitary(w):
    """Principal matrix logarithm of a batch of unitary matrices."""
    if w.shape[-1] == 2:
        return _log_unitary_2x2(w)
    return _log_unitary_eig(w)


def _log_unitary_eig(w):
    vals, vecs = np.linalg.eig(w)
    logs = 1j * np.angle(vals)
    return vecs @ (logs[..., :, None] * np.linalg.inv(vecs))


def _log_unitary_2x2(w):
    """Closed form via W = exp(i phi) (cos t + i sin t n.sigma); eig fallback near the branch cut."""
    phi = 0.5 * np.angle(np.linalg.det(w))
    v = w * np.exp(-1j * phi)[..., None, None]
    cos_t = np.clip(0.5 * np.real(v[..., 0, 0] + v[..., 1, 1]), -1.0, 1.0)
    theta = np.arccos(cos_t)
    # i t n.sigma = t / (2 sin t) (V - V^dag)
    scale = 0.5 / np.sinc(theta / np.pi)
    out = scale[..., None, None] * (v - _dag(v)) + (1j * phi)[..., None, None] * np.eye(2)
    bad = np.abs(phi) + theta > 3.0
    if bad.any():
        out[bad] = _log_unitary_eig(w[bad])
    return out


def _dag(m):
    return np.swapaxes(m.conj(), -1, -2)


def _at(arr, shifts):
    """``arr`` evaluated at k + sum_axis s e_axis on the periodic grid."""
    for axis, s in shifts.items():
        if s:
            arr = np.roll(arr, -s, axis=axis)
    return arr


def _clover(fwd, a, b, s):
    """Average of i log W over the four s-by-s loops in plane (a, b) based at each site.

    All loops are traversed counter-clockwise in the (a, b) orientation and
    start at the site, so they share its frame.
    """
    ua, ub = fwd[a], fwd[b]
    for j in range(1, s):
        ua = ua @ _at(fwd[a], {a: j})
        ub = ub @ _at(fwd[b], {b: j})
    # ba(k) steps from k to k - s e_a
    ba, bb = _dag(_at(ua, {a: -s})), _dag(_at(ub, {b: -s}))
    loops = (
        ua @ _at(ub, {a: s}) @ _at(ba, {a: s, b: s}) @ _at(bb, {b: s}),
        ub @ _at(ba, {b: s}) @ _at(bb, {a: -s, b: s}) @ _at(ua, {a: -s}),
        ba @ _at(bb, {a: -s}) @ _at(ua, {a: -s, b: -s}) @ _at(ub, {b: -s}),
        bb @ _at(ua, {b: -s}) @ _at(ub, {a: s, b: -s}) @ _at(ba, {a: s}),
    )
    return 0.25j * sum(_log_unitary(w) for w in loops)


def plaquette_field_strength(vecs: np.ndarray, dim: int, improved: bool = True) -> np.ndarray:
    """Lattice field strength F_ab dk^2 at every site, shape (L..., dim, dim, n_occ, n_occ).

    Each closed loop of side s dk is close to exp(-i s^2 F_ab dk^2). The
    1x1 clover average is accurate to O(dk^2); with ``improved`` the 2x2
    clover is folded in as (16 F_1 - F_2) / 12, which cancels that term.
    """
    fwd = _links(vecs, dim)
    n = vecs.shape[-1]
    out = np.zeros(vecs.shape[:-2] + (dim, dim, n, n), dtype=complex)
    for a in range(dim):
        for b in range(a + 1, dim):
            f = _clover(fwd, a, b, 1)
            if improved:
                f = (16.0 * f - _clover(fwd, a, b, 2)) / 12.0
            out[..., a, b, :, :] = f
            out[..., b, a, :, :] = -f
    return out


def chern_second_plaquette(model: DiracModel, gammas: GammaSet, grid: BrillouinGrid,
                           improved: bool = True) -> ChernResult:
    """C_2 = (1/32 pi^2) sum_k eps_abcd tr(F_ab F_cd) dk^4 from lattice field strengths."""
    _check_gammas(model, gammas)
    _check_grid(model, grid)
    if model.n_half_dim != 2:
        raise DimensionMismatch("the plaquette oracle needs a four-dimensional model")
    start = time.perf_counter()
    vecs = occupied_vectors(model, gammas, grid)
    f = plaquette_field_strength(vecs, 4, improved)
    density = (
        np.einsum("...ij,...ji->...", f[..., 0, 1, :, :], f[..., 2, 3, :, :])
        - np.einsum("...ij,...ji->...", f[..., 0, 2, :, :], f[..., 1, 3, :, :])
        + np.einsum("...ij,...ji->...", f[..., 0, 3, :, :], f[..., 1, 2, :, :])
    ).real
    # eps_abcd tr(F_ab F_cd) = 8 (tr F01 F23 - tr F02 F13 + tr F03 F12)
    value = 8.0 * density.sum() / (32.0 * math.pi**2)
    return _result(value, "plaquette_4d", grid, wall_time_ms=1e3 * (time.perf_counter() - start))


ORACLE_FOR_N = {1: chern_first_fhs, 2: chern_second_plaquette}


def chern_oracle(model: DiracModel, gammas: GammaSet, grid: BrillouinGrid) -> ChernResult:
    try:
        oracle = ORACLE_FOR_N[model.n_half_dim]
    except KeyError:
        raise DimensionMismatch(f"no lattice oracle for N={model.n_half_dim}") from None
    return oracle(model, gammas, grid)


@dataclass
class SweepRow:
    m: float
    method: str
    result: ChernResult | None = None
    error: str | None = None


def mass_sweep(model_family: Callable[[float], DiracModel], m_values: Iterable[float], grid: BrillouinGrid,
               methods: Iterable[str] = ("metric", "oracle"), scheme="analytic",
               threads: int = 1) -> list[SweepRow]:
    """Chern numbers across a mass sweep, one row per (m, method).

    ``methods`` holds "metric" and/or "oracle". A gap closure on the grid is
    recorded in the row's ``error`` and the sweep moves on.
    """
    methods = tuple(methods)
    unknown = set(methods) - {"metric", "oracle"}
    if unknown:
        raise ValueError(f"unknown sweep methods {sorted(unknown)}")
    gammas = build_gammas(grid.n_half_dim)
    rows = []
    for m in m_values:
        model = model_family(m)
        for method in methods:
            try:
                if method == "metric":
                    res = chern_metric_method(model, gammas, grid, scheme, threads)
                else:
                    res = chern_oracle(model, gammas, grid)
            except GapClosureOnGrid as exc:
                rows.append(SweepRow(float(m), method, None, str(exc)))
            else:
                rows.append(SweepRow(float(m), res.method, res))
    return rows
