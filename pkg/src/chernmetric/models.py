"""Dirac Hamiltonians H(k) = d0(k) + sum_i d_i(k) G_i and their band data.

Every function accepts a single momentum of shape (2N,) or a stack of
momenta of shape (..., 2N); leading axes broadcast through.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, GapClosure, MissingJacobian
from .gamma import GammaSet

GAP_TOLERANCE = 1e-10
FD_STEP = 1e-5
SCHEMES = ("analytic", "fd", "fd_projector")


@dataclass(frozen=True)
class DiracModel:
    """A periodic d-vector model.

    ``d_map(k)`` returns shape (..., 2N+2) holding (d0, d1, ..., d_{2N+1}).
    ``jacobian(k)``, if given, returns shape (..., 2N, 2N+1) holding
    partial_a d_i for i >= 1 (the d0 derivative never enters the geometry).
    """

    n_half_dim: int
    d_map: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    params: Mapping[str, float] = field(default_factory=dict)
    name: str = "custom"

    @property
    def dim(self) -> int:
        return 2 * self.n_half_dim

    @property
    def n_components(self) -> int:
        return 2 * self.n_half_dim + 1

    def check_k(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        if k.shape[-1:] != (self.dim,):
            raise DimensionMismatch(f"{self.name}: expected k with last axis {self.dim}, got shape {k.shape}")
        return k

    def full_d(self, k) -> np.ndarray:
        return np.asarray(self.d_map(self.check_k(k)), dtype=float)

    def d_vector(self, k) -> np.ndarray:
        """(d1, ..., d_{2N+1}) without the energy offset."""
        return self.full_d(k)[..., 1:]

    def offset(self, k) -> np.ndarray:
        return self.full_d(k)[..., 0]


@dataclass(frozen=True)
class SpectrumAtK:
    e_minus: float
    e_plus: float
    gap_half_width: float
    degeneracy: int


@dataclass(frozen=True)
class Scheme:
    """How derivatives are taken.

    analytic      chain rule on the model's Jacobian
    fd            central differences of d (and of d-hat for d_hat_jacobian)
    fd_projector  central differences of the matrices P(k) and H(k)
    """

    kind: str = "analytic"
    step: float = FD_STEP

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ValueError(f"unknown derivative scheme {self.kind!r}; choose from {SCHEMES}")
        if not self.step > 0:
            raise ValueError("finite-difference step must be positive")


def as_scheme(scheme) -> Scheme:
    if isinstance(scheme, Scheme):
        return scheme
    if scheme is None:
        return Scheme()
    if isinstance(scheme, str):
        return Scheme(scheme)
    kind, step = scheme
    return Scheme(kind, step)


def _check_gammas(model: DiracModel, gammas: GammaSet):
    if gammas.n_half_dim != model.n_half_dim:
        raise DimensionMismatch(
            f"model {model.name} has N={model.n_half_dim} but gamma set has N={gammas.n_half_dim}")


def _gap(d_vec, gap_tolerance):
    d = np.sqrt(np.sum(d_vec**2, axis=-1))
    dmin = float(np.min(d)) if d.size else np.inf
    if dmin < gap_tolerance:
        raise GapClosure(f"|d| = {dmin:.3e} below gap tolerance {gap_tolerance:.1e}", dmin)
    return d


# ---------------------------------------------------------------------------
# built-in lattice models
# ---------------------------------------------------------------------------

def _lattice_d(k, m):
    k = np.asarray(k, dtype=float)
    out = np.empty(k.shape[:-1] + (k.shape[-1] + 2,))
    out[..., 0] = 0.0
    out[..., 1:-1] = np.sin(k)
    out[..., -1] = m + np.sum(np.cos(k), axis=-1)
    return out


def _lattice_jacobian(k):
    k = np.asarray(k, dtype=float)
    dim = k.shape[-1]
    jac = np.zeros(k.shape[:-1] + (dim, dim + 1))
    idx = np.arange(dim)
    jac[..., idx, idx] = np.cos(k)
    jac[..., :, -1] = -np.sin(k)
    return jac


def lattice_dirac(n_half_dim: int, m: float, name: str | None = None) -> DiracModel:
    """d = (sin k_1, ..., sin k_2N, m + sum_a cos k_a), d0 = 0."""
    m = float(m)
    return DiracModel(
        n_half_dim=n_half_dim,
        d_map=lambda k: _lattice_d(k, m),
        jacobian=_lattice_jacobian,
        params={"m": m},
        name=name or f"lattice{2 * n_half_dim}d",
    )


def qwz2d(m: float = 1.0) -> DiracModel:
    return lattice_dirac(1, m, "qwz2d")


def qhz4d(m: float = -3.0) -> DiracModel:
    return lattice_dirac(2, m, "qhz4d")


BUILTIN_MODELS: dict[str, Callable[..., DiracModel]] = {"qwz2d": qwz2d, "qhz4d": qhz4d}


def builtin_model(name: str, **params) -> DiracModel:
    try:
        factory = BUILTIN_MODELS[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; built-ins are {sorted(BUILTIN_MODELS)}") from None
    return factory(**params)


def with_energy_offset(model: DiracModel, d0: Callable[[np.ndarray], np.ndarray]) -> DiracModel:
    """Return ``model`` with d0(k) added to the identity component."""
    base = model.d_map

    def d_map(k):
        out = np.array(base(k), dtype=float)
        out[..., 0] = out[..., 0] + d0(k)
        return out

    return replace(model, d_map=d_map, name=f"{model.name}+d0")


# ---------------------------------------------------------------------------
# Fourier-table models
# ---------------------------------------------------------------------------

_FACTOR_RE = re.compile(r"^\s*(sin|cos)\(\s*(?:(\d+)\s*\*\s*)?k(\d+)\s*\)\s*$")


@dataclass(frozen=True)
class FourierTerm:
    """coef * prod_j f_j(n_j k_{a_j}) with f_j in {sin, cos}; axes are 0-based."""

    coef: float
    factors: tuple[tuple[str, int, int], ...] = ()

    @classmethod
    def parse(cls, coef: float, factors: Sequence[str], dim: int) -> "FourierTerm":
        parsed = []
        for text in factors:
            match = _FACTOR_RE.match(text)
            if not match:
                raise ValueError(f"cannot parse factor {text!r}; expected e.g. 'sin(k1)' or 'cos(2*k3)'")
            fn, harmonic, axis = match.group(1), int(match.group(2) or 1), int(match.group(3))
            if not 1 <= axis <= dim:
                raise ValueError(f"factor {text!r} refers to k{axis}, but the model has {dim} axes")
            parsed.append((fn, harmonic, axis - 1))
        return cls(float(coef), tuple(parsed))

    def value(self, k):
        out = np.full(k.shape[:-1], self.coef)
        for fn, n, a in self.factors:
            out = out * (np.sin(n * k[..., a]) if fn == "sin" else np.cos(n * k[..., a]))
        return out

    def gradient(self, k):
        dim = k.shape[-1]
        grad = np.zeros(k.shape[:-1] + (dim,))
        vals = [np.sin(n * k[..., a]) if fn == "sin" else np.cos(n * k[..., a]) for fn, n, a in self.factors]
        ders = [n * np.cos(n * k[..., a]) if fn == "sin" else -n * np.sin(n * k[..., a])
                for fn, n, a in self.factors]
        for j, (_, _, a) in enumerate(self.factors):
            part = np.full(k.shape[:-1], self.coef) * ders[j]
            for i, v in enumerate(vals):
                if i != j:
                    part = part * v
            grad[..., a] += part
        return grad


def fourier_model(n_half_dim: int, d_terms: Sequence[Sequence[FourierTerm]],
                  d0_terms: Sequence[FourierTerm] = (), name: str = "fourier") -> DiracModel:
    """Model whose components are finite sums of products of sin/cos of single k's."""
    if len(d_terms) != 2 * n_half_dim + 1:
        raise DimensionMismatch(f"N={n_half_dim} needs {2 * n_half_dim + 1} d-components, got {len(d_terms)}")
    d_terms = tuple(tuple(t) for t in d_terms)
    d0_terms = tuple(d0_terms)

    def d_map(k):
        k = np.asarray(k, dtype=float)
        out = np.zeros(k.shape[:-1] + (len(d_terms) + 1,))
        for t in d0_terms:
            out[..., 0] += t.value(k)
        for i, comp in enumerate(d_terms):
            for t in comp:
                out[..., i + 1] += t.value(k)
        return out

    def jacobian(k):
        k = np.asarray(k, dtype=float)
        jac = np.zeros(k.shape[:-1] + (k.shape[-1], len(d_terms)))
        for i, comp in enumerate(d_terms):
            for t in comp:
                jac[..., :, i] += t.gradient(k)
        return jac

    return DiracModel(n_half_dim, d_map, jacobian, {}, name)


# ---------------------------------------------------------------------------
# spectra and projectors
# ---------------------------------------------------------------------------

def eval_hamiltonian(model: DiracModel, gammas: GammaSet, k) -> np.ndarray:
    """d0 I + sum_i d_i G_i, shape (..., 2^N, 2^N)."""
    _check_gammas(model, gammas)
    full = model.full_d(k)
    eye = np.eye(gammas.size)
    return full[..., 0, None, None] * eye + gammas.contract(full[..., 1:])


def spectrum(model: DiracModel, gammas: GammaSet, k, gap_tolerance: float = GAP_TOLERANCE) -> SpectrumAtK:
    """Closed-form levels d0 -+ |d| of a single momentum."""
    _check_gammas(model, gammas)
    k = model.check_k(k)
    if k.ndim != 1:
        raise DimensionMismatch("spectrum() takes a single momentum")
    full = model.full_d(k)
    d = float(_gap(full[1:], gap_tolerance))
    return SpectrumAtK(full[0] - d, full[0] + d, d, 2 ** (model.n_half_dim - 1))


def d_hat(model: DiracModel, k, gap_tolerance: float = GAP_TOLERANCE) -> np.ndarray:
    dv = model.d_vector(k)
    d = _gap(dv, gap_tolerance)
    return dv / d[..., None]


def occupied_projector(model: DiracModel, gammas: GammaSet, k,
                       gap_tolerance: float = GAP_TOLERANCE) -> np.ndarray:
    """Projector onto the lower level, (I - d-hat . G) / 2."""
    _check_gammas(model, gammas)
    dh = d_hat(model, k, gap_tolerance)
    return 0.5 * (np.eye(gammas.size) - gammas.contract(dh))


def _unit_steps(dim, h):
    return h * np.eye(dim)


def _central_fd(fn, k, h):
    """(f(k + h e_a) - f(k - h e_a)) / 2h, with the axis index a inserted after the batch axes."""
    k = np.asarray(k, dtype=float)
    dim = k.shape[-1]
    steps = _unit_steps(dim, h)
    plus = fn(k[..., None, :] + steps)
    minus = fn(k[..., None, :] - steps)
    return (plus - minus) / (2.0 * h)


def d_jacobian(model: DiracModel, k, scheme="analytic") -> np.ndarray:
    """partial_a d_i, shape (..., 2N, 2N+1)."""
    scheme = as_scheme(scheme)
    k = model.check_k(k)
    if scheme.kind == "analytic":
        if model.jacobian is None:
            raise MissingJacobian(f"model {model.name} has no analytic Jacobian")
        return np.asarray(model.jacobian(k), dtype=float)
    return _central_fd(model.d_vector, k, scheme.step)


def d_hat_jacobian(model: DiracModel, k, scheme="analytic",
                   gap_tolerance: float = GAP_TOLERANCE) -> np.ndarray:
    """partial_a d-hat_i, shape (..., 2N, 2N+1).

    The analytic scheme uses (partial_a d_i - d-hat_i partial_a |d|) / |d|; the
    finite-difference schemes differentiate d-hat itself.
    """
    scheme = as_scheme(scheme)
    k = model.check_k(k)
    dv = model.d_vector(k)
    d = _gap(dv, gap_tolerance)
    if scheme.kind == "analytic":
        dh = dv / d[..., None]
        jac = d_jacobian(model, k, scheme)
        d_norm = np.einsum("...ai,...i->...a", jac, dh)
        return (jac - d_norm[..., None] * dh[..., None, :]) / d[..., None, None]
    return _central_fd(lambda q: d_hat(model, q, gap_tolerance), k, scheme.step)


def projector_derivatives(model: DiracModel, gammas: GammaSet, k, scheme="analytic",
                          gap_tolerance: float = GAP_TOLERANCE) -> np.ndarray:
    """partial_a P, shape (..., 2N, 2^N, 2^N)."""
    scheme = as_scheme(scheme)
    _check_gammas(model, gammas)
    if scheme.kind == "fd_projector":
        k = model.check_k(k)
        d_hat(model, k, gap_tolerance)
        return _central_fd(lambda q: occupied_projector(model, gammas, q, gap_tolerance), k, scheme.step)
    return -0.5 * gammas.contract(d_hat_jacobian(model, k, scheme, gap_tolerance))


def hamiltonian_derivatives(model: DiracModel, gammas: GammaSet, k, scheme="analytic") -> np.ndarray:
    """Traceless part of partial_a H, shape (..., 2N, 2^N, 2^N).

    The d0 contribution is proportional to the identity and never connects
    the two levels, so it is dropped in every scheme.
    """
    scheme = as_scheme(scheme)
    _check_gammas(model, gammas)
    if scheme.kind == "fd_projector":
        k = model.check_k(k)
        dh = _central_fd(lambda q: eval_hamiltonian(model, gammas, q), k, scheme.step)
        tr = np.trace(dh, axis1=-2, axis2=-1) / gammas.size
        return dh - tr[..., None, None] * np.eye(gammas.size)
    return gammas.contract(d_jacobian(model, k, scheme))
