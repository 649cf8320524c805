"""Quantum geometry of Dirac-model Chern insulators.

The quantum metric of a 2N-dimensional Dirac model is the pulled-back round
metric of the 2N-sphere traced out by the unit d-vector. The package
computes it two ways, checks how it determines the non-Abelian Berry
curvature, integrates it into Chern numbers alongside lattice oracles,
builds its Riemannian curvature and recovers it from simulated
transition-rate spectroscopy.
"""
from .chern import (
    BrillouinGrid,
    ChernResult,
    bz_area,
    chern_first_fhs,
    chern_metric_method,
    chern_oracle,
    chern_second_plaquette,
    hypersphere_area,
    hypersphere_area_coefficient,
    mass_sweep,
)
from .errors import (
    ChernMetricError,
    ConfigError,
    DimensionMismatch,
    GapClosure,
    GapClosureOnGrid,
    GaugeFixFailure,
    MissingJacobian,
    SingularMetric,
    WindowTooNarrow,
)
from .gamma import GammaSet, build_gammas
from .models import (
    DiracModel,
    FourierTerm,
    Scheme,
    builtin_model,
    eval_hamiltonian,
    fourier_model,
    lattice_dirac,
    qhz4d,
    qwz2d,
    spectrum,
)
from .qgt import (
    QGTResult,
    curvature_form,
    det_identity_report,
    metric_closed_form,
    nonabelian_qgt,
    qgt_spectral,
    sgn_tf,
)
from .riemann import (
    CurvatureBundle,
    christoffel,
    curvature_bundle,
    euler_density_check,
    euler_integral,
    generic_points,
    hypersphere_check,
)
from .spectroscopy import (
    DriveSpec,
    RateResult,
    differential_integrated_rate,
    golden_rule_rate,
    integrated_rate,
    reconstruct_metric,
)

__version__ = "0.1.0"
