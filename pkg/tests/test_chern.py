import math
from fractions import Fraction

import numpy as np
import pytest

from chernmetric import build_gammas
from chernmetric.chern import (
    BrillouinGrid,
    _log_unitary_2x2,
    _log_unitary_eig,
    _unitary_part,
    bz_area,
    chern_first_fhs,
    chern_metric_method,
    chern_oracle,
    chern_second_plaquette,
    hypersphere_area,
    hypersphere_area_coefficient,
    mass_sweep,
)
from chernmetric.errors import DimensionMismatch, GapClosureOnGrid
from chernmetric.models import qhz4d, qwz2d


def sphere_area(n_dim, radius):
    return 2 * math.pi ** ((n_dim + 1) / 2) / math.gamma((n_dim + 1) / 2) * radius**n_dim


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_hypersphere_area_matches_gamma_function(n):
    radius = 2.0 ** ((n - 3) / 2)
    assert hypersphere_area(n) == pytest.approx(sphere_area(2 * n, radius), rel=1e-14)


def test_hypersphere_area_rational_coefficients():
    assert hypersphere_area_coefficient(1) == 1
    assert hypersphere_area_coefficient(2) == Fraction(2, 3)
    with pytest.raises(ValueError):
        hypersphere_area_coefficient(0)


def test_grid_geometry():
    grid = BrillouinGrid(2, 6)
    pts = grid.points()
    assert pts.shape == (6, 6, 6, 6, 4)
    assert grid.n_points == 6**4
    assert grid.cell_volume * grid.n_points == pytest.approx((2 * math.pi) ** 4)
    np.testing.assert_allclose(grid.axis()[0], -math.pi + math.pi / 6)
    assert BrillouinGrid(1, 4, offset=False).axis()[0] == -math.pi


@pytest.mark.parametrize("m,expected", [(-3.0, 0), (-1.0, 1), (1.0, -1), (3.0, 0)])
def test_fhs_oracle(gammas1, m, expected):
    res = chern_first_fhs(qwz2d(m), gammas1, BrillouinGrid(1, 24))
    assert res.nearest_integer == expected
    assert res.residual < 1e-10  # a sum of branch-cut phases is an integer up to rounding
    assert res.method == "fhs_2d"


@pytest.mark.parametrize("m", [-3.0, -1.0, 1.0, 3.0, -1.9, 0.3])
def test_metric_method_matches_fhs(gammas1, m):
    grid = BrillouinGrid(1, 60)
    metric = chern_metric_method(qwz2d(m), gammas1, grid)
    assert metric.nearest_integer == chern_first_fhs(qwz2d(m), gammas1, grid).nearest_integer
    assert metric.residual < 0.05


def test_metric_method_in_four_dimensions(gammas2):
    grid = BrillouinGrid(2, 10)
    for m, expected in [(-3.0, -1), (-1.0, 3), (5.0, 0)]:
        metric = chern_metric_method(qhz4d(m), gammas2, grid)
        oracle = chern_second_plaquette(qhz4d(m), gammas2, grid)
        assert metric.nearest_integer == oracle.nearest_integer == expected
        assert metric.s_bz_plus >= 0 and metric.s_bz_minus >= 0


def test_area_split_is_consistent(gammas2):
    grid = BrillouinGrid(2, 8)
    res = chern_metric_method(qhz4d(-3.0), gammas2, grid)
    assert res.s_bz == pytest.approx(bz_area(qhz4d(-3.0), gammas2, grid), rel=1e-12)
    assert res.value == pytest.approx((res.s_bz_plus - res.s_bz_minus) / hypersphere_area(2))
    # the orientation changes sign across the zone, so both patches are present
    assert not res.sign_constant and res.method == "metric_area_split"


def test_threads_do_not_change_results(gammas2):
    grid = BrillouinGrid(2, 10)
    serial = chern_metric_method(qhz4d(-1.0), gammas2, grid, threads=1)
    threaded = chern_metric_method(qhz4d(-1.0), gammas2, grid, threads=4)
    assert serial.value == threaded.value
    assert serial.s_bz_plus == threaded.s_bz_plus


def test_plaquette_improvement_converges_faster(gammas2):
    grid = BrillouinGrid(2, 8)
    plain = chern_second_plaquette(qhz4d(-3.0), gammas2, grid, improved=False)
    improved = chern_second_plaquette(qhz4d(-3.0), gammas2, grid)
    assert improved.residual < plain.residual


def test_gap_closure_on_grid(gammas1):
    with pytest.raises(GapClosureOnGrid) as info:
        chern_metric_method(qwz2d(-2.0), gammas1, BrillouinGrid(1, 8, offset=False))
    assert (0.0, 0.0) in info.value.points
    with pytest.raises(GapClosureOnGrid):
        chern_oracle(qwz2d(-2.0), gammas1, BrillouinGrid(1, 9))


def test_grid_dimension_checked(gammas1):
    with pytest.raises(DimensionMismatch):
        chern_metric_method(qwz2d(1.0), gammas1, BrillouinGrid(2, 4))


def test_mass_sweep_records_gap_closure():
    rows = mass_sweep(qwz2d, [-1.0, 0.0], BrillouinGrid(1, 8, offset=False))
    assert [r.method for r in rows[:2]] == ["metric_area_split", "fhs_2d"]
    closed = [r for r in rows if r.m == 0.0]
    assert all(r.result is None and "gap closes" in r.error for r in closed)
    with pytest.raises(ValueError):
        mass_sweep(qwz2d, [1.0], BrillouinGrid(1, 8), methods=("magic",))


def test_unitary_logs_agree(rng):
    z = rng.normal(size=(200, 2, 2)) + 1j * rng.normal(size=(200, 2, 2))
    w = _unitary_part(z)
    np.testing.assert_allclose(_log_unitary_2x2(w), _log_unitary_eig(w), atol=1e-12)
