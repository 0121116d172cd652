import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from soliton_forge.characteristic import QuadraticCoefficients, free_particle, harmonic_trap
from soliton_forge.errors import (
    DegenerateNormError,
    DiagnosticsError,
    DomainError,
    ResolutionError,
    UnsupportedRegimeError,
)
from soliton_forge.verifier import (
    FieldGrid,
    GridSpec,
    SimpleLaws,
    l2_norm,
    l2_relative_error,
    pde_residual,
    read_field_csv,
    split_step_propagate,
    write_field_csv,
)


def free_gaussian(x, t, a=-1.0):
    """Exact solution of i psi_t = -a psi_xx from exp(-x**2/2) (Fourier transform by hand)."""
    s = 1.0 + 2.0j * a * t
    return np.exp(-x * x / (2.0 * s)) / np.sqrt(s)


def ground_state(x, t):
    """Lowest oscillator state of i psi_t = -psi_xx/2 + x**2 psi/2."""
    return np.exp(-x * x / 2.0 - 0.5j * t)


def _initial(fun, L=20.0, N=256):
    x = GridSpec(L, N, [0.0]).x_nodes
    return FieldGrid(x, [0.0], fun(x, 0.0))


# ---------------------------------------------------------------------------
# grids and norms

def test_gridspec_nodes_are_periodic_half_open():
    g = GridSpec.uniform(10.0, 64, 0.0, 1.0, 5)
    assert g.x_nodes[0] == -10.0 and g.x_nodes[-1] == pytest.approx(10.0 - g.dx)
    assert g.dx == pytest.approx(20.0 / 64)
    assert g.t_nodes.tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]


@pytest.mark.parametrize("L,N", [(0.0, 64), (-1.0, 64), (10.0, 100), (10.0, 32)])
def test_gridspec_rejects_bad_boxes(L, N):
    with pytest.raises(DomainError):
        GridSpec(L, N, [0.0])


def test_fieldgrid_shape_is_checked():
    with pytest.raises(DomainError):
        FieldGrid(np.zeros(4), [0.0, 1.0], np.zeros((3, 4)))
    g = FieldGrid(np.arange(4.0), 0.0, np.array([0.0, 1.0, 2.0, 0.5]))
    assert g.values.shape == (1, 4) and g.edge_ratio() == pytest.approx(0.25)


def test_l2_relative_error_basics():
    b = np.exp(-np.linspace(-5, 5, 101) ** 2) * (1 + 0.5j)
    assert l2_relative_error(b, b) == 0.0
    assert l2_relative_error(2 * b, b) == pytest.approx(1.0, rel=1e-15)
    with pytest.raises(DegenerateNormError):
        l2_relative_error(b, np.zeros_like(b))
    with pytest.raises(DomainError):
        l2_relative_error(b, b[:-1])


def test_l2_norm_of_gaussian():
    x = GridSpec(20.0, 512, [0.0]).x_nodes
    assert l2_norm(np.exp(-x * x / 2), x[1] - x[0]) == pytest.approx(math.pi**0.25, rel=1e-12)


def test_field_csv_roundtrip(tmp_path):
    spec = GridSpec.uniform(8.0, 64, 0.0, 0.5, 3)
    f = FieldGrid.sample(free_gaussian, spec)
    path = tmp_path / "field.csv"
    write_field_csv(path, f)
    header = path.read_text().splitlines()[0]
    assert header == "t x re im abs2"
    back = read_field_csv(path)
    assert np.array_equal(back.x_nodes, f.x_nodes) and np.array_equal(back.t_nodes, f.t_nodes)
    assert np.max(np.abs(back.values - f.values)) < 1e-15
    write_field_csv(tmp_path / "again.csv", f)
    assert (tmp_path / "again.csv").read_bytes() == path.read_bytes()


# ---------------------------------------------------------------------------
# residual

def test_residual_of_free_gaussian_is_small():
    rep = pde_residual(free_gaussian, free_particle(), SimpleLaws(), GridSpec.uniform(8.0, 64, 0.1, 1.0, 10))
    assert rep.passed(1e-6) and rep.rel_to_scale < 1e-6
    assert rep.stencil_orders == (4, 4)


def test_residual_of_ground_state_and_wrong_coefficients():
    grid = GridSpec.uniform(6.0, 64, 0.1, 1.0, 8)
    assert pde_residual(ground_state, harmonic_trap(), SimpleLaws(), grid).rel_to_scale < 1e-6
    # dropping the trap must show up as an O(1) defect
    assert pde_residual(ground_state, QuadraticCoefficients.from_values(0.5), SimpleLaws(), grid).rel_to_scale > 0.1


def test_residual_of_zero_field():
    rep = pde_residual(lambda x, t: 0 * x * t + 0j, free_particle(), SimpleLaws(), GridSpec.uniform(5.0, 64, 0.1, 0.5, 4))
    assert rep.max_abs == 0.0


def test_residual_with_nonlinearity_uses_h():
    # bright state of i psi_t = psi_xx + 2|psi|^2 psi, frequency -1
    def bright(x, t):
        return np.exp(-1j * t) / np.cosh(x)

    grid = GridSpec.uniform(10.0, 64, 0.1, 1.0, 6)
    good = SimpleLaws(h=lambda t: 2.0 + 0 * np.asarray(t, dtype=float))
    assert pde_residual(bright, free_particle(), good, grid).rel_to_scale < 1e-6
    assert pde_residual(bright, free_particle(), SimpleLaws(), grid).rel_to_scale > 0.1


def test_residual_reports_unsettled_refinement():
    rough = lambda x, t: np.exp(1j * 1e4 * x * x) + 0 * t  # noqa: E731
    with pytest.raises(DiagnosticsError):
        pde_residual(rough, free_particle(), SimpleLaws(), GridSpec.uniform(5.0, 64, 0.1, 0.5, 3),
                     max_refinements=2)


# ---------------------------------------------------------------------------
# split-step propagation

def test_free_propagation_is_exact_in_fourier_space():
    res = split_step_propagate(_initial(free_gaussian), free_particle(), SimpleLaws(), 1.0, 0.005,
                               store_times=[0.5, 1.0])
    for i, t in enumerate(res.t_nodes):
        assert l2_relative_error(res.values[i], free_gaussian(res.x_nodes, t)) < 1e-10
    assert res.t_nodes.tolist() == [0.0, 0.5, 1.0]
    assert res.meta["steps"] == 200


@given(st.floats(-0.5, 0.5), st.floats(0.2, 1.0))
def test_damping_and_drift_gauges(d, g):
    """i psi_t = psi_xx - i d psi + i g psi_x has psi = exp(-d t) free(x + g t, t)."""
    coeffs = QuadraticCoefficients.from_values(-1, 0, 0, d, 0, g)
    res = split_step_propagate(_initial(free_gaussian), coeffs, SimpleLaws(), 0.8, 0.005)
    ref = math.exp(-d * 0.8) * free_gaussian(res.x_nodes + g * 0.8, 0.8)
    assert l2_relative_error(res.values[-1], ref) < 1e-9


def test_harmonic_ground_state_second_order_in_dt():
    errs = []
    for dt in (0.02, 0.01):
        res = split_step_propagate(_initial(ground_state, L=12.0, N=128), harmonic_trap(), SimpleLaws(), 1.0, dt)
        errs.append(l2_relative_error(res.values[-1], ground_state(res.x_nodes, 1.0)))
    assert errs[1] < 1e-4
    assert math.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.2)


def test_norm_is_conserved_without_damping():
    laws = SimpleLaws(h=lambda t: 2.0 + 0 * np.asarray(t, dtype=float))
    res = split_step_propagate(_initial(lambda x, t: 1 / np.cosh(x) + 0j), free_particle(), laws, 1.0, 1e-3)
    norms = np.array(res.meta["gauged_norms"])
    assert np.max(np.abs(norms - norms[0])) < 1e-12


def test_forcing_potential_is_applied():
    # a uniform potential G = 1 only rotates the phase
    laws = SimpleLaws(forcing=lambda x, t: np.ones_like(np.asarray(x, dtype=float)))
    res = split_step_propagate(_initial(free_gaussian), free_particle(), laws, 0.5, 0.005)
    assert l2_relative_error(res.values[-1], np.exp(-0.5j) * free_gaussian(res.x_nodes, 0.5)) < 1e-10


def test_split_step_rejections():
    psi0 = _initial(free_gaussian)
    with pytest.raises(UnsupportedRegimeError):
        split_step_propagate(psi0, QuadraticCoefficients.from_values(-1, 0, 0.1), SimpleLaws(), 1.0, 0.01)
    with pytest.raises(DomainError):
        split_step_propagate(psi0, free_particle(), SimpleLaws(), 1.0, 5.0)  # stability guard
    with pytest.raises(DomainError):
        split_step_propagate(psi0, free_particle(), SimpleLaws(), -1.0, 0.01)
    two_rows = FieldGrid(psi0.x_nodes, [0.0, 1.0], np.vstack([psi0.values, psi0.values]))
    with pytest.raises(DomainError):
        split_step_propagate(two_rows, free_particle(), SimpleLaws(), 1.0, 0.01)


def test_resolution_guards():
    wide = _initial(lambda x, t: np.exp(-x * x / 800) + 0j)
    with pytest.raises(ResolutionError):
        split_step_propagate(wide, free_particle(), SimpleLaws(), 0.1, 0.005)
    # a taper removes the edge problem
    split_step_propagate(wide, free_particle(), SimpleLaws(), 0.1, 0.005, taper=0.2)
    narrow = _initial(lambda x, t: np.exp(-x * x / 0.02) + 0j, L=20.0, N=128)
    with pytest.raises(ResolutionError):
        split_step_propagate(narrow, free_particle(), SimpleLaws(), 0.1, 0.001)
