import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ellbvp import ConfigurationError, NotInvertibleError
from ellbvp.adapted import BoundaryOperator1D, mode_split
from ellbvp.bconds import aps, graph_bc, graph_normal_form
from ellbvp.indexlab import (
    CylinderModel,
    assemble,
    check_deformation,
    check_matching,
    cylinder,
    doubled_split,
    extension_semigroup_check,
    greens_convergence,
    greens_pairing_check,
    numerical_index,
    observed_order,
    periodic_index,
    square_function_check,
)
from oracles import ode_index, periodic_kernel

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.diag([1.0, -1.0]).astype(complex)


def oracle(model):
    ker = coker = 0
    for k in model.modes:
        a, b = ode_index(model.A.mode_matrix(k), model.bc[k].basis(), model.L)
        ker, coker = ker + a, coker + b
    return ker, coker


def test_derivative_alone_has_constants():
    A = BoundaryOperator1D.scalar(0.0, 0.0)
    splits = doubled_split(A, 0)
    free = graph_normal_form({0: np.eye(2)}, splits)
    rep = numerical_index(CylinderModel(1.0, 0, 20, A, free))
    assert (rep.dim_ker, rep.dim_coker, rep.index) == (1, 0, 1)


@pytest.mark.parametrize("s", [-1.5, -1.0, 0.0, 0.25, 0.5, 1.0, 2.0, 2.7])
def test_scalar_aps_spectral_flow(s):
    A = BoundaryOperator1D.scalar(1j, s)
    m = cylinder(1.0, 4, 40, A)
    rep = numerical_index(m)
    assert rep.reliable and rep.adjoint_consistent
    assert (rep.dim_ker, rep.dim_coker) == oracle(m)
    assert rep.index == int(float(s).is_integer() and abs(s) <= 4)


def test_pauli_model_index():
    for mass, want in [(0.8, 0), (0.0, 2)]:
        A = BoundaryOperator1D(1j * SZ, mass * SY)
        m = cylinder(1.0, 3, 30, A, sigma0=SX)
        rep = numerical_index(m)
        assert rep.index == want and rep.reliable
        assert (rep.dim_ker, rep.dim_coker) == oracle(m)


@given(st.integers(0, 10_000))
def test_graph_condition_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    A = BoundaryOperator1D(1j * SZ, rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    splits = doubled_split(A, 2)
    g = {k: rng.normal(size=(4, 4)) for k in splits}
    w = {0: rng.normal(size=(4, 1))} if splits[0].dim_plus > 1 else {}
    m = CylinderModel(1.0, 2, 24, A, graph_bc(splits, w_plus=w, g_ops=g), sigma0=SX)
    rep = numerical_index(m)
    assert rep.reliable
    assert (rep.dim_ker, rep.dim_coker) == oracle(m)
    assert rep.adjoint_consistent


def test_grid_and_cutoff_refinement():
    A = BoundaryOperator1D.scalar(1j, 1.0)
    base = numerical_index(cylinder(1.0, 4, 30, A)).index
    assert numerical_index(cylinder(1.0, 4, 59, A)).index == base
    assert numerical_index(cylinder(1.0, 8, 30, A)).index == base


def test_one_w_plus_vector_adds_one():
    A = BoundaryOperator1D(1j * SZ, 0.5 * SX)
    splits = doubled_split(A, 2)
    base = numerical_index(cylinder(1.0, 2, 30, A)).index
    bc = graph_bc(splits, w_plus={1: np.array([[1.0], [0.0], [0.3], [0.2]])})
    assert numerical_index(CylinderModel(1.0, 2, 30, A, bc)).index == base + 1


def test_unreliable_flag():
    rep = numerical_index(cylinder(1.0, 1, 10, BoundaryOperator1D.scalar(1j, 0.5)), gap_threshold=1e30)
    assert not rep.reliable and rep.status == "UNRELIABLE"


def test_assemble_shapes():
    m = cylinder(1.0, 1, 10, BoundaryOperator1D(1j * SZ, SX))
    for k, mat in assemble(m).items():
        assert mat.shape == (9 * 2 + 4 - m.bc[k].dim, 20)


@pytest.mark.parametrize("kw", [dict(L=0.0), dict(N=3), dict(K=-1)])
def test_model_validation(kw):
    A = BoundaryOperator1D.scalar(1j, 0.5)
    args = dict(L=1.0, K=1, N=10)
    args.update(kw)
    with pytest.raises(ConfigurationError):
        bc = aps(doubled_split(A, max(args["K"], 0)))
        CylinderModel(args["L"], args["K"], args["N"], A, bc)


def test_model_rejects_wrong_fiber():
    A = BoundaryOperator1D.scalar(1j, 0.5)
    with pytest.raises(ConfigurationError):
        CylinderModel(1.0, 1, 10, A, aps(mode_split(A, 1)))


def test_deformation_sweep():
    A = BoundaryOperator1D(1j * SZ, 0.7 * SY)
    splits = doubled_split(A, 2)
    swap = np.kron(SX, np.eye(2))
    bc = graph_bc(splits, w_minus={0: np.array([[0.0], [1.0], [0.0], [0.0]])}, g_ops={k: swap for k in splits})
    rep = check_deformation(CylinderModel(1.0, 2, 25, A, bc, sigma0=SX), steps=10)
    assert rep.constant and rep.first_jump is None and rep.formula_holds and rep.passed
    assert len(rep.reports) == 11 and rep.indices[0] == rep.aps_report.index - 1


def test_deformation_needs_steps():
    A = BoundaryOperator1D.scalar(1j, 0.5)
    with pytest.raises(ConfigurationError):
        check_deformation(cylinder(1.0, 1, 10, A), steps=0)


@pytest.mark.parametrize("s", [0.5, -0.3, 1.75])
def test_matching_scalar(s):
    rep = check_matching(BoundaryOperator1D.scalar(1j, s), 1.0, 4, 40, cuts=(0.3, 0.6))
    assert rep.passed
    A = BoundaryOperator1D.scalar(1j, s)
    assert rep.uncut.dim_ker == sum(periodic_kernel(A.mode_matrix(k), 1.0) for k in range(-4, 5))


def test_matching_requires_invertible():
    with pytest.raises(NotInvertibleError):
        check_matching(BoundaryOperator1D.scalar(1j, 1.0), 1.0, 2, 20)


def test_periodic_kernel_zero_mode():
    rep = periodic_index(BoundaryOperator1D.scalar(1.0, 0.0), 0, 1.0, 20)
    assert rep.dim_ker == 1 and rep.index == 0


# Green pairing ------------------------------------------------------------------------------


def sections(K, r, seed=0):
    rng = np.random.default_rng(seed)
    f = rng.normal(size=(2 * K + 1, r, 3)) + 1j * rng.normal(size=(2 * K + 1, r, 3))

    def make(c):
        def sec(t):
            t = t[:, None, None]
            return c[..., 0] * np.cos(t) + c[..., 1] * np.sin(2 * t) + c[..., 2] * t
        return sec

    return make(f), make(f[::-1] * 0.5 + 1)


def test_green_disjoint_supports():
    A = BoundaryOperator1D(1j * SZ, 0.3 * SX)
    m = cylinder(1.0, 1, 41, A, sigma0=SX)
    t = np.linspace(0, 1, 41)
    bump = lambda c: np.exp(-200 * (t - c) ** 2)[:, None, None] * np.ones((1, 3, 2))  # noqa: E731
    u = bump(0.25) * (t < 0.5)[:, None, None]
    v = bump(0.75) * (t > 0.5)[:, None, None]
    assert greens_pairing_check(m, u, v) < 1e-10


@pytest.mark.parametrize("sigma0", [np.eye(2), SX, np.array([[1.0, 2.0], [0.5, 3.0]])])
def test_green_second_order(sigma0):
    A = BoundaryOperator1D(np.array([[1j, 0.2], [0.1, -0.5j]]), np.array([[0.3, 1.0], [-0.2, 0.4j]]))
    m = cylinder(1.0, 2, 11, A, sigma0=sigma0)
    u, v = sections(2, 2)
    _, res, order = greens_convergence(m, u, v)
    assert order >= 1.9 and res[-1] < res[0]


def test_green_shape_check():
    m = cylinder(1.0, 1, 11, BoundaryOperator1D.scalar(1j, 0.5))
    with pytest.raises(ConfigurationError):
        greens_pairing_check(m, np.zeros((11, 2, 1)), np.zeros((11, 3, 1)))


def test_observed_order():
    hs = np.array([0.1, 0.05, 0.025])
    assert observed_order(hs, 3 * hs**2) == pytest.approx(2.0)


# semigroup ----------------------------------------------------------------------------------

HERM = BoundaryOperator1D(-1j * SZ, 0.5 * SX)


def test_semigroup_second_order():
    splits = mode_split(HERM, 3)
    bc = graph_bc(splits, g_ops={k: SX + 0.5 * np.eye(2) for k in splits})
    res = [extension_semigroup_check(HERM, bc, t_grid=np.linspace(0, 1, n)) for n in (33, 65, 129)]
    assert observed_order([1 / 32, 1 / 64, 1 / 128], res) >= 1.9


def test_semigroup_g_zero_continuum_identity():
    # with g = 0 the residual is pure differencing error and shrinks with h^2
    bc = aps(mode_split(HERM, 2))
    r1 = extension_semigroup_check(HERM, bc, t_grid=np.linspace(0, 1, 101))
    r2 = extension_semigroup_check(HERM, bc, t_grid=np.linspace(0, 1, 201))
    assert r2 < r1 / 3.5


def test_semigroup_rejects_non_self_adjoint():
    A = BoundaryOperator1D(np.eye(2), np.zeros((2, 2)))
    with pytest.raises(ConfigurationError):
        extension_semigroup_check(A, aps(mode_split(A, 1)))


def test_semigroup_rejects_v_outside_v_minus():
    bc = aps(mode_split(HERM, 0))
    plus = mode_split(HERM, 0)[0].plus_basis[:, 0]
    with pytest.raises(ConfigurationError):
        extension_semigroup_check(HERM, bc, v={0: plus})


@pytest.mark.parametrize("lam", [0.5, 1.0, 3.0])
def test_square_function_scalar(lam):
    quad, closed, rel = square_function_check(np.array([[lam]]), np.array([1.0]), T=20.0, points=20001)
    assert closed == pytest.approx(0.5, rel=1e-6)
    assert rel < 1e-3
