"""The eleven acceptance criteria, each at its stated tolerance.

Every test records one ``CRITERION n: PASS/FAIL`` line, printed in the pytest
terminal summary and to stdout, before asserting.
"""

import time

import numpy as np
import scipy.linalg

import conftest
from ellbvp._validation import subspace_distance
from ellbvp.adapted import (
    BoundaryOperator1D,
    adapted_symbol,
    conormal_data,
    is_invertible_bisectorial_proxy,
    mode_split,
    spectral_projectors,
)
from ellbvp.bconds import adjoint_condition, aps, graph_bc, local_interchange_check, ls_check
from ellbvp.indexlab import (
    CylinderModel,
    check_deformation,
    check_matching,
    cylinder,
    doubled_split,
    extension_semigroup_check,
    greens_convergence,
    numerical_index,
    observed_order,
    square_function_check,
)
from ellbvp.raritaschwinger import build_rs, rs_linear_symbol, rs_symbol
from ellbvp.symbolalg import (
    check_dirac_type,
    dirac_symbol,
    forms_symbol,
    forms_tangential_projector,
    operator_norm_bound,
    pauli_symbol,
)
from oracles import annihilator, ls_oracle, ode_index, rs_gram_eigs

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.diag([1.0, -1.0]).astype(complex)


def record(n, ok, detail):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}"
    conftest.ACCEPTANCE_LINES[n] = line
    print(line)
    assert ok, line


def cplx(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


# 1 ------------------------------------------------------------------------------------------


def test_criterion_01_rs_eigenvalues():
    start = time.perf_counter()
    worst, mult_ok = 0.0, True
    rng = np.random.default_rng(1)
    for n in (3, 4, 5, 6):
        data = build_rs(dirac_symbol(n))
        m = data.seed.coeffs[0].shape[0]
        lo, hi = ((n - 2) / n) ** 2, 1.0
        for _ in range(64):
            xi = rng.normal(size=n)
            xi /= np.linalg.norm(xi)
            eigs = np.asarray(rs_symbol(data, xi).gram_eigs)
            near_hi = np.abs(eigs - hi) <= 1e-9
            near_lo = np.abs(eigs - lo) <= 1e-9
            mult_ok &= near_hi.sum() == (n - 2) * m and near_lo.sum() == m and eigs.size == (n - 1) * m
            worst = max(worst, float(np.abs(np.sort(eigs) - rs_gram_eigs(list(data.seed.coeffs), xi)).max()))
    elapsed = time.perf_counter() - start
    ok = mult_ok and worst <= 1e-9 and elapsed < 10
    record(1, ok, f"multiplicities={'ok' if mult_ok else 'wrong'} oracle_dev={worst:.2e} time={elapsed:.2f}s")


# 2 ------------------------------------------------------------------------------------------


def test_criterion_02_identities():
    worst = max(max(build_rs(dirac_symbol(n)).identity_deviations().values()) for n in (3, 4, 5, 6))
    worst = max(worst, max(build_rs(pauli_symbol(3)).identity_deviations().values()))
    record(2, worst <= 1e-12, f"max_deviation={worst:.2e}")


# 3 ------------------------------------------------------------------------------------------


def test_criterion_03_dirac_certification():
    seeds = [pauli_symbol(2), pauli_symbol(3)] + [dirac_symbol(n) for n in range(2, 7)] + [forms_symbol(n) for n in (2, 3)]
    clifford_ok = all(check_dirac_type(s) for s in seeds)
    dirac_dev = max(abs(operator_norm_bound(s) - 1.0) for s in seeds)
    rs_dev = max(abs(operator_norm_bound(rs_linear_symbol(build_rs(dirac_symbol(n)))) - 1.0) for n in (3, 4))
    ok = clifford_ok and dirac_dev <= 1e-10 and rs_dev <= 1e-6
    record(3, ok, f"clifford={clifford_ok} |C-1|_dirac={dirac_dev:.2e} |C-1|_rs={rs_dev:.2e}")


# 4 ------------------------------------------------------------------------------------------


def defective_case(rng, n):
    """Jordan blocks with chosen eigenvalues, conjugated by a well-conditioned matrix."""
    eig, blocks = [], []
    while sum(b.shape[0] for b in blocks) < n:
        size = int(min(rng.integers(1, 4), n - sum(b.shape[0] for b in blocks)))
        lam = complex(rng.choice([-1, 1]) * rng.uniform(0.2, 2.0), rng.normal())
        blocks.append(lam * np.eye(size) + np.diag(np.ones(size - 1), 1))
        eig += [lam] * size
    J = scipy.linalg.block_diag(*blocks)
    S = np.linalg.qr(cplx(rng, n, n))[0] @ (np.eye(n) + 0.3 * np.triu(cplx(rng, n, n), 1))
    return S @ J @ np.linalg.inv(S), np.array(eig)


def test_criterion_04_projector_suite():
    rng = np.random.default_rng(4)
    tol = 1e-10
    start = time.perf_counter()
    worst, count_ok = 0.0, True
    for i in range(1000):
        n = int(rng.integers(2, 9))
        if i % 4 == 3:
            M, eig = defective_case(rng, n)
        else:
            M = cplx(rng, n, n)
            eig = np.linalg.eigvals(M)
        sp = spectral_projectors(M, tol)
        p, q = sp.chi_plus, sp.chi_minus
        worst = max(worst, np.abs(p + q - np.eye(n)).max(), np.abs(p @ p - p).max(), np.abs(q @ q - q).max(),
                    np.abs(p @ M - M @ p).max())
        count_ok &= round(np.trace(p).real) == int(np.sum(eig.real > tol))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and count_ok and elapsed < 30
    record(4, ok, f"max_residual={worst:.2e} trace_counts={'ok' if count_ok else 'wrong'} time={elapsed:.2f}s")


# 5 ------------------------------------------------------------------------------------------


def oracle_pair(model):
    ker = coker = 0
    for k in model.modes:
        a, b = ode_index(model.A.mode_matrix(k), model.bc[k].basis(), model.L)
        ker, coker = ker + a, coker + b
    return ker, coker


def index_models():
    rng = np.random.default_rng(5)
    out = []
    for i in range(25):
        A = BoundaryOperator1D.scalar(1j * rng.uniform(0.5, 2.0), complex(rng.normal() * 2, rng.normal()))
        splits = doubled_split(A, 3)
        if i % 2:
            g = {k: cplx(rng, 2, 2) for k in splits}
            k0 = int(rng.integers(-3, 4))
            wp = {k0: rng.normal(size=(2, 1))} if splits[k0].dim_plus > 1 else {}
            bc = graph_bc(splits, w_plus=wp, g_ops=g)
        else:
            bc = aps(splits)
        out.append(CylinderModel(rng.uniform(0.5, 2.0), 3, 30, A, bc))
    for i in range(25):
        A = BoundaryOperator1D(1j * SZ * rng.uniform(0.5, 2.0), cplx(rng, 2, 2))
        s0 = np.eye(2) + 0.3 * cplx(rng, 2, 2)
        splits = doubled_split(A, 2)
        if i % 2:
            g = {k: cplx(rng, 4, 4) for k in splits}
            k0 = int(rng.integers(-2, 3))
            wm = {k0: rng.normal(size=(4, 1))} if splits[k0].dim_minus > 1 else {}
            bc = graph_bc(splits, w_minus=wm, g_ops=g)
        else:
            bc = aps(splits)
        out.append(CylinderModel(1.0, 2, 30, A, bc, sigma0=s0))
    return out


def test_criterion_05_index_oracle():
    models = index_models()
    mismatches, min_gap = 0, np.inf
    for m in models:
        rep = numerical_index(m)
        mismatches += (rep.dim_ker, rep.dim_coker) != oracle_pair(m) or not rep.adjoint_consistent
        min_gap = min(min_gap, rep.rank_gap)
    ok = mismatches == 0 and min_gap > 1e3 and len(models) == 50
    record(5, ok, f"models={len(models)} mismatches={mismatches} min_rank_gap={min_gap:.2e}")


# 6 ------------------------------------------------------------------------------------------


def deformation_case(n_plus, n_minus):
    A = BoundaryOperator1D(1j * SZ, 0.7 * SY)
    splits = doubled_split(A, 3)
    swap = np.kron(SX, np.eye(2))
    rng = np.random.default_rng(10 * n_plus + n_minus)
    wp = {k: rng.normal(size=(4, 1)) for k in [0, 2][:n_plus]}
    wm = {k: rng.normal(size=(4, 1)) for k in [-1][:n_minus]}
    bc = graph_bc(splits, w_plus=wp, w_minus=wm, g_ops={k: swap + 0.2 * cplx(rng, 4, 4) for k in splits})
    return CylinderModel(1.0, 3, 30, A, bc, sigma0=SX)


def test_criterion_06_deformation():
    results = []
    for cfg in [(1, 0), (0, 1), (2, 1)]:
        rep = check_deformation(deformation_case(*cfg), steps=10)
        offset = rep.indices[0] - rep.aps_report.index
        good = (len(rep.indices) == 11 and rep.constant and rep.reliable and offset == cfg[0] - cfg[1]
                and (rep.dim_w_plus, rep.dim_w_minus) == cfg)
        results.append((cfg, offset, good))
    ok = all(r[2] for r in results)
    record(6, ok, " ".join(f"W{c}->offset {o}" for c, o, _ in results))


# 7 ------------------------------------------------------------------------------------------


def matching_models():
    rng = np.random.default_rng(7)
    out = [BoundaryOperator1D.scalar(1j, s) for s in (0.5, 0.25, -0.3, 1.7, 2.2)]
    out += [BoundaryOperator1D.scalar(1j * 1.5, complex(0.4, 0.3))]
    out += [BoundaryOperator1D(1j * SZ, 0.6 * SY), BoundaryOperator1D(1j * SZ, 0.5 * np.eye(2) + 0.2 * SX)]
    while len(out) < 10:
        A = BoundaryOperator1D(1j * SZ, cplx(rng, 2, 2))
        if is_invertible_bisectorial_proxy(A, 3):
            out.append(A)
    return out


def test_criterion_07_matching():
    bad = []
    for i, A in enumerate(matching_models()):
        rep = check_matching(A, 1.0, 3, 40, cuts=(0.25, 0.5, 0.75))
        if not (rep.indices_agree and rep.cut_invariant and rep.additive and rep.reliable):
            bad.append(i)
    record(7, not bad, f"models=10 failing={bad}")


# 8 ------------------------------------------------------------------------------------------


def band_limited(K, r, seed):
    rng = np.random.default_rng(seed)
    c = cplx(rng, 4, 2 * K + 1, r)

    def sec(t):
        t = t[:, None, None]
        return c[0] + c[1] * np.cos(np.pi * t) + c[2] * np.sin(2 * np.pi * t) + c[3] * np.cos(3 * t)

    return sec


def test_criterion_08_green_order():
    # The interior O(h^2) errors integrate to boundary terms, so the O(h^3)
    # one-sided endpoint stencils dominate on coarse grids; the base grid
    # h = 1/640 sits in the asymptotic regime for all three cases.
    orders = []
    cases = [
        (BoundaryOperator1D(1j * SZ, 0.3 * SX), SX),
        (BoundaryOperator1D(np.array([[1j, 0.2], [0.1, -0.5j]]), np.array([[0.3, 1.0], [-0.2, 0.4j]])), np.array([[1.0, 2.0], [0.5, 3.0]])),
        (BoundaryOperator1D.scalar(1j, 0.5), np.eye(1)),
    ]
    for A, s0 in cases:
        m = cylinder(1.0, 2, 641, A, sigma0=s0)
        _, _, order = greens_convergence(m, band_limited(2, A.rank, 1), band_limited(2, A.rank, 2), refinements=3)
        orders.append(order)
    record(8, min(orders) >= 1.9, "orders=" + ",".join(f"{o:.3f}" for o in orders))


# 9 ------------------------------------------------------------------------------------------


def test_criterion_09_adjoint_duality():
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(100):
        r = int(rng.integers(2, 4))
        A = BoundaryOperator1D(cplx(rng, r, r), cplx(rng, r, r))
        s0 = cplx(rng, r, r)
        splits = mode_split(A, 1)
        wp, wm = {}, {}
        k = int(rng.integers(-1, 2))
        if splits[k].dim_plus > 1:
            wp[k] = cplx(rng, r, 1)
        if splits[-k].dim_minus > 1:
            wm[-k] = cplx(rng, r, 1)
        bc = graph_bc(splits, wp, wm, {j: cplx(rng, r, r) for j in splits})
        adj = adjoint_condition(bc, s0, mode_split(A.adjoint_adapted(s0), 1)).validate()
        for j in bc.modes:
            worst = max(worst, subspace_distance(adj[j].basis(), annihilator(bc[j].basis(), s0)))
    # one zero eigenvalue: APS exceeds its adjoint by exactly ker(A)
    b = np.diag([1.0, -1.0, 0.0])
    s0 = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1j]])
    A = BoundaryOperator1D(np.zeros((3, 3)), b)
    bc = aps(mode_split(A, 0))
    adj = adjoint_condition(bc, s0, mode_split(A.adjoint_adapted(s0), 0))
    B, Bd = bc[0].basis(), adj[0].basis()
    kernel = np.eye(3)[:, [2]]
    example_ok = B.shape[1] == Bd.shape[1] + 1 and subspace_distance(np.hstack([Bd, kernel]), B) < 1e-10
    record(9, worst <= 1e-10 and example_ok, f"max_distance={worst:.2e} kernel_example={example_ok}")


# 10 -----------------------------------------------------------------------------------------


def test_criterion_10_lopatinsky_schapiro():
    rng = np.random.default_rng(10)
    samples = [np.array([1.0]), np.array([-1.0])]
    disagree = passes = 0
    for i in range(200):
        a = cplx(rng, 4, 4)
        if i % 3 == 0:
            # make some cases pass: P onto the negative eigenspace of i*a
            w, V = np.linalg.eig(1j * a)
            Q = np.linalg.qr(V[:, w.real < 0])[0]
        else:
            Q = np.linalg.qr(cplx(rng, 4, 4))[0][:, : int(rng.integers(1, 4))]
        P = Q @ Q.conj().T
        sym = lambda xi, a=a: xi[0] * a  # noqa: E731
        got = ls_check(lambda xi, P=P: P, sym, samples).passed
        disagree += got != ls_oracle(lambda xi, P=P: P, sym, samples)
        passes += got
    chiral = 0.5 * (np.eye(2) + SX)
    chiral_ok = ls_check(lambda xi: chiral, lambda xi: xi[0] * 1j * SZ, samples).passed

    D = forms_symbol(3)
    con = conormal_data(D, np.array([1.0, 0.0, 0.0]))
    bsym = lambda xi: adapted_symbol(D, con, np.concatenate([[0.0], xi]))  # noqa: E731
    xs = [x for x in np.random.default_rng(11).normal(size=(32, 2))]
    tan = forms_tangential_projector(3, 0)
    forms_ok = local_interchange_check(tan, bsym, xs) and local_interchange_check(np.eye(8) - tan, bsym, xs)
    ok = disagree == 0 and chiral_ok and forms_ok
    record(10, ok, f"cases=200 disagreements={disagree} passing_cases={passes} chiral={chiral_ok} forms_interchange={forms_ok}")


# 11 -----------------------------------------------------------------------------------------


def test_criterion_11_semigroup():
    A = BoundaryOperator1D(-1j * SZ, 0.5 * SX)
    splits = mode_split(A, 3)
    bc = graph_bc(splits, g_ops={k: SX + 0.5 * np.eye(2) for k in splits})
    ns = (33, 65, 129)
    res = [extension_semigroup_check(A, bc, t_grid=np.linspace(0, 1, n)) for n in ns]
    order = observed_order([1 / (n - 1) for n in ns], res)
    rng = np.random.default_rng(11)
    worst = 0.0
    for k in splits:
        M = A.mode_matrix(k)
        _, _, rel = square_function_check(M, cplx(rng, 2), T=5.0, points=4001)
        worst = max(worst, rel)
    ok = order >= 1.9 and worst <= 0.05
    record(11, ok, f"semigroup_order={order:.3f} square_function_rel_err={worst:.2e}")
