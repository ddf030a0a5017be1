"""Numerical index experiments for ``D = sigma0 (d/dt + A)`` on cylinders ``[0, L] x S^1``.

Each Fourier mode ``k`` gives an ODE ``u' + M_k u = 0`` on ``[0, L]``.  It is
discretized with the box (trapezoidal) scheme on ``N`` nodes,

    (u_{i+1} - u_i) + (h/2) M_k (u_{i+1} + u_i) = 0,     i = 0..N-2,

and the boundary condition on the doubled boundary ``(u(0), u(L))`` adds rows
whose common kernel is the condition subspace.  The discrete propagator is the
Cayley transform of ``-h M_k``, which keeps the sign of every real part, so the
discrete kernel has the same dimension as the continuum one.

The cokernel is the kernel of the adjoint problem ``-sigma0^* (d/dt + A~)``
with the adjoint condition, where ``A~ = -sigma0^{*-1} A^* sigma0^*``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.linalg

from ._validation import ConfigurationError, NotInvertibleError, as_cmatrix
from .adapted import (
    DEFAULT_REALPART_TOL,
    BoundaryOperator1D,
    is_invertible_bisectorial_proxy,
    mode_split,
    ordered_map,
)
from .bconds import GraphBC, adjoint_condition, aps, direct_sum, direct_sum_split, matching

__all__ = [
    "CylinderModel",
    "IndexReport",
    "DeformationReport",
    "MatchingReport",
    "cylinder",
    "doubled_split",
    "assemble",
    "assemble_adjoint",
    "numerical_index",
    "periodic_index",
    "check_deformation",
    "check_matching",
    "greens_pairing_check",
    "greens_convergence",
    "extension_semigroup_check",
    "square_function_check",
    "observed_order",
    "DEFAULT_SVD_TOL",
    "DEFAULT_GAP_THRESHOLD",
]

DEFAULT_SVD_TOL = 1e-8
DEFAULT_GAP_THRESHOLD = 1e3
_TAIL = 4


@dataclass(frozen=True)
class CylinderModel:
    """Cylinder ``[0, L] x S^1`` with one condition on the doubled boundary.

    ``bc`` lives on ``C^r (+) C^r`` (trace at ``t = 0`` then at ``t = L``) and
    is in graphical form relative to the split of ``A (+) (-A)``: the right end
    carries the orientation-reversed operator ``-A``.
    """

    L: float
    K: int
    N: int
    A: BoundaryOperator1D
    bc: GraphBC
    sigma0: np.ndarray | None = None
    coercive_at_infinity: bool = True

    def __post_init__(self):
        if not self.L > 0:
            raise ConfigurationError("cylinder length L must be positive")
        if self.K < 0:
            raise ConfigurationError("mode cutoff K must be nonnegative")
        if self.N < 4:
            raise ConfigurationError("time grid needs N >= 4 points")
        if not self.coercive_at_infinity:
            raise ConfigurationError("the operator must be coercive at infinity")
        if self.bc.modes != list(range(-self.K, self.K + 1)):
            raise ConfigurationError("boundary condition modes do not match the cutoff K")
        if self.bc.fiber_rank != 2 * self.A.rank:
            raise ConfigurationError("boundary condition must act on the doubled fiber of rank 2r")
        s0 = np.eye(self.A.rank, dtype=complex) if self.sigma0 is None else as_cmatrix(self.sigma0, "sigma0", square=True)
        if s0.shape[0] != self.A.rank:
            raise ConfigurationError("sigma0 must match the rank of A")
        if np.linalg.cond(s0) > 1e12:
            raise ConfigurationError("sigma0 must be invertible")
        object.__setattr__(self, "sigma0", s0)

    @property
    def r(self):
        return self.A.rank

    @property
    def h(self):
        return self.L / (self.N - 1)

    @property
    def modes(self):
        return list(range(-self.K, self.K + 1))

    def with_bc(self, bc):
        return CylinderModel(self.L, self.K, self.N, self.A, bc, self.sigma0)

    def with_grid(self, N=None, L=None):
        return CylinderModel(self.L if L is None else L, self.K, self.N if N is None else N, self.A, self.bc, self.sigma0)


def doubled_split(A, K, realpart_tol=DEFAULT_REALPART_TOL, workers=1):
    """Per-mode split of ``A (+) (-A)``."""
    left = mode_split(A, K, realpart_tol, workers)
    right = mode_split(A.negated(), K, realpart_tol, workers)
    return {k: direct_sum_split(left[k], right[k]) for k in left}


def cylinder(L, K, N, A, left=None, right=None, bc=None, sigma0=None, realpart_tol=DEFAULT_REALPART_TOL):
    """Build a :class:`CylinderModel`.

    Either give ``bc`` on the doubled boundary, or ``left`` (relative to the
    split of ``A``) and ``right`` (relative to the split of ``-A``); missing
    ends default to the APS condition.
    """
    if bc is None:
        if left is None:
            left = aps(mode_split(A, K, realpart_tol))
        if right is None:
            right = aps(mode_split(A.negated(), K, realpart_tol))
        bc = direct_sum(left, right)
    elif left is not None or right is not None:
        raise ConfigurationError("give either bc or left/right conditions, not both")
    return CylinderModel(L, K, N, A, bc, sigma0)


# Assembly ------------------------------------------------------------------------------


def _box_rows(M, N, h):
    r = M.shape[0]
    eye = np.eye(r)
    lo = -eye + 0.5 * h * M
    hi = eye + 0.5 * h * M
    rows = np.zeros(((N - 1) * r, N * r), dtype=complex)
    for i in range(N - 1):
        rows[i * r:(i + 1) * r, i * r:(i + 1) * r] = lo
        rows[i * r:(i + 1) * r, (i + 1) * r:(i + 2) * r] = hi
    return rows


def _trace_rows(C, N, r):
    """Rows ``C [u_0; u_{N-1}]`` embedded in the grid unknowns."""
    out = np.zeros((C.shape[0], N * r), dtype=complex)
    out[:, :r] = C[:, :r]
    out[:, (N - 1) * r:] = C[:, r:]
    return out


def _mode_system(M, block, N, h):
    return np.vstack([_box_rows(M, N, h), _trace_rows(block.rows(), N, M.shape[0])])


def assemble(model):
    """Per-mode discrete systems ``{k: matrix}`` of size ``((N-1) r + rows_B) x N r``."""
    return {k: _mode_system(model.A.mode_matrix(k), model.bc[k], model.N, model.h) for k in model.modes}


def adjoint_data(model, realpart_tol=DEFAULT_REALPART_TOL):
    """Adjoint adapted operator ``A~`` and the adjoint condition on the doubled boundary."""
    A_adj = model.A.adjoint_adapted(model.sigma0)
    splits = doubled_split(A_adj, model.K, realpart_tol)
    sig = scipy.linalg.block_diag(model.sigma0, -model.sigma0)
    return A_adj, adjoint_condition(model.bc, sig, splits)


def assemble_adjoint(model, realpart_tol=DEFAULT_REALPART_TOL):
    """Per-mode systems of ``D^dagger`` with the adjoint condition.

    ``D^dagger = -sigma0^* (d/dt + A~)``; the invertible prefactor is dropped
    since it does not change kernels.
    """
    A_adj, bc_adj = adjoint_data(model, realpart_tol)
    return {k: _mode_system(A_adj.mode_matrix(k), bc_adj[k], model.N, model.h) for k in model.modes}


# Rank analysis -------------------------------------------------------------------------


@dataclass(frozen=True)
class _Rank:
    nullity: int
    rank: int
    rows: int
    tail: tuple
    gap: float


def _rank_analysis(matrix, svd_tol):
    sv = np.linalg.svd(matrix, compute_uv=False)
    rows, cols = matrix.shape
    if sv.size == 0 or sv[0] == 0.0:
        return _Rank(cols, 0, rows, tuple(), np.inf)
    cut = svd_tol * sv[0]
    kept = sv[sv > cut]
    dropped = sv[sv <= cut]
    rank = kept.size
    floor = sv[0] * np.finfo(float).eps
    denom = dropped[0] if dropped.size and dropped[0] > floor else floor
    gap = float(kept[-1] / denom) if kept.size else np.inf
    return _Rank(cols - rank, rank, rows, tuple(float(x) for x in sv[-_TAIL:]), gap)


@dataclass(frozen=True)
class IndexReport:
    dim_ker: int
    dim_coker: int
    index: int
    singular_values: dict
    rank_gap: float
    gap_threshold: float
    per_mode: dict
    dim_coker_transpose: int
    svd_tol: float
    label: str = ""

    @property
    def reliable(self):
        return self.rank_gap > self.gap_threshold

    @property
    def status(self):
        return "OK" if self.reliable else "UNRELIABLE"

    @property
    def adjoint_consistent(self):
        return self.dim_coker == self.dim_coker_transpose


def numerical_index(model, svd_tol=DEFAULT_SVD_TOL, gap_threshold=DEFAULT_GAP_THRESHOLD,
                    realpart_tol=DEFAULT_REALPART_TOL, workers=1):
    """Kernel from the discrete system, cokernel from the adjoint system with ``B^dagger``.

    ``dim_coker_transpose`` (rows minus rank of the primal system) is kept as a
    cross-check.  ``rank_gap`` is the worst ratio, over modes and both
    systems, of the smallest retained to the largest discarded singular value
    (or the noise floor ``sigma_max * eps`` when nothing is discarded).
    """
    if svd_tol <= 0:
        raise ConfigurationError("svd_tol must be positive")
    primal = assemble(model)
    dual = assemble_adjoint(model, realpart_tol)
    ks = model.modes
    prim = dict(zip(ks, ordered_map(lambda k: _rank_analysis(primal[k], svd_tol), ks, workers)))
    dua = dict(zip(ks, ordered_map(lambda k: _rank_analysis(dual[k], svd_tol), ks, workers)))
    per_mode = {}
    ker = coker = coker_t = 0
    gap = np.inf
    tails = {}
    for k in ks:
        p, d = prim[k], dua[k]
        ck_t = p.rows - p.rank
        per_mode[k] = {"ker": p.nullity, "coker": d.nullity, "coker_transpose": ck_t}
        ker += p.nullity
        coker += d.nullity
        coker_t += ck_t
        gap = min(gap, p.gap, d.gap)
        tails[k] = p.tail
    return IndexReport(
        dim_ker=ker,
        dim_coker=coker,
        index=ker - coker,
        singular_values=tails,
        rank_gap=float(gap),
        gap_threshold=float(gap_threshold),
        per_mode=per_mode,
        dim_coker_transpose=coker_t,
        svd_tol=float(svd_tol),
        label=model.bc.label,
    )


def periodic_index(A, K, L, N, svd_tol=DEFAULT_SVD_TOL, gap_threshold=DEFAULT_GAP_THRESHOLD, workers=1):
    """Index of ``d/dt + A`` on the closed circle of length ``L`` (``N`` nodes, spacing ``L/N``)."""
    h = L / N
    r = A.rank

    def system(k):
        rows = _box_rows(A.mode_matrix(k), N + 1, h)
        # identify node N with node 0
        return rows[:, : N * r] + np.hstack([rows[:, N * r:], np.zeros((N * r, (N - 1) * r))])

    ks = list(range(-K, K + 1))
    res = ordered_map(lambda k: _rank_analysis(system(k), svd_tol), ks, workers)
    ker = sum(x.nullity for x in res)
    coker = sum(x.rows - x.rank for x in res)
    return IndexReport(
        dim_ker=ker,
        dim_coker=coker,
        index=ker - coker,
        singular_values={k: x.tail for k, x in zip(ks, res)},
        rank_gap=float(min(x.gap for x in res)),
        gap_threshold=float(gap_threshold),
        per_mode={k: {"ker": x.nullity, "coker": x.rows - x.rank, "coker_transpose": x.rows - x.rank}
                  for k, x in zip(ks, res)},
        dim_coker_transpose=coker,
        svd_tol=float(svd_tol),
        label="periodic",
    )


# Deformation ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeformationReport:
    s_values: tuple
    reports: tuple
    aps_report: IndexReport
    dim_w_plus: int
    dim_w_minus: int
    constant: bool
    first_jump: float | None
    formula_holds: bool

    @property
    def indices(self):
        return [r.index for r in self.reports]

    @property
    def reliable(self):
        return self.aps_report.reliable and all(r.reliable for r in self.reports)

    @property
    def passed(self):
        return self.constant and self.formula_holds and self.reliable


def check_deformation(model, bc=None, steps=10, svd_tol=DEFAULT_SVD_TOL, gap_threshold=DEFAULT_GAP_THRESHOLD,
                      realpart_tol=DEFAULT_REALPART_TOL, workers=1):
    """Index along ``B_s``, ``s = 0, 1/steps, ..., 1``, and the offset ``dim W+ - dim W-`` from APS."""
    if steps < 1:
        raise ConfigurationError("steps must be at least 1")
    bc = model.bc if bc is None else bc
    s_values = tuple(i / steps for i in range(steps + 1))
    reports = tuple(
        numerical_index(model.with_bc(bc.deform(s)), svd_tol, gap_threshold, realpart_tol, workers)
        for s in s_values
    )
    aps_bc = aps(doubled_split(model.A, model.K, realpart_tol))
    aps_report = numerical_index(model.with_bc(aps_bc), svd_tol, gap_threshold, realpart_tol, workers)
    first_jump = None
    for s, prev, cur in zip(s_values[1:], reports, reports[1:]):
        if cur.index != prev.index:
            first_jump = s
            break
    offset = bc.dim_w_plus - bc.dim_w_minus
    return DeformationReport(
        s_values=s_values,
        reports=reports,
        aps_report=aps_report,
        dim_w_plus=bc.dim_w_plus,
        dim_w_minus=bc.dim_w_minus,
        constant=first_jump is None,
        first_jump=first_jump,
        formula_holds=reports[-1].index == aps_report.index + offset,
    )


# Matching and gluing -------------------------------------------------------------------


@dataclass(frozen=True)
class MatchingReport:
    uncut: IndexReport
    matching: IndexReport
    aps: IndexReport
    cut_pieces: tuple
    whole: IndexReport

    @property
    def indices_agree(self):
        return self.uncut.index == self.matching.index == self.aps.index

    @property
    def additive(self):
        return all(left.index + right.index == self.whole.index for _, left, right in self.cut_pieces)

    @property
    def cut_invariant(self):
        return len({left.index + right.index for _, left, right in self.cut_pieces}) <= 1

    @property
    def reliable(self):
        reps = [self.uncut, self.matching, self.aps, self.whole]
        reps += [p for _, a, b in self.cut_pieces for p in (a, b)]
        return all(r.reliable for r in reps)

    @property
    def passed(self):
        return self.indices_agree and self.additive and self.cut_invariant and self.reliable


def check_matching(A_N, L, K, N, cuts=(0.5,), left=None, right=None, svd_tol=DEFAULT_SVD_TOL,
                   gap_threshold=DEFAULT_GAP_THRESHOLD, realpart_tol=DEFAULT_REALPART_TOL, workers=1):
    """Compare the uncut, matching and APS indices, and test additivity across cuts.

    (a) ``d/dt + A_N`` on the closed circle of length ``L``;
    (b) ``[0, L]`` with the matching condition ``u(0) = u(L)``;
    (c) ``[0, L]`` with ``B_APS(A_N (+) -A_N)``.
    Additivity: the cylinder ``[0, L]`` with end conditions ``left``/``right``
    (APS by default) is cut at ``c * L`` for each ``c`` in ``cuts``; the cut
    carries ``B_APS(-A_N)`` on the left piece and ``B_APS(A_N)`` on the right
    piece, which together form ``B_APS(A_N (+) -A_N)``.
    """
    if not is_invertible_bisectorial_proxy(A_N, K, realpart_tol):
        raise NotInvertibleError("A_N has eigenvalues on the imaginary axis; apply shift_to_invertible first")
    idx = lambda m: numerical_index(m, svd_tol, gap_threshold, realpart_tol, workers)  # noqa: E731
    uncut = periodic_index(A_N, K, L, N - 1, svd_tol, gap_threshold, workers)
    match = idx(CylinderModel(L, K, N, A_N, matching(A_N, K, realpart_tol)))
    aps_rep = idx(CylinderModel(L, K, N, A_N, aps(doubled_split(A_N, K, realpart_tol))))

    plus_split = mode_split(A_N, K, realpart_tol)
    minus_split = mode_split(A_N.negated(), K, realpart_tol)
    left = aps(plus_split) if left is None else left
    right = aps(minus_split) if right is None else right
    whole = idx(CylinderModel(L, K, N, A_N, direct_sum(left, right)))
    pieces = []
    for c in cuts:
        if not 0.0 < c < 1.0:
            raise ConfigurationError("cut positions must lie strictly inside (0, 1)")
        n_left = max(4, int(round(c * (N - 1))) + 1)
        n_right = max(4, N - n_left + 1)
        lm = CylinderModel(c * L, K, n_left, A_N, direct_sum(left, aps(minus_split)))
        rm = CylinderModel((1.0 - c) * L, K, n_right, A_N, direct_sum(aps(plus_split), right))
        pieces.append((float(c), idx(lm), idx(rm)))
    return MatchingReport(uncut=uncut, matching=match, aps=aps_rep, cut_pieces=tuple(pieces), whole=whole)


# Green pairing -------------------------------------------------------------------------


def _sections(model, u):
    t = np.linspace(0.0, model.L, model.N)
    arr = np.asarray(u(t) if callable(u) else u, dtype=complex)
    shape = (model.N, 2 * model.K + 1, model.r)
    if arr.shape != shape:
        raise ConfigurationError(f"section must have shape {shape} (time, mode, fiber), got {arr.shape}")
    return t, arr


def _inner(x, y, t):
    return scipy.integrate.trapezoid(np.einsum("tkr,tkr->t", y.conj(), x), t)


def greens_pairing_check(model, u, v):
    """Residual of ``<Du, v> - <u, D^dagger v> = -<u(0), s0^* v(0)> + <u(L), s0^* v(L)>``.

    ``D = sigma0 (d/dt + M_k)`` and ``D^dagger = -sigma0^* d/dt + M_k^* sigma0^*`` per
    mode.  Sections are arrays of shape ``(N, 2K+1, r)`` or callables of the
    time grid returning such arrays.  Derivatives use second-order differences
    (one-sided at the ends) and integrals the trapezoid rule.
    """
    t, U = _sections(model, u)
    _, V = _sections(model, v)
    s0 = model.sigma0
    Ms = np.stack([model.A.mode_matrix(k) for k in model.modes])
    dU = np.gradient(U, t, axis=0, edge_order=2)
    dV = np.gradient(V, t, axis=0, edge_order=2)
    DU = np.einsum("ij,tkj->tki", s0, dU + np.einsum("kij,tkj->tki", Ms, U))
    s0h = s0.conj().T
    DdV = -np.einsum("ij,tkj->tki", s0h, dV) + np.einsum("kij,jl,tkl->tki", Ms.conj().transpose(0, 2, 1), s0h, V)
    lhs = _inner(DU, V, t) - _inner(U, DdV, t)

    def boundary(i):
        return np.vdot(np.einsum("ij,kj->ki", s0h, V[i]), U[i])

    rhs = -boundary(0) + boundary(-1)
    return float(abs(lhs - rhs))


def observed_order(hs, residuals):
    """Least-squares slope of ``log residual`` against ``log h``."""
    hs = np.asarray(hs, dtype=float)
    res = np.asarray(residuals, dtype=float)
    if np.any(res <= 0):
        return np.inf
    return float(np.polyfit(np.log(hs), np.log(res), 1)[0])


def greens_convergence(model, u, v, refinements=3):
    """Green residuals on ``refinements + 1`` grids (``N -> 2N - 1``) and the observed order."""
    if not (callable(u) and callable(v)):
        raise ConfigurationError("convergence study needs sections given as callables of t")
    hs, res = [], []
    m = model
    for _ in range(refinements + 1):
        hs.append(m.h)
        res.append(greens_pairing_check(m, u, v))
        m = m.with_grid(N=2 * m.N - 1)
    return hs, res, observed_order(hs, res)


# Model-solution identities -------------------------------------------------------------


def _hermitian_abs(M, tol=1e-10):
    M = as_cmatrix(M, "A mode", square=True)
    if np.abs(M - M.conj().T).max() > tol * max(1.0, float(np.abs(M).max())):
        raise ConfigurationError("semigroup identities need a self-adjoint mode matrix")
    lam, Q = np.linalg.eigh(0.5 * (M + M.conj().T))
    return lam, Q


def extension_semigroup_check(A, bc, v=None, t_grid=None):
    """Discrete L^2 residual of ``(d/dt + A) E(v + g v) = -2 |A| exp(-t|A|) v``.

    ``E x (t) = exp(-t|A|) x`` per mode; ``d/dt`` uses second-order differences
    on ``t_grid``.  ``v`` maps modes to vectors in ``V-``; by default the sum
    of the columns of the stored ``V-`` basis is used.
    """
    t = np.linspace(0.0, 1.0, 65) if t_grid is None else np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 3 or np.any(np.diff(t) <= 0):
        raise ConfigurationError("t_grid must be increasing with at least 3 points")
    total = 0.0
    for k in bc.modes:
        blk = bc[k]
        M = A.mode_matrix(k)
        lam, Q = _hermitian_abs(M)
        vk = blk.Vminus.sum(axis=1) if v is None else np.asarray(v.get(k, np.zeros(blk.r)), dtype=complex)
        if blk.Vminus.shape[1] == 0 and np.any(vk):
            raise ConfigurationError(f"mode {k}: V- is trivial")
        if blk.Vminus.shape[1]:
            resid = vk - blk.Vminus @ (blk.Vminus.conj().T @ vk)
            if np.linalg.norm(resid) > 1e-10 * max(1.0, np.linalg.norm(vk)):
                raise ConfigurationError(f"mode {k}: v is not in V-")
        x = vk + blk.g_operator() @ vk
        decay = np.exp(-np.outer(t, np.abs(lam)))  # (time, eig)
        Ex = (decay * (Q.conj().T @ x)) @ Q.T
        Ev = (decay * (np.abs(lam) * (Q.conj().T @ vk))) @ Q.T
        dEx = np.gradient(Ex, t, axis=0, edge_order=2)
        lhs = dEx + Ex @ M.T
        diff = lhs + 2.0 * Ev
        total += scipy.integrate.trapezoid(np.sum(np.abs(diff) ** 2, axis=1), t)
    return float(np.sqrt(total))


def square_function_check(M, x, T=5.0, points=2001):
    """Compare ``int_0^T |  |A|^(1/2) exp(-t|A|) x |^2 dt`` with its closed form.

    Returns ``(quadrature, closed_form, relative_error)``; the closed form is
    ``sum_j |x_j|^2 (1 - exp(-2 lambda_j T)) / 2`` in the eigenbasis of
    ``|A|`` (zero eigenvalues contribute nothing).
    """
    lam, Q = _hermitian_abs(M)
    lam = np.abs(lam)
    c = Q.conj().T @ np.asarray(x, dtype=complex)
    t = np.linspace(0.0, T, points)
    integrand = np.sum(lam * np.abs(c) ** 2 * np.exp(-2.0 * np.outer(t, lam)), axis=1)
    quad = float(scipy.integrate.trapezoid(integrand, t))
    closed = float(np.sum(np.abs(c) ** 2 * 0.5 * (1.0 - np.exp(-2.0 * lam * T)) * (lam > 0)))
    rel = abs(quad - closed) / closed if closed > 0 else abs(quad)
    return quad, closed, float(rel)
