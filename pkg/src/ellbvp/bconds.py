"""Boundary conditions in graphical normal form on a circle boundary.

Every condition is stored per Fourier mode ``k``.  On the fiber ``C^r`` of a
mode, a :class:`GraphBlock` holds orthonormal bases of ``V-``, ``W-`` (inside
the range of ``chi-``) and ``V+``, ``W+`` (inside the range of ``chi+``),
together with the matrix of ``g: V- -> V+`` in those bases.  The condition is

    B_k = W+  (+)  { v + g v : v in V- }.

Correction spaces ``W+-`` are finite dimensional because they are supported
on finitely many modes, each vector living in a single mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.linalg

from ._validation import (
    ConfigurationError,
    NotInvertibleError,
    as_cmatrix,
    complement_in,
    frozen,
    null_space,
    orth,
)
from .adapted import (
    DEFAULT_REALPART_TOL,
    SpectralSplit,
    is_invertible_bisectorial_proxy,
    mode_split,
    spectral_projectors,
)

__all__ = [
    "GraphBlock",
    "GraphBC",
    "MatchingBC",
    "PseudoLocalBC",
    "LSReport",
    "aps",
    "graph_bc",
    "graph_normal_form",
    "direct_sum",
    "direct_sum_split",
    "adjoint_condition",
    "deform",
    "matching",
    "local_bc",
    "ls_check",
    "local_interchange_check",
]

_EMPTY = np.zeros((0, 0), dtype=complex)


def _scale(x):
    return float(np.linalg.norm(x, 2)) if x.size else 1.0


def _cols(x, r):
    if x is None:
        return np.zeros((r, 0), dtype=complex)
    x = np.asarray(x, dtype=complex)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] != r:
        raise ConfigurationError(f"vectors must have length {r}, got {x.shape[0]}")
    return x


@dataclass(frozen=True)
class GraphBlock:
    """Graphical data of one mode."""

    chi_plus: np.ndarray
    Vminus: np.ndarray
    Wminus: np.ndarray
    Vplus: np.ndarray
    Wplus: np.ndarray
    g: np.ndarray
    scale: float = 1.0

    @property
    def r(self):
        return self.chi_plus.shape[0]

    @property
    def dim(self):
        return self.Wplus.shape[1] + self.Vminus.shape[1]

    @property
    def g_matrix(self):
        return self.g * self.scale

    def frame(self):
        return np.hstack([self.Vminus, self.Wminus, self.Vplus, self.Wplus])

    def _frame_inverse(self):
        return np.linalg.inv(self.frame())

    def coordinates(self, x):
        """Coefficients of ``x`` in the frame ``[V-, W-, V+, W+]``."""
        return self._frame_inverse() @ np.asarray(x, dtype=complex)

    def g_operator(self):
        """``g`` as an ``r x r`` matrix; it vanishes on ``V+ (+) W+ (+) W-``."""
        dv = self.Vminus.shape[1]
        if dv == 0 or self.Vplus.shape[1] == 0:
            return np.zeros((self.r, self.r), dtype=complex)
        return self.Vplus @ self.g_matrix @ self._frame_inverse()[:dv]

    def basis(self):
        """Orthonormal basis of the subspace ``B_k``."""
        graph = self.Vminus + self.Vplus @ self.g_matrix if self.Vminus.shape[1] else self.Vminus
        return orth(np.hstack([self.Wplus, graph]))

    def projector(self):
        q = self.basis()
        return q @ q.conj().T

    def rows(self):
        """Orthonormal rows whose common kernel is ``B_k``."""
        q = self.basis()
        if q.shape[1] == 0:
            return np.eye(self.r, dtype=complex)
        return null_space(q.conj().T).conj().T

    def contains(self, x, tol=1e-10):
        x = np.asarray(x, dtype=complex)
        q = self.basis()
        resid = x - q @ (q.conj().T @ x)
        return float(np.linalg.norm(resid)) <= tol * max(1.0, float(np.linalg.norm(x)))

    def check(self, tol=1e-9):
        """Residuals of the normal-form conditions (all should be ~0)."""
        chi_p = self.chi_plus
        chi_m = np.eye(self.r) - chi_p
        plus = np.hstack([self.Vplus, self.Wplus])
        minus = np.hstack([self.Vminus, self.Wminus])
        res = {
            "plus_in_range": float(np.abs(chi_m @ plus).max()) if plus.size else 0.0,
            "minus_in_range": float(np.abs(chi_p @ minus).max()) if minus.size else 0.0,
            "dims": float(abs(plus.shape[1] - round(np.trace(chi_p).real))
                          + abs(minus.shape[1] - round(np.trace(chi_m).real))),
        }
        gop = self.g_operator()
        killed = np.hstack([self.Vplus, self.Wplus, self.Wminus])
        res["g_kills_complement"] = float(np.abs(gop @ killed).max()) if killed.size else 0.0
        if self.Vminus.shape[1] and self.Vplus.shape[1]:
            img = gop @ self.Vminus
            out = img - self.Vplus @ (np.linalg.pinv(self.Vplus) @ img)
            res["g_into_Vplus"] = float(np.abs(out).max())
        else:
            res["g_into_Vplus"] = 0.0
        return res

    def is_valid(self, tol=1e-9):
        return max(self.check(tol).values()) <= tol


@dataclass(frozen=True)
class GraphBC:
    """Graphical boundary condition: one :class:`GraphBlock` per mode."""

    blocks: dict
    label: str = "graph"

    @property
    def modes(self):
        return sorted(self.blocks)

    @property
    def K(self):
        return max(abs(k) for k in self.blocks)

    @property
    def fiber_rank(self):
        return next(iter(self.blocks.values())).r

    def block(self, k):
        return self.blocks[k]

    def __getitem__(self, k):
        return self.blocks[k]

    @property
    def dim_w_plus(self):
        return sum(b.Wplus.shape[1] for b in self.blocks.values())

    @property
    def dim_w_minus(self):
        return sum(b.Wminus.shape[1] for b in self.blocks.values())

    def g_bound(self):
        """Uniform bound of ``g`` over mode blocks.

        ``g`` preserves modes, so the (1+k^2)^(1/4) weights cancel and this is
        also the H^(1/2) operator norm of the truncation.
        """
        return max((float(np.linalg.norm(b.g_operator(), 2)) for b in self.blocks.values()), default=0.0)

    def validate(self, tol=1e-9):
        bad = {k: res for k, b in self.blocks.items() if max((res := b.check(tol)).values()) > tol}
        if bad:
            k = min(bad)
            raise ConfigurationError(f"mode {k} violates the graphical normal form: {bad[k]}")
        return self

    def deform(self, s):
        return deform(self, s)


@dataclass(frozen=True)
class MatchingBC(GraphBC):
    """Matching condition ``{(u, u)}`` on a doubled boundary ``N (+) -N``."""

    label: str = "matching"
    half_rank: int = 0

    def contains_pair(self, k, u, v, tol=1e-10):
        return self.blocks[k].contains(np.concatenate([u, v]), tol)


# Constructors --------------------------------------------------------------------------


def aps(splits):
    """Atiyah-Patodi-Singer condition: ``V- = ran chi-``, ``V+ = ran chi+``, ``W = 0``, ``g = 0``."""
    blocks = {}
    for k, sp in splits.items():
        r = sp.size
        blocks[k] = GraphBlock(
            chi_plus=sp.chi_plus,
            Vminus=sp.minus_basis,
            Wminus=np.zeros((r, 0), dtype=complex),
            Vplus=sp.plus_basis,
            Wplus=np.zeros((r, 0), dtype=complex),
            g=np.zeros((sp.dim_plus, sp.dim_minus), dtype=complex),
        )
    return GraphBC(blocks, label="aps")


def graph_bc(splits, w_plus=None, w_minus=None, g_ops=None, label="graph"):
    """Graphical condition from correction vectors and per-mode ``g`` operators.

    ``w_plus`` / ``w_minus`` map a mode to vectors (columns); they are
    projected by ``chi+`` / ``chi-`` respectively.  ``V+-`` are the orthogonal
    complements of ``W+-`` inside the spectral ranges.  ``g_ops`` maps a mode
    to an ``r x r`` matrix ``G``; the stored ``g`` is ``G`` restricted to
    ``V-`` and projected onto ``V+`` along the rest of the frame.
    """
    w_plus = w_plus or {}
    w_minus = w_minus or {}
    g_ops = g_ops or {}
    for name, data in (("w_plus", w_plus), ("w_minus", w_minus), ("g", g_ops)):
        extra = set(data) - set(splits)
        if extra:
            raise ConfigurationError(f"{name} refers to modes {sorted(extra)} outside the cutoff")
    blocks = {}
    for k, sp in splits.items():
        r = sp.size
        given_p, given_m = _cols(w_plus.get(k), r), _cols(w_minus.get(k), r)
        wp = orth(sp.chi_plus @ given_p, 1e-10, 1e-10 * _scale(given_p))
        wm = orth(sp.chi_minus @ given_m, 1e-10, 1e-10 * _scale(given_m))
        if wp.shape[1] != given_p.shape[1] or wm.shape[1] != given_m.shape[1]:
            raise ConfigurationError(f"mode {k}: correction vectors are dependent after spectral projection")
        vp = complement_in(wp, sp.plus_basis)
        vm = complement_in(wm, sp.minus_basis)
        block = GraphBlock(sp.chi_plus, vm, wm, vp, wp, np.zeros((vp.shape[1], vm.shape[1]), dtype=complex))
        if k in g_ops and vm.shape[1] and vp.shape[1]:
            G = as_cmatrix(g_ops[k], f"g[{k}]", square=True)
            if G.shape[0] != r:
                raise ConfigurationError(f"g[{k}] must be {r}x{r}")
            coords = block._frame_inverse()
            dv, dw = vm.shape[1], wm.shape[1]
            gk = coords[dv + dw: dv + dw + vp.shape[1]] @ G @ vm
            block = replace(block, g=gk)
        blocks[k] = block
    return GraphBC(blocks, label=label)


def graph_normal_form(bases, splits, label="graph", rtol=1e-10):
    """Put arbitrary per-mode subspaces into graphical normal form.

    ``W+ = B cap ran chi+``; ``V-`` is the projection of ``B`` onto
    ``ran chi-`` along ``ran chi+``; ``W-`` and ``V+`` are orthogonal
    complements inside the spectral ranges; ``g`` sends the ``chi-`` part of
    an element of ``B`` to the ``V+`` part of its ``chi+`` component.
    """
    if set(bases) != set(splits):
        raise ConfigurationError("subspaces and splits must cover the same modes")
    blocks = {}
    for k, sp in splits.items():
        r = sp.size
        B = orth(_cols(bases[k], r), rtol)
        Rp, Rm = sp.plus_basis, sp.minus_basis
        dp = Rp.shape[1]
        c = np.linalg.solve(np.hstack([Rp, Rm]), B) if r else np.zeros((0, B.shape[1]))
        cp, cm = c[:dp], c[dp:]
        # B is orthonormal, so rank decisions are made on the scale of c
        atol = rtol * max(1.0, float(np.linalg.norm(c, 2))) if c.size else rtol
        proj_minus = Rm @ cm
        vm = orth(proj_minus, rtol, atol)
        wp = orth(B @ null_space(cm, rtol, atol), rtol) if B.shape[1] else np.zeros((r, 0), dtype=complex)
        wm = complement_in(vm, Rm, rtol)
        vp = complement_in(wp, Rp, rtol)
        block = GraphBlock(sp.chi_plus, vm, wm, vp, wp, np.zeros((vp.shape[1], vm.shape[1]), dtype=complex))
        if vm.shape[1] and vp.shape[1]:
            y = np.linalg.lstsq(proj_minus, vm, rcond=None)[0]
            plus_part = Rp @ (cp @ y)
            coords = block._frame_inverse()
            dv, dw = vm.shape[1], wm.shape[1]
            block = replace(block, g=coords[dv + dw: dv + dw + vp.shape[1]] @ plus_part)
        blocks[k] = block
    return GraphBC(blocks, label=label)


def direct_sum_split(first, second):
    """Split of ``M1 (+) M2`` from the splits of ``M1`` and ``M2``."""
    chi_p = scipy.linalg.block_diag(first.chi_plus, second.chi_plus)
    return SpectralSplit(
        chi_plus=frozen(chi_p),
        chi_minus=frozen(np.eye(chi_p.shape[0]) - chi_p),
        plus_basis=frozen(scipy.linalg.block_diag(first.plus_basis, second.plus_basis)),
        minus_basis=frozen(scipy.linalg.block_diag(first.minus_basis, second.minus_basis)),
        spectrum=tuple(sorted(first.spectrum + second.spectrum, key=lambda s: (s[0].real, s[0].imag))),
        realpart_tol=first.realpart_tol,
        warnings=first.warnings + second.warnings,
    )


def _bd(a, b):
    return scipy.linalg.block_diag(a, b) if (a.size or b.size) else np.zeros(
        (a.shape[0] + b.shape[0], a.shape[1] + b.shape[1]), dtype=complex
    )


def direct_sum(first, second, label=None):
    """Condition on a disjoint union of two boundary pieces, mode by mode."""
    if set(first.blocks) != set(second.blocks):
        raise ConfigurationError("direct sum needs matching mode cutoffs")
    blocks = {}
    for k in first.blocks:
        a, b = first.blocks[k], second.blocks[k]
        blocks[k] = GraphBlock(
            chi_plus=_bd(a.chi_plus, b.chi_plus),
            Vminus=_bd(a.Vminus, b.Vminus),
            Wminus=_bd(a.Wminus, b.Wminus),
            Vplus=_bd(a.Vplus, b.Vplus),
            Wplus=_bd(a.Wplus, b.Wplus),
            g=_bd(a.g_matrix, b.g_matrix),
        )
    return GraphBC(blocks, label=label or f"{first.label}+{second.label}")


def deform(bc, s):
    """``B_s = W+ (+) {v + s g v}``; composes multiplicatively in ``s``."""
    if not 0.0 <= s <= 1.0:
        raise ConfigurationError("deformation parameter must lie in [0, 1]")
    blocks = {k: replace(b, scale=b.scale * s) for k, b in bc.blocks.items()}
    return replace(bc, blocks=blocks)


def _per_mode(value, modes):
    if isinstance(value, dict):
        if set(value) != set(modes):
            raise ConfigurationError("per-mode sigma0 must cover the same modes as the condition")
        return value
    return {k: value for k in modes}


def adjoint_condition(bc, sigma0, adjoint_splits):
    """Adjoint condition ``B^dagger`` for the formal adjoint problem.

    Uses ``sigma0^* B^dagger = W~- (+) {u - g^* u : u in V~+}`` with
    ``W~- = (V+ + V- + W+)^perp`` and ``V~+ = (V- + W+ + W-)^perp``, then
    returns the result in graphical normal form relative to
    ``adjoint_splits`` (the splits of the adjoint adapted operator).
    """
    if set(bc.blocks) != set(adjoint_splits):
        raise ConfigurationError("boundary condition and adjoint splits have different mode cutoffs")
    sig = _per_mode(sigma0, bc.blocks)
    bases = {}
    for k, blk in bc.blocks.items():
        s0 = as_cmatrix(sig[k], "sigma0", square=True)
        if s0.shape[0] != blk.r:
            raise ConfigurationError(f"sigma0 must be {blk.r}x{blk.r}")
        w_tilde_minus = null_space(np.hstack([blk.Vplus, blk.Vminus, blk.Wplus]).conj().T)
        v_tilde_plus = null_space(np.hstack([blk.Vminus, blk.Wplus, blk.Wminus]).conj().T)
        g_star = blk.g_operator().conj().T
        image = np.hstack([w_tilde_minus, v_tilde_plus - g_star @ v_tilde_plus])
        bases[k] = np.linalg.solve(s0.conj().T, image)
    return graph_normal_form(bases, adjoint_splits, label=f"adjoint({bc.label})")


def matching(A_N, K, realpart_tol=DEFAULT_REALPART_TOL):
    """Matching condition for the doubled boundary with adapted operator ``A_N (+) -A_N``.

    ``V- = ran chi-(A_N) (+) ran chi+(A_N)``, ``V+ = ran chi+(A_N) (+) ran chi-(A_N)``,
    ``W+- = 0`` and ``g(u, v) = (v, u)`` on ``V-``.
    """
    if not is_invertible_bisectorial_proxy(A_N, K, realpart_tol):
        raise NotInvertibleError(
            "A_N has eigenvalues on the imaginary axis; apply shift_to_invertible first"
        )
    blocks = {}
    for k, sp in mode_split(A_N, K, realpart_tol).items():
        r = sp.size
        qm, qp = sp.minus_basis, sp.plus_basis
        dm, dp = qm.shape[1], qp.shape[1]
        swap = np.zeros((r, r), dtype=complex)
        swap[:dp, dm:] = np.eye(dp)
        swap[dp:, :dm] = np.eye(dm)
        blocks[k] = GraphBlock(
            chi_plus=frozen(_bd(sp.chi_plus, sp.chi_minus)),
            Vminus=_bd(qm, qp),
            Wminus=np.zeros((2 * r, 0), dtype=complex),
            Vplus=_bd(qp, qm),
            Wplus=np.zeros((2 * r, 0), dtype=complex),
            g=swap,
        )
    return MatchingBC(blocks, half_rank=A_N.rank)


# Pseudo-local and local conditions ---------------------------------------------------


@dataclass(frozen=True)
class PseudoLocalBC:
    """Condition ``B = P H^(1/2)`` given by a projector symbol ``xi -> sigma_P(xi)``.

    On the circle mode ``k != 0`` uses ``sigma_P(sign k)``; the zero mode uses
    ``zero_mode`` when given, else ``sigma_P(+1)``.
    """

    projector_symbol: Callable
    zero_mode: np.ndarray | None = None
    label: str = "pseudolocal"

    def symbol_at(self, xi):
        return as_cmatrix(self.projector_symbol(np.atleast_1d(np.asarray(xi, dtype=float))), "sigma_P", square=True)

    def mode_blocks(self, K):
        out = {}
        for k in range(-K, K + 1):
            if k == 0:
                out[k] = self.symbol_at(1.0) if self.zero_mode is None else as_cmatrix(self.zero_mode, square=True)
            else:
                out[k] = self.symbol_at(float(np.sign(k)))
        return out

    def projector_defect(self, xi_samples):
        return max(float(np.abs((p := self.symbol_at(xi)) @ p - p).max()) for xi in xi_samples)

    def to_graph(self, splits):
        K = max(abs(k) for k in splits)
        blocks = self.mode_blocks(K)
        return graph_normal_form({k: orth(blocks[k]) for k in splits}, splits, label=self.label)


def local_bc(projector, label="local"):
    """Local condition: sections of the subbundle ``ran projector``."""
    P = as_cmatrix(projector, "projector", square=True)
    return PseudoLocalBC(lambda xi: P, zero_mode=P, label=label)


@dataclass(frozen=True)
class LSReport:
    passed: bool
    samples: int
    failures: list = field(default_factory=list)
    min_margin: float = np.inf


def _negative_space(M, tol):
    # Re(mu) < 0 for mu in the spectrum of M  <=>  Re(-mu) > 0
    return spectral_projectors(-M, tol).plus_basis


def _iso_margin(P, N, rtol):
    rank_p = int(np.linalg.matrix_rank(P, tol=rtol * max(1.0, float(np.linalg.norm(P, 2)))))
    dim_n = N.shape[1]
    if dim_n == 0:
        return rank_p, dim_n, (np.inf if rank_p == 0 else 0.0)
    sv = np.linalg.svd(P @ N, compute_uv=False)
    return rank_p, dim_n, float(sv[-1]) if rank_p == dim_n else 0.0


def ls_check(P, A_symbol, xi_samples, A_star_symbol=None, P_star=None, realpart_tol=DEFAULT_REALPART_TOL,
             rtol=1e-9):
    """Lopatinsky-Schapiro condition at sampled covectors.

    For each ``xi`` the negative-real-part generalized eigenspace ``N(xi)`` of
    ``i sigma_A(xi)`` must be mapped isomorphically onto ``ran sigma_P(xi)``;
    likewise for ``sigma_P(xi)^*`` and ``i sigma_{A*}(xi)``.  ``A_star_symbol``
    defaults to ``xi -> -sigma_A(xi)^*`` (symbol of the formal adjoint).
    Failures are reported as witnesses, not raised.
    """
    p_sym = P.symbol_at if isinstance(P, PseudoLocalBC) else P
    if A_star_symbol is None:
        A_star_symbol = lambda xi: -np.asarray(A_symbol(xi)).conj().T  # noqa: E731
    if P_star is None:
        P_star = lambda xi: np.asarray(p_sym(xi)).conj().T  # noqa: E731
    failures = []
    margin = np.inf
    count = 0
    for xi in xi_samples:
        count += 1
        for side, proj, sym in (("P", p_sym, A_symbol), ("P*", P_star, A_star_symbol)):
            Pm = np.asarray(proj(xi), dtype=complex)
            Am = np.asarray(sym(xi), dtype=complex)
            if Pm.shape != Am.shape:
                raise ConfigurationError("projector and adapted symbol must act on the same fiber")
            N = _negative_space(1j * Am, realpart_tol)
            rank_p, dim_n, m = _iso_margin(Pm, N, rtol)
            ok = rank_p == dim_n and m > rtol
            margin = min(margin, m)
            if not ok:
                failures.append({
                    "xi": np.atleast_1d(np.asarray(xi, dtype=float)).tolist(),
                    "side": side,
                    "dim_negative_space": dim_n,
                    "rank_projector": rank_p,
                    "min_singular_value": m,
                })
    return LSReport(passed=not failures, samples=count, failures=failures, min_margin=margin)


def local_interchange_check(Eprime_projector, A_symbol, xi_samples, tol=1e-10):
    """True iff ``sigma_A(xi)`` maps ``E'`` into ``E''`` and ``E''`` into ``E'`` at every sample."""
    Q = as_cmatrix(Eprime_projector, "projector", square=True)
    if np.abs(Q @ Q - Q).max() > 1e-10 or np.abs(Q - Q.conj().T).max() > 1e-10:
        raise ConfigurationError("E' projector must be an orthogonal projector")
    Qc = np.eye(Q.shape[0]) - Q
    for xi in xi_samples:
        S = np.asarray(A_symbol(xi), dtype=complex)
        scale = max(1.0, float(np.linalg.norm(S, 2)))
        dev = max(float(np.abs(Q @ S @ Q).max()), float(np.abs(Qc @ S @ Qc).max()))
        if dev > tol * scale:
            return False
    return True
