"""Adapted boundary symbols, circle boundary operators and spectral projectors."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from ._validation import (
    ConfigurationError,
    NotEllipticError,
    as_cmatrix,
    as_rvector,
    frozen,
)
from .symbolalg import evaluate

__all__ = [
    "ConormalData",
    "BoundaryOperator1D",
    "SpectralSplit",
    "conormal_data",
    "adapted_symbol",
    "spectral_projectors",
    "mode_split",
    "is_invertible_bisectorial_proxy",
    "shift_to_invertible",
    "ordered_map",
]

DEFAULT_REALPART_TOL = 1e-10


def ordered_map(func, items, workers=1):
    """``list(map(func, items))``, optionally on a thread pool; order is preserved."""
    items = list(items)
    if workers is None or workers <= 1 or len(items) < 2:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


@dataclass(frozen=True)
class ConormalData:
    """Conormal ``tau`` with inward vector ``T`` (``tau(T) = 1``) and ``sigma_D(tau)``."""

    tau: np.ndarray
    T: np.ndarray
    sigma0: np.ndarray
    sigma0_inv: np.ndarray


def conormal_data(symbol, tau, T=None, cond_limit=1e12):
    """Build :class:`ConormalData`; ``T`` defaults to ``tau / |tau|^2``.

    Raises :class:`NotEllipticError` if ``sigma_D(tau)`` is singular.
    """
    tau = as_rvector(tau, symbol.n, name="tau")
    if not np.any(tau):
        raise ConfigurationError("conormal must be nonzero")
    T = tau / (tau @ tau) if T is None else as_rvector(T, symbol.n, name="T")
    if abs(tau @ T - 1.0) > 1e-12:
        raise ConfigurationError("tau(T) must equal 1")
    if not symbol.is_square:
        raise NotEllipticError("non-square symbol has no invertible conormal symbol")
    s0 = evaluate(symbol, tau)
    if np.linalg.cond(s0) > cond_limit:
        raise NotEllipticError("sigma_D(tau) is singular: the conormal direction is not elliptic")
    inv = np.linalg.inv(s0)
    return ConormalData(tau=frozen(tau), T=frozen(T), sigma0=frozen(s0), sigma0_inv=frozen(inv))


def adapted_symbol(symbol, conormal, xi, tol=1e-12):
    """``sigma_A(xi) = sigma_D(tau)^{-1} sigma_D(xi)`` for a tangential covector ``xi``."""
    xi = as_rvector(xi, symbol.n, name="xi")
    if abs(xi @ conormal.T) > tol * max(1.0, float(np.linalg.norm(xi))):
        raise ConfigurationError("xi must be tangential: xi(T) = 0")
    return conormal.sigma0_inv @ evaluate(symbol, xi)


@dataclass(frozen=True)
class BoundaryOperator1D:
    """Constant-coefficient operator on the circle acting on mode ``k`` by ``i k a + b + shift``."""

    a: np.ndarray
    b: np.ndarray
    shift: float = 0.0

    def __post_init__(self):
        a = as_cmatrix(self.a, "a", square=True)
        b = as_cmatrix(self.b, "b", square=True)
        if a.shape != b.shape:
            raise ConfigurationError(f"a has shape {a.shape} but b has shape {b.shape}")
        object.__setattr__(self, "a", frozen(a.copy()))
        object.__setattr__(self, "b", frozen(b.copy()))
        object.__setattr__(self, "shift", float(self.shift))

    @classmethod
    def from_symbol(cls, symbol, conormal, tangent, b=None, shift=0.0):
        """Take ``a = sigma_A(tangent)``; ``b`` defaults to zero."""
        a = adapted_symbol(symbol, conormal, tangent)
        if b is None:
            b = np.zeros_like(a)
        return cls(a, b, shift)

    @classmethod
    def scalar(cls, a, b, shift=0.0):
        return cls(np.array([[a]], dtype=complex), np.array([[b]], dtype=complex), shift)

    @property
    def rank(self):
        return self.a.shape[0]

    def mode_matrix(self, k):
        return 1j * k * self.a + self.b + self.shift * np.eye(self.rank)

    def mode_matrices(self, K):
        return {k: self.mode_matrix(k) for k in range(-K, K + 1)}

    def shifted(self, r):
        return BoundaryOperator1D(self.a, self.b, self.shift + r)

    def negated(self):
        """The orientation-reversed operator ``-A``."""
        return BoundaryOperator1D(-self.a, -self.b, -self.shift)

    def adjoint_adapted(self, sigma0=None):
        """Adapted operator of the formal adjoint problem.

        For ``D = sigma0 (d/dt + A)`` this is ``-sigma0^{*-1} A^* sigma0^*``, so
        mode ``k`` equals ``-sigma0^{*-1} M_k^* sigma0^*``.
        """
        if sigma0 is None:
            sigma0 = np.eye(self.rank)
        s = as_cmatrix(sigma0, "sigma0", square=True)
        sh = s.conj().T
        shi = np.linalg.inv(sh)
        return BoundaryOperator1D(shi @ self.a.conj().T @ sh, -shi @ self.b.conj().T @ sh, -self.shift)


@dataclass(frozen=True)
class SpectralSplit:
    """Spectral projectors for ``Re > tol`` (plus) and ``Re <= tol`` (minus).

    ``plus_basis`` / ``minus_basis`` are orthonormal bases of the two ranges.
    ``spectrum`` lists ``(eigenvalue, algebraic multiplicity, side)``.
    """

    chi_plus: np.ndarray
    chi_minus: np.ndarray
    plus_basis: np.ndarray
    minus_basis: np.ndarray
    spectrum: tuple
    realpart_tol: float
    warnings: tuple = ()

    @property
    def dim_plus(self):
        return self.plus_basis.shape[1]

    @property
    def dim_minus(self):
        return self.minus_basis.shape[1]

    @property
    def size(self):
        return self.chi_plus.shape[0]


def _clusters(values, tol):
    """Group indices of ``values`` into connected components at distance <= tol."""
    n = len(values)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) <= tol:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def spectral_projectors(M, realpart_tol=DEFAULT_REALPART_TOL, cluster_tol=None):
    """Projectors onto generalized eigenspaces split by the sign of the real part.

    Eigenvalues with ``Re <= realpart_tol`` go to the minus side.  The matrix is
    brought to ordered complex Schur form and the off-diagonal block is
    decoupled by a Sylvester solve, which handles defective spectra.
    Eigenvalues close to the dividing line are first clustered (perturbed
    Jordan blocks) and each cluster is placed by its centroid.
    """
    M = as_cmatrix(M, "M", square=True)
    if realpart_tol < 0:
        raise ConfigurationError("realpart_tol must be nonnegative")
    n = M.shape[0]
    scale = max(1.0, float(np.linalg.norm(M, 2))) if n else 1.0
    ctol = 1e-5 * scale if cluster_tol is None else cluster_tol
    if n == 0:
        empty = np.zeros((0, 0), dtype=complex)
        return SpectralSplit(empty, empty, empty, empty, (), realpart_tol)

    T, Z = scipy.linalg.schur(M, output="complex")
    eig = np.diag(T).copy()

    # side decision: eigenvalues near the dividing line are judged per cluster
    side = eig.real > realpart_tol
    near = np.flatnonzero(np.abs(eig.real - realpart_tol) <= ctol)
    warnings = []
    if near.size:
        for group in _clusters(eig[near], ctol):
            idx = near[group]
            centroid = eig[idx].mean()
            side[idx] = centroid.real > realpart_tol
            if len(idx) > 1 and len(set(eig[idx].real > realpart_tol)) > 1:
                warnings.append(
                    f"cluster of {len(idx)} eigenvalues near {centroid:.3e} straddles Re = {realpart_tol:g}; "
                    f"placed on the {'plus' if side[idx[0]] else 'minus'} side"
                )
    for lam in eig[~side]:
        if realpart_tol > 0 and 0.0 < lam.real <= realpart_tol:
            warnings.append(
                f"eigenvalue {lam:.3e} has 0 < Re <= realpart_tol and was assigned to the minus side"
            )

    p = int(side.sum())
    if 0 < p < n:
        Ts, Zs, _, m, _, _, info = lapack.ztrsen(side.astype(np.int32), T, Z, job="N")
        if info != 0:
            raise np.linalg.LinAlgError(f"Schur reordering failed (info={info})")
        if m != p:
            raise np.linalg.LinAlgError("Schur reordering returned an inconsistent block size")
        T11, T12, T22 = Ts[:p, :p], Ts[:p, p:], Ts[p:, p:]
        X = scipy.linalg.solve_sylvester(T11, -T22, T12)
        top = np.hstack([np.eye(p), X])
        chi_plus = Zs[:, :p] @ top @ Zs.conj().T
        plus_basis = Zs[:, :p].copy()
        minus_basis, _ = np.linalg.qr(Zs @ np.vstack([-X, np.eye(n - p)]))
    elif p == n:
        chi_plus = np.eye(n, dtype=complex)
        plus_basis = np.eye(n, dtype=complex)
        minus_basis = np.zeros((n, 0), dtype=complex)
    else:
        chi_plus = np.zeros((n, n), dtype=complex)
        plus_basis = np.zeros((n, 0), dtype=complex)
        minus_basis = np.eye(n, dtype=complex)
    chi_minus = np.eye(n) - chi_plus

    spectrum = []
    for group in _clusters(eig, ctol):
        lam = complex(eig[group].mean())
        spectrum.append((lam, len(group), "+" if side[group[0]] else "-"))
    spectrum.sort(key=lambda item: (item[0].real, item[0].imag))
    return SpectralSplit(
        chi_plus=frozen(chi_plus),
        chi_minus=frozen(chi_minus),
        plus_basis=frozen(plus_basis),
        minus_basis=frozen(minus_basis),
        spectrum=tuple(spectrum),
        realpart_tol=float(realpart_tol),
        warnings=tuple(warnings),
    )


def mode_split(A, K, realpart_tol=DEFAULT_REALPART_TOL, workers=1):
    """Per-mode :class:`SpectralSplit` for ``k = -K..K``."""
    if K < 0:
        raise ConfigurationError("mode cutoff K must be nonnegative")
    ks = list(range(-K, K + 1))
    splits = ordered_map(lambda k: spectral_projectors(A.mode_matrix(k), realpart_tol), ks, workers)
    return dict(zip(ks, splits))


def _mode_eigenvalues(A, K):
    return {k: np.linalg.eigvals(A.mode_matrix(k)) for k in range(-K, K + 1)}


def is_invertible_bisectorial_proxy(A, K, tol=DEFAULT_REALPART_TOL):
    """True iff no mode eigenvalue for ``|k| <= K`` lies on the imaginary axis.

    This is a finite-truncation stand-in for "invertible and bisectorial".
    """
    for lam in _mode_eigenvalues(A, K).values():
        if np.any(np.abs(lam.real) <= tol):
            return False
    return True


def shift_to_invertible(A, K, tol=DEFAULT_REALPART_TOL):
    """Return ``A + r id`` passing the invertibility proxy (``r = 0`` when it already does)."""
    if is_invertible_bisectorial_proxy(A, K, tol):
        return A
    re = np.concatenate([lam.real for lam in _mode_eigenvalues(A, K).values()])
    blockers = np.sort(-re[-re > tol])
    r = 0.5 * blockers[0] if blockers.size else 0.5
    shifted = A.shifted(r)
    if not is_invertible_bisectorial_proxy(shifted, K, tol):
        raise ConfigurationError("could not find a shift making the boundary operator invertible")
    return shifted
