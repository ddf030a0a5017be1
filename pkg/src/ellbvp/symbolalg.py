"""Linear principal symbols and their pointwise checks.

A first-order operator ``D`` has principal symbol ``sigma(xi) = sum_i xi_i * sigma_i``.
This module evaluates such symbols, decides ellipticity by sampling the unit
cosphere of a metric, certifies the Clifford relations of Dirac-type symbols,
and measures the smallest constant ``C`` with ``|sigma(xi)| <= C |xi|_g``.

The metric matrix ``g`` is the inner product on covectors, so
``|xi|_g**2 = xi @ g @ xi`` and the Clifford relations read
``sigma_i^* sigma_j + sigma_j^* sigma_i = 2 g[i, j] id``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from itertools import combinations

import numpy as np
from scipy.stats import norm, qmc

from ._validation import ConfigurationError, as_cmatrix, as_rvector, frozen

__all__ = [
    "Metric",
    "LinearSymbol",
    "SymbolReport",
    "evaluate",
    "cosphere_samples",
    "check_ellipticity",
    "check_dirac_type",
    "clifford_failures",
    "operator_norm_bound",
    "clifford_generators",
    "pauli_symbol",
    "dirac_symbol",
    "forms_symbol",
    "forms_tangential_projector",
    "DEFAULT_SPHERE_SAMPLES",
]

DEFAULT_SPHERE_SAMPLES = 2048


@dataclass(frozen=True)
class Metric:
    """Positive-definite inner product on covectors."""

    g: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ConfigurationError(f"metric must be a square matrix, got shape {g.shape}")
        if g.shape[0] < 2:
            raise ConfigurationError("metric dimension must be at least 2")
        if not np.allclose(g, g.T, rtol=0.0, atol=1e-12):
            raise ConfigurationError("metric must be symmetric")
        if np.linalg.eigvalsh(g).min() <= 0.0:
            raise ConfigurationError("metric must be positive definite")
        object.__setattr__(self, "g", frozen(g.copy()))

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))

    @property
    def n(self):
        return self.g.shape[0]

    def norm(self, xi):
        xi = np.asarray(xi, dtype=float)
        return float(np.sqrt(xi @ self.g @ xi))

    def inner(self, xi, eta):
        return float(np.asarray(xi, dtype=float) @ self.g @ np.asarray(eta, dtype=float))

    def orthonormal_coframe(self):
        """Columns are covectors ``f_j`` with ``g(f_i, f_j) = delta_ij``."""
        c = np.linalg.cholesky(self.g)
        return np.linalg.inv(c).T


@dataclass(frozen=True)
class LinearSymbol:
    """Matrix-valued symbol linear in the covector: ``sigma(xi) = sum xi_i coeffs[i]``.

    Each coefficient has shape ``(rank_f, rank_e)``.
    """

    coeffs: tuple

    def __post_init__(self):
        mats = tuple(as_cmatrix(c, name=f"coefficient {i}") for i, c in enumerate(self.coeffs))
        if len(mats) < 2:
            raise ConfigurationError("a symbol needs at least 2 coefficient matrices (n >= 2)")
        shape = mats[0].shape
        for i, m in enumerate(mats):
            if m.shape != shape:
                raise ConfigurationError(
                    f"coefficient {i} has shape {m.shape}, expected {shape}"
                )
        object.__setattr__(self, "coeffs", tuple(frozen(m.copy()) for m in mats))

    @property
    def n(self):
        return len(self.coeffs)

    @property
    def rank_e(self):
        return self.coeffs[0].shape[1]

    @property
    def rank_f(self):
        return self.coeffs[0].shape[0]

    @property
    def is_square(self):
        return self.rank_e == self.rank_f

    def stacked(self):
        return np.stack(self.coeffs)

    def __call__(self, xi):
        return evaluate(self, xi)

    def scaled(self, c):
        return LinearSymbol(tuple(c * m for m in self.coeffs))

    def in_coframe(self, frame):
        """Re-express in the covector basis given by the columns of ``frame``."""
        frame = np.asarray(frame, dtype=float)
        stack = self.stacked()
        return LinearSymbol(tuple(np.tensordot(frame[:, j], stack, axes=1) for j in range(frame.shape[1])))


@dataclass(frozen=True)
class SymbolReport:
    elliptic: bool
    dirac_type: bool
    norm_bound_C: float
    witness_xi: np.ndarray
    min_sv: float
    tolerance: float
    samples: int
    note: str = ""
    extra: dict = field(default_factory=dict)


def evaluate(symbol, xi):
    """Return ``sum_i xi[i] * symbol.coeffs[i]``."""
    xi = as_rvector(xi, symbol.n, name="xi")
    return np.tensordot(xi, symbol.stacked(), axes=1)


def _euclidean_sphere(n, count):
    if n == 2:
        theta = 2.0 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(theta), np.sin(theta)])
    if n == 3:
        # Fibonacci lattice
        i = np.arange(count) + 0.5
        z = 1.0 - 2.0 * i / count
        rho = np.sqrt(1.0 - z * z)
        phi = np.pi * (1.0 + np.sqrt(5.0)) * i
        return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    pts = qmc.Halton(d=n, scramble=False).random(count + 1)[1:]
    gauss = norm.ppf(pts)
    return gauss / np.linalg.norm(gauss, axis=1, keepdims=True)


def cosphere_samples(metric, count):
    """Deterministic low-discrepancy covectors with ``|xi|_g = 1``.

    Equispaced angles starting at 0 for n=2 (so counts divisible by 8 contain
    the axes and diagonals), a Fibonacci lattice for n=3 and an unscrambled
    Halton sequence pushed through the Gaussian quantile map for n >= 4.
    """
    if count <= 0:
        raise ConfigurationError("sphere_samples must be positive")
    u = _euclidean_sphere(metric.n, int(count))
    return u @ metric.orthonormal_coframe().T


def _metric_for(symbol, metric):
    if metric is None:
        return Metric.identity(symbol.n)
    if metric.n != symbol.n:
        raise ConfigurationError(f"metric dimension {metric.n} != symbol dimension {symbol.n}")
    return metric


def _coefficient_scale(symbol):
    return max(float(np.linalg.norm(m, 2)) for m in symbol.coeffs)


def clifford_failures(symbol, metric=None, tol=1e-10):
    """List ``(i, j, deviation)`` for every pair violating the Clifford relation."""
    metric = _metric_for(symbol, metric)
    if not symbol.is_square:
        return [(-1, -1, np.inf)]
    ident = np.eye(symbol.rank_e)
    bad = []
    for i in range(symbol.n):
        si = symbol.coeffs[i]
        for j in range(i, symbol.n):
            sj = symbol.coeffs[j]
            anti = si.conj().T @ sj + sj.conj().T @ si
            dev = float(np.abs(anti - 2.0 * metric.g[i, j] * ident).max())
            if dev > tol:
                bad.append((i, j, dev))
    return bad


def check_dirac_type(symbol, metric=None, tol=1e-10):
    """True iff the coefficients satisfy the Clifford relations within ``tol``."""
    return not clifford_failures(symbol, metric, tol)


def _singular_values(symbol, xis):
    mats = np.tensordot(xis, symbol.stacked(), axes=1)
    return np.linalg.svd(mats, compute_uv=False)


def operator_norm_bound(symbol, metric=None, sphere_samples=DEFAULT_SPHERE_SAMPLES):
    """Largest operator norm of ``sigma(xi)`` over sampled unit covectors."""
    metric = _metric_for(symbol, metric)
    xis = cosphere_samples(metric, sphere_samples)
    return float(_singular_values(symbol, xis)[:, 0].max())


def check_ellipticity(symbol, metric=None, sphere_samples=DEFAULT_SPHERE_SAMPLES, tol=1e-9):
    """Sample the unit cosphere and report the smallest singular value.

    ``tol`` is relative to the largest coefficient norm.  Non-square symbols
    are reported non-elliptic with an explanatory note.
    """
    metric = _metric_for(symbol, metric)
    if sphere_samples <= 0:
        raise ConfigurationError("sphere_samples must be positive")
    xis = cosphere_samples(metric, sphere_samples)
    sv = _singular_values(symbol, xis)
    cbound = float(sv[:, 0].max())
    abs_tol = tol * _coefficient_scale(symbol)
    if not symbol.is_square:
        # smallest singular value of a wide/tall matrix still measures injectivity,
        # but invertibility is impossible
        smallest = sv[:, -1]
        idx = int(np.argmin(smallest))
        return SymbolReport(
            elliptic=False,
            dirac_type=False,
            norm_bound_C=cbound,
            witness_xi=frozen(xis[idx].copy()),
            min_sv=0.0,
            tolerance=abs_tol,
            samples=int(sphere_samples),
            note=f"non-square symbol ({symbol.rank_f}x{symbol.rank_e}) cannot be invertible",
        )
    smallest = sv[:, -1]
    idx = int(np.argmin(smallest))
    min_sv = float(smallest[idx])
    return SymbolReport(
        elliptic=bool(min_sv > abs_tol),
        dirac_type=check_dirac_type(symbol, metric),
        norm_bound_C=cbound,
        witness_xi=frozen(xis[idx].copy()),
        min_sv=min_sv,
        tolerance=abs_tol,
        samples=int(sphere_samples),
    )


# Standard model symbols --------------------------------------------------------------

_PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def clifford_generators(n):
    """``n`` Hermitian, unitary, pairwise anticommuting matrices of size ``2**(n//2)``.

    Built with the Jordan-Wigner recursion: generator ``2j`` is
    ``Z x ... x Z x X x 1 x ... x 1`` and ``2j+1`` the same with ``Y``;
    for odd ``n`` the last generator is ``Z x ... x Z``.  For n=3 these are
    the Pauli matrices.
    """
    if n < 1:
        raise ConfigurationError("n must be positive")
    x, y, z = _PAULI
    one = np.eye(2, dtype=complex)
    k = n // 2
    if k == 0:
        return [np.ones((1, 1), dtype=complex)]

    def kron_all(mats):
        return reduce(np.kron, mats)

    gens = []
    for j in range(k):
        for p in (x, y):
            gens.append(kron_all([z] * j + [p] + [one] * (k - j - 1)))
    if n % 2 == 1:
        gens.append(kron_all([z] * k))
    return gens


def dirac_symbol(n):
    """Dirac-type symbol on ``R^n`` with the standard Clifford seed."""
    return LinearSymbol(tuple(clifford_generators(n)))


def pauli_symbol(n=2):
    """``sigma_i`` = i-th Pauli matrix, for n = 2 or 3."""
    if n not in (2, 3):
        raise ConfigurationError("the Pauli symbol exists for n = 2 or 3")
    return LinearSymbol(_PAULI[:n])


def _form_basis(n):
    return [s for deg in range(n + 1) for s in combinations(range(n), deg)]


def _exterior_matrices(n):
    basis = _form_basis(n)
    index = {s: i for i, s in enumerate(basis)}
    dim = len(basis)
    ext = []
    for i in range(n):
        m = np.zeros((dim, dim))
        for s in basis:
            if i in s:
                continue
            sign = (-1) ** sum(1 for j in s if j < i)
            m[index[tuple(sorted(s + (i,)))], index[s]] = sign
        ext.append(m)
    return basis, ext


def forms_symbol(n):
    """Symbol of ``d + d^dagger`` on complex forms: ``xi ^ w + xi _| w``."""
    _, ext = _exterior_matrices(n)
    return LinearSymbol(tuple((e + e.T).astype(complex) for e in ext))


def forms_tangential_projector(n, normal_index=0):
    """Orthogonal projector onto forms with no ``e^normal`` factor (the tangential part)."""
    basis, _ = _exterior_matrices(n)
    diag = [0.0 if normal_index in s else 1.0 for s in basis]
    return np.diag(diag).astype(complex)
