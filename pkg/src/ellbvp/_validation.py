"""Input validation helpers shared by all modules."""

from __future__ import annotations

import numpy as np


class ConfigurationError(ValueError):
    """Raised when inputs have inconsistent shapes or invalid parameters."""


class NotEllipticError(ValueError):
    """Raised when a symbol that must be invertible is singular."""


class NotInvertibleError(ValueError):
    """Raised when a boundary operator fails the invertibility proxy."""


def as_cmatrix(x, name="matrix", square=False):
    """Return ``x`` as a 2-d complex array, checking shape."""
    arr = np.asarray(x, dtype=complex)
    if arr.ndim != 2:
        raise ConfigurationError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise ConfigurationError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{name} contains non-finite entries")
    return arr


def as_rvector(x, n=None, name="vector"):
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ConfigurationError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ConfigurationError(f"{name} must have length {n}, got {arr.shape[0]}")
    return arr


def frozen(arr):
    """Mark an array read-only and return it."""
    arr = np.asarray(arr)
    arr.setflags(write=False)
    return arr


def orth(a, rtol=1e-10, atol=0.0):
    """Orthonormal basis for the column space of ``a``.

    Singular values above ``max(rtol * s_max, atol)`` count.
    """
    a = np.asarray(a, dtype=complex)
    if a.size == 0 or a.shape[1] == 0:
        return np.zeros((a.shape[0], 0), dtype=complex)
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((a.shape[0], 0), dtype=complex)
    rank = int(np.sum(s > max(rtol * s[0], atol)))
    return u[:, :rank]


def null_space(a, rtol=1e-10, atol=0.0):
    """Orthonormal basis for the kernel of ``a`` (same rank cut as :func:`orth`)."""
    a = np.asarray(a, dtype=complex)
    ncols = a.shape[1]
    if a.shape[0] == 0:
        return np.eye(ncols, dtype=complex)
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    if s.size == 0 or s[0] == 0.0:
        return np.eye(ncols, dtype=complex)
    rank = int(np.sum(s > max(rtol * s[0], atol)))
    return vh[rank:].conj().T


def complement_in(basis, ambient, rtol=1e-10):
    """Orthonormal basis of ``span(ambient)`` orthogonal to ``span(basis)``.

    ``ambient`` must have orthonormal columns.
    """
    ambient = np.asarray(ambient, dtype=complex)
    if ambient.shape[1] == 0:
        return ambient
    basis = np.asarray(basis, dtype=complex)
    if basis.shape[1] == 0:
        return ambient
    coords = null_space(basis.conj().T @ ambient, rtol=rtol)
    return ambient @ coords


def subspace_distance(a, b):
    """Spectral-norm distance between orthogonal projectors onto two column spans."""
    qa = orth(a)
    qb = orth(b)
    if qa.shape[1] != qb.shape[1]:
        return np.inf
    pa = qa @ qa.conj().T
    pb = qb @ qb.conj().T
    return float(np.linalg.norm(pa - pb, 2)) if pa.size else 0.0
