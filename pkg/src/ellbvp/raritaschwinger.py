"""Rarita-Schwinger construction from a Dirac-type symbol.

Coordinates on ``T*M (x) E`` use the basis ``e^i (x) b_a`` with flat index
``i * m + a``, where ``m`` is the rank of ``E``.  With a Dirac-type seed
``sigma_D`` the maps are

* ``gamma(xi (x) v) = sigma_D(xi) v``                         (``m x nm``)
* ``iota(f) = (1/n) sum_i e^i (x) sigma_D(e^i)^* f``           (``nm x m``)
* ``gamma_tilde(xi (x) f) = sigma_D(xi)^* f``, ``iota_tilde(v) = (1/n) sum_i e^i (x) sigma_D(e^i) v``

and ``E^{3/2} = ker gamma``, ``F^{3/2} = ker gamma_tilde``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._validation import ConfigurationError, as_rvector, frozen, null_space, orth
from .symbolalg import LinearSymbol, Metric, clifford_failures

__all__ = [
    "RSBundleData",
    "RSSymbolEvaluation",
    "build_rs",
    "rs_symbol",
    "rs_linear_symbol",
    "decompose_along_xi",
    "contraction",
    "expected_gram_spectrum",
]

IDENTITY_TOL = 1e-12


@dataclass(frozen=True)
class RSBundleData:
    n: int
    m: int
    gamma: np.ndarray
    iota: np.ndarray
    gamma_tilde: np.ndarray
    iota_tilde: np.ndarray
    P32: np.ndarray
    basis32: np.ndarray
    P32_F: np.ndarray
    basis32_F: np.ndarray
    seed: LinearSymbol

    def as_dict(self):
        return {
            "n": self.n,
            "m": self.m,
            "gamma": self.gamma,
            "iota": self.iota,
            "gamma_tilde": self.gamma_tilde,
            "iota_tilde": self.iota_tilde,
            "P32": self.P32,
            "basis32": self.basis32,
            "P32_F": self.P32_F,
            "basis32_F": self.basis32_F,
        }

    def identity_deviations(self):
        """Max-abs deviations of the defining identities."""
        m, n = self.m, self.n
        eye_m = np.eye(m)
        eye_nm = np.eye(n * m)
        p = self.P32
        return {
            "gamma_iota": float(np.abs(self.gamma @ self.iota - eye_m).max()),
            "iota_adjoint": float(np.abs(self.iota.conj().T - self.gamma / n).max()),
            "gamma_tilde_iota_tilde": float(np.abs(self.gamma_tilde @ self.iota_tilde - eye_m).max()),
            "iota_tilde_adjoint": float(np.abs(self.iota_tilde.conj().T - self.gamma_tilde / n).max()),
            "P32_complement": float(np.abs(p - (eye_nm - self.iota @ self.gamma)).max()),
            "P32_idempotent": float(np.abs(p @ p - p).max()),
            "P32_selfadjoint": float(np.abs(p - p.conj().T).max()),
            "P32_gamma": float(np.abs(self.gamma @ p).max()),
        }


@dataclass(frozen=True)
class RSSymbolEvaluation:
    xi: np.ndarray
    matrix: np.ndarray
    gram_eigs: np.ndarray


def _pivoted_basis(projector, rank):
    # rank-revealing QR with column pivoting, deterministic ordering
    q, _, _ = scipy.linalg.qr(projector, pivoting=True)
    return q[:, :rank]


def build_rs(dirac, metric=None):
    """Assemble the Rarita-Schwinger bundle maps for a Dirac-type seed."""
    n = dirac.n
    if n < 3:
        raise ConfigurationError(f"Rarita-Schwinger construction needs dimension n >= 3, got {n}")
    if metric is None:
        metric = Metric.identity(n)
    failures = clifford_failures(dirac, metric)
    if failures:
        i, j, dev = failures[0]
        raise ConfigurationError(
            f"seed is not Dirac-type: Clifford relation fails for pair ({i}, {j}), deviation {dev:.3e}"
        )
    if not np.allclose(metric.g, np.eye(n), atol=1e-14):
        dirac = dirac.in_coframe(metric.orthonormal_coframe())
    sig = dirac.coeffs
    m = dirac.rank_e
    gamma = np.hstack(sig)
    iota = np.vstack([s.conj().T for s in sig]) / n
    gamma_t = np.hstack([s.conj().T for s in sig])
    iota_t = np.vstack(sig) / n
    eye = np.eye(n * m)
    p32 = eye - iota @ gamma
    p32f = eye - iota_t @ gamma_t
    rank = (n - 1) * m
    data = RSBundleData(
        n=n,
        m=m,
        gamma=frozen(gamma),
        iota=frozen(iota),
        gamma_tilde=frozen(gamma_t),
        iota_tilde=frozen(iota_t),
        P32=frozen(p32),
        basis32=frozen(_pivoted_basis(p32, rank)),
        P32_F=frozen(p32f),
        basis32_F=frozen(_pivoted_basis(p32f, rank)),
        seed=dirac,
    )
    worst = max(data.identity_deviations().values())
    if worst > IDENTITY_TOL:
        raise ConfigurationError(f"bundle identities violated (max deviation {worst:.3e})")
    return data


def _twisted(data, xi):
    """``id_{T*M} (x) sigma_D(xi)`` as an ``nm x nm`` matrix."""
    return np.kron(np.eye(data.n), data.seed(xi))


def rs_symbol(data, xi):
    """Matrix of the Rarita-Schwinger symbol in ``basis32``/``basis32_F`` coordinates."""
    xi = as_rvector(xi, data.n, name="xi")
    ambient = data.P32_F @ _twisted(data, xi) @ data.basis32
    mat = data.basis32_F.conj().T @ ambient
    gram = np.linalg.eigvalsh(mat.conj().T @ mat)
    return RSSymbolEvaluation(xi=frozen(xi.copy()), matrix=frozen(mat), gram_eigs=frozen(np.clip(gram, 0.0, None)))


def rs_linear_symbol(data):
    """The Rarita-Schwinger symbol as a :class:`LinearSymbol` on ``E^{3/2} -> F^{3/2}``."""
    eye = np.eye(data.n)
    return LinearSymbol(tuple(rs_symbol(data, eye[i]).matrix for i in range(data.n)))


def contraction(data, xi):
    """Matrix of ``Phi -> xi _| Phi`` from ``T*M (x) E`` to ``E``."""
    xi = as_rvector(xi, data.n, name="xi")
    return np.kron(xi[None, :], np.eye(data.m))


def decompose_along_xi(data, xi):
    """Orthonormal bases (ambient coordinates) of ``E32(xi)`` and ``E32(xi)'``.

    ``E32(xi)`` is the part of ``E^{3/2}`` killed by contraction with ``xi``;
    ``E32(xi)'`` is the image of ``v -> P32 (xi (x) v)``.
    """
    xi = as_rvector(xi, data.n, name="xi")
    if not np.any(xi):
        raise ConfigurationError("decomposition along xi needs xi != 0")
    b = np.asarray(data.basis32)
    kernel = null_space(contraction(data, xi) @ b)
    first = b @ kernel
    second = orth(data.P32 @ np.kron(xi[:, None], np.eye(data.m)))
    return first, second


def expected_gram_spectrum(n, m, xi_norm=1.0):
    """Eigenvalues ``|xi|^2`` (x (n-2)m) and ``((n-2)/n)^2 |xi|^2`` (x m), ascending."""
    big = np.full((n - 2) * m, xi_norm**2)
    small = np.full(m, ((n - 2) / n) ** 2 * xi_norm**2)
    return np.sort(np.concatenate([small, big]))

