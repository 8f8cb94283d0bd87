"""Matrix stability classes: stable, D-stable and Volterra-Lyapunov stable.

Only sufficient (VL) or one-sided (D-stability) tests are provided; an
``Unknown`` verdict is an honest answer, not a failure.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import InvalidCommunity, NumericalDomainError

DEFAULT_TOL = 1e-9
SIMPLEX_FLOOR = 1e-6


class Verdict(str, enum.Enum):
    CERTIFIED_VL = "CertifiedVL"
    CERTIFIED_NOT_STABLE = "CertifiedNotStable"
    UNKNOWN = "Unknown"


class Method(str, enum.Enum):
    QUASIDOMINANCE = "Quasidominance"
    CONVEX_SEARCH = "ConvexSearch"
    USER_ASSERTED = "UserAsserted"


@dataclass(frozen=True)
class VLCertificate:
    verdict: Verdict
    h: np.ndarray | None = None
    lambda_max: float | None = None
    method: Method | None = None

    @property
    def is_vl(self) -> bool:
        return self.verdict is Verdict.CERTIFIED_VL or self.method is Method.USER_ASSERTED

    @classmethod
    def user_asserted(cls) -> "VLCertificate":
        return cls(Verdict.UNKNOWN, method=Method.USER_ASSERTED)


def as_matrix(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NumericalDomainError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NumericalDomainError("matrix has non-finite entries")
    return M


def principal_submatrix(A, J: Iterable[int]) -> np.ndarray:
    """Rows and columns of ``A`` indexed by ``J`` (0-based, ascending)."""
    A = np.asarray(A, dtype=float)
    idx = sorted(set(J))
    if not idx:
        raise InvalidCommunity("principal submatrix of an empty community")
    if idx[0] < 0 or idx[-1] >= A.shape[0]:
        raise InvalidCommunity(f"indices {idx} out of range for n={A.shape[0]}")
    return A[np.ix_(idx, idx)]


def spectrum(M) -> np.ndarray:
    """Eigenvalues sorted by real part descending, ties by imaginary part."""
    M = as_matrix(M)
    ev = np.linalg.eigvals(M).astype(complex)
    order = np.lexsort((ev.imag, -np.round(ev.real, 12)))
    return ev[order]


def max_real_part(M) -> float:
    return float(np.max(np.linalg.eigvals(as_matrix(M)).real))


def is_stable(M, tol: float = DEFAULT_TOL) -> bool:
    # eigenvalues within tol of the imaginary axis count as touching it
    return max_real_part(M) < -tol


def quasidominance_weights(A) -> np.ndarray | None:
    """Positive weights pi with -pi_i a_ii - sum_{j != i} pi_j |a_ij| > 0, or None.

    Uses the M-matrix criterion on the comparison matrix C: C is a
    nonsingular M-matrix iff rho(sI - C) < s, and then pi = C^{-1} 1 > 0.
    """
    A = as_matrix(A)
    d = np.diag(A)
    if np.any(d >= 0):
        return None
    C = -np.abs(A)
    np.fill_diagonal(C, -d)
    s = float(np.max(-d))
    B = s * np.eye(len(A)) - C
    if np.max(np.abs(np.linalg.eigvals(B))) >= s:
        return None
    pi = np.linalg.solve(C, np.ones(len(A)))
    if np.any(pi <= 0) or np.any(C @ pi <= 0):
        return None
    return pi


def lyapunov_form(A, h) -> np.ndarray:
    """HA + A^T H for H = diag(h)."""
    HA = np.asarray(h)[:, None] * A
    return HA + HA.T


def lambda_max(A, h) -> float:
    return float(np.linalg.eigvalsh(lyapunov_form(A, h))[-1])


def _project_floored_simplex(z: np.ndarray, floor: float) -> np.ndarray:
    """Euclidean projection onto {h >= floor, sum(h) = 1}."""
    n = len(z)
    total = 1.0 - n * floor
    y = z - floor
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - total
    k = np.nonzero(u - css / np.arange(1, n + 1) > 0)[0][-1]
    theta = css[k] / (k + 1)
    return np.maximum(y - theta, 0.0) + floor


def _convex_search(A: np.ndarray, tol: float, max_iters: int) -> tuple[np.ndarray, float]:
    """Projected subgradient descent of lambda_max(HA + A^T H) over the simplex."""
    n = len(A)
    h = np.full(n, 1.0 / n)
    best_h, best_f = h.copy(), np.inf
    for k in range(max_iters):
        w, V = np.linalg.eigh(lyapunov_form(A, h))
        f = float(w[-1])
        if f < best_f:
            best_h, best_f = h.copy(), f
            if best_f < -tol:
                break
        v = V[:, -1]
        g = 2.0 * v * (A @ v)
        gnorm = np.linalg.norm(g)
        if gnorm == 0.0:
            break
        step = (1.0 / n) / np.sqrt(k + 1.0)
        h = _project_floored_simplex(h - step * g / gnorm, SIMPLEX_FLOOR)
    return best_h, best_f


def _m_matrix_weights(A: np.ndarray) -> np.ndarray:
    # H = diag(y / x) with C x = 1, C^T y = 1 symmetrizes into a dominant form
    C = -np.abs(A)
    np.fill_diagonal(C, -np.diag(A))
    ones = np.ones(len(A))
    return np.linalg.solve(C.T, ones) / np.linalg.solve(C, ones)


def certify_vl_stability(A, tol: float = DEFAULT_TOL, max_iters: int = 2000) -> VLCertificate:
    A = as_matrix(A)
    pi = quasidominance_weights(A)
    if pi is not None:
        for h in (pi, _m_matrix_weights(A)):
            lam = lambda_max(A, h)
            if lam < -tol:
                return VLCertificate(Verdict.CERTIFIED_VL, h / h.sum(), lam / h.sum(),
                                     Method.QUASIDOMINANCE)
    # VL implies stable, so an unstable matrix cannot be certified by the search
    if not is_stable(A, tol):
        return VLCertificate(Verdict.CERTIFIED_NOT_STABLE, method=Method.CONVEX_SEARCH)
    h, lam = _convex_search(A, tol, max_iters)
    if lam < -tol:
        return VLCertificate(Verdict.CERTIFIED_VL, h, lam, Method.CONVEX_SEARCH)
    return VLCertificate(Verdict.UNKNOWN, h, lam, Method.CONVEX_SEARCH)


def d_stability_falsifier(A, samples: int = 1000, seed: int = 0,
                          tol: float = DEFAULT_TOL) -> np.ndarray | None:
    """Search for a positive diagonal D with DA not stable.

    Returns the first witness found as a diagonal matrix.  ``None`` does not
    certify D-stability.
    """
    A = as_matrix(A)
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        d = 10.0 ** rng.uniform(-3.0, 3.0, size=len(A))
        if not is_stable(d[:, None] * A, tol):
            return np.diag(d)
    return None
