"""Exact LCP solver by support enumeration, and the GASS it yields.

LCP(B, c): find x >= 0 with w = Bx + c >= 0 and x.w = 0.  For B = -A with A
Volterra-Lyapunov stable the solution is unique and is the globally
asymptotically stable equilibrium of the Lotka-Volterra system (A, b).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .community import Community, all_subsets
from .errors import MultipleSolutions, NoSolution, VLAssumptionViolated
from .matrix_analysis import DEFAULT_TOL, VLCertificate, as_matrix, certify_vl_stability

MAX_N = 24
SINGULAR_COND = 1e12


@dataclass(frozen=True)
class LCPSolution:
    x: np.ndarray
    support: Community
    slack: np.ndarray
    solver_path: str = "SupportEnumeration"
    degenerate_supports: tuple[Community, ...] = field(default=(), compare=False)


def _solve_support(B: np.ndarray, c: np.ndarray, S: Community) -> np.ndarray | None:
    idx = list(S)
    BS = B[np.ix_(idx, idx)]
    if np.linalg.cond(BS) > SINGULAR_COND:
        return None
    return np.linalg.solve(BS, -c[idx])


def solve_lcp(B, c, tol: float = DEFAULT_TOL) -> LCPSolution:
    """Enumerate supports by increasing cardinality; return the unique solution.

    Raises NoSolution if no support is complementary feasible and
    MultipleSolutions if a second, distinct solution exists.
    """
    B = as_matrix(B)
    c = np.asarray(c, dtype=float)
    n = len(c)
    if B.shape != (n, n):
        raise ValueError(f"dimension mismatch: B is {B.shape}, c has {n} entries")
    if n > MAX_N:
        raise ValueError(f"support enumeration limited to n <= {MAX_N}")

    found: LCPSolution | None = None
    degenerate: list[Community] = []
    for S in all_subsets(range(n)):
        x = np.zeros(n)
        if S:
            xs = _solve_support(B, c, S)
            if xs is None:
                degenerate.append(S)
                continue
            if np.any(xs <= tol):
                continue
            x[list(S)] = xs
        w = B @ x + c
        outside = np.ones(n, dtype=bool)
        outside[list(S)] = False
        if np.any(w[outside] < -tol):
            continue
        sol = LCPSolution(x, S, w)
        if found is None:
            found = sol
        elif np.max(np.abs(found.x - x)) > tol:
            raise MultipleSolutions(found, sol)
    if found is None:
        raise NoSolution(f"no complementary feasible support (n={n})")
    return LCPSolution(found.x, found.support, found.slack,
                       degenerate_supports=tuple(degenerate))


def gass(A, b, tol: float = DEFAULT_TOL, certificate: VLCertificate | None = None):
    """The globally asymptotically stable equilibrium of (A, b) via LCP(-A, -b).

    ``certificate`` defaults to :func:`certify_vl_stability`; pass
    ``VLCertificate.user_asserted()`` to skip certification.
    """
    from .equilibria import Equilibrium

    A = as_matrix(A)
    b = np.asarray(b, dtype=float)
    if certificate is None:
        certificate = certify_vl_stability(A, tol)
    if not certificate.is_vl:
        raise VLAssumptionViolated(f"matrix is not certified VL-stable ({certificate.verdict.value})")
    try:
        sol = solve_lcp(-A, -b, tol)
    except (NoSolution, MultipleSolutions) as exc:
        raise VLAssumptionViolated(str(exc)) from exc
    return Equilibrium(sol.support, sol.x, admissible=True, hyperbolic=None, is_gass=True)
