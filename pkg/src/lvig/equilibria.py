"""Lotka-Volterra systems, their admissible equilibria, linearizations and
invasion rates.

The system is u_i' = u_i (b_i + sum_j a_ij u_j) on the nonnegative cone.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .community import EMPTY, Community, all_subsets, complement, label
from .errors import InternalConsistencyError, InvalidCommunity, NumericalDomainError, PreconditionFailed
from .matrix_analysis import DEFAULT_TOL, VLCertificate, as_matrix, certify_vl_stability

SINGULAR_COND = 1e12


@dataclass(frozen=True, eq=False)
class Equilibrium:
    community: Community
    u_star: np.ndarray
    admissible: bool = True
    hyperbolic: bool | None = None
    is_gass: bool = False
    # invasion rates r_i(community); exactly zero on the community itself
    rates: np.ndarray | None = field(default=None, repr=False)

    @property
    def label(self) -> str:
        return label(self.community)


@dataclass(frozen=True)
class Catalog:
    """Admissible equilibria of one system, in (cardinality, lexicographic) order."""

    equilibria: tuple[Equilibrium, ...]
    degenerate: tuple[Community, ...] = ()
    # all coordinates > -tol but the smallest within tol of zero
    boundary: tuple[Community, ...] = ()

    @cached_property
    def _index(self) -> dict[Community, Equilibrium]:
        return {eq.community: eq for eq in self.equilibria}

    def __getitem__(self, c: Community) -> Equilibrium:
        try:
            return self._index[tuple(c)]
        except KeyError:
            raise InvalidCommunity(f"{label(tuple(c))} is not admissible") from None

    def __contains__(self, c) -> bool:
        return tuple(c) in self._index

    def __iter__(self):
        return iter(self.equilibria)

    def __len__(self) -> int:
        return len(self.equilibria)

    @property
    def communities(self) -> list[Community]:
        return [eq.community for eq in self.equilibria]

    @property
    def gass(self) -> Equilibrium | None:
        return next((eq for eq in self.equilibria if eq.is_gass), None)


@dataclass(frozen=True, eq=False)
class LVSystem:
    A: np.ndarray
    b: np.ndarray
    certificate: VLCertificate | None = None
    name: str = ""

    def __post_init__(self):
        A = as_matrix(self.A)
        b = np.asarray(self.b, dtype=float)
        if b.shape != (A.shape[0],):
            raise NumericalDomainError(f"b has shape {b.shape}, expected ({A.shape[0]},)")
        if not np.all(np.isfinite(b)):
            raise NumericalDomainError("growth vector has non-finite entries")
        A.setflags(write=False)
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return len(self.b)

    @cached_property
    def vl_certificate(self) -> VLCertificate:
        if self.certificate is not None:
            return self.certificate
        return certify_vl_stability(self.A)

    def rhs(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return u * (self.b + self.A @ u)

    def with_b(self, b) -> "LVSystem":
        return LVSystem(self.A, b, self.certificate, self.name)

    def restricted(self, J) -> "LVSystem":
        """Subsystem on the species in J (re-indexed 0..|J|-1)."""
        idx = sorted(J)
        return LVSystem(self.A[np.ix_(idx, idx)], self.b[idx], name=self.name)

    def catalog(self, tol: float = DEFAULT_TOL) -> Catalog:
        cache = self.__dict__.setdefault("_catalogs", {})
        if tol not in cache:
            cache[tol] = enumerate_admissible(self, tol)
        return cache[tol]


def _restricted_solve(A: np.ndarray, b: np.ndarray, J: Community) -> np.ndarray | None:
    idx = list(J)
    AJ = A[np.ix_(idx, idx)]
    if np.linalg.cond(AJ) > SINGULAR_COND:
        return None
    return np.linalg.solve(AJ, -b[idx])


def enumerate_admissible(sys: LVSystem, tol: float = DEFAULT_TOL) -> Catalog:
    """Solve A(J) v = -b(J) for every J and keep strictly positive solutions."""
    n = sys.n
    found: list[Equilibrium] = []
    degenerate: list[Community] = []
    boundary: list[Community] = []
    for J in all_subsets(range(n)):
        u = np.zeros(n)
        if J:
            v = _restricted_solve(sys.A, sys.b, J)
            if v is None:
                degenerate.append(J)
                continue
            if np.all(v > -tol) and np.min(v) <= tol:
                boundary.append(J)
            if np.any(v <= tol):
                continue
            u[list(J)] = v
        rates = sys.b + sys.A @ u
        rates[list(J)] = 0.0
        off = np.delete(rates, list(J))
        found.append(Equilibrium(
            J, u, admissible=True,
            hyperbolic=bool(np.all(np.abs(off) > tol)),
            is_gass=bool(np.all(off <= tol)),
            rates=rates,
        ))
    return Catalog(tuple(found), tuple(degenerate), tuple(boundary))


@dataclass(frozen=True, eq=False)
class Linearization:
    """Jacobian at an equilibrium in block form, community species first.

    ``full_B`` is in the permuted order ``perm``; ``jacobian`` is the same
    matrix in natural species order.
    """

    community: Community
    perm: tuple[int, ...]
    B11: np.ndarray
    B12: np.ndarray
    B22: np.ndarray
    full_B: np.ndarray

    @property
    def outside(self) -> tuple[int, ...]:
        return self.perm[len(self.community):]

    @property
    def jacobian(self) -> np.ndarray:
        inv = np.argsort(self.perm)
        return self.full_B[np.ix_(inv, inv)]

    def invasion_eigenvector(self, i: int) -> np.ndarray:
        """Eigenvector for the eigenvalue B22_ii, in natural order, with x_i = 1.

        Solves (B11 - r Id) x = -B12 e_i for the community block.
        """
        k = len(self.community)
        col = self.outside.index(i)
        r = self.B22[col]
        vec = np.zeros(len(self.perm))
        vec[i] = 1.0
        if k:
            x = np.linalg.solve(self.B11 - r * np.eye(k), -self.B12[:, col])
            vec[list(self.community)] = x
        return vec


def linearize(sys: LVSystem, eq: Equilibrium) -> Linearization:
    I = list(eq.community)
    out = list(complement(eq.community, sys.n))
    u = eq.u_star
    B11 = sys.A[np.ix_(I, I)] * u[I][:, None]
    B12 = sys.A[np.ix_(I, out)] * u[I][:, None]
    B22 = sys.b[out] + sys.A[np.ix_(out, I)] @ u[I]
    k = len(I)
    full = np.zeros((sys.n, sys.n))
    full[:k, :k] = B11
    full[:k, k:] = B12
    full[k:, k:] = np.diag(B22)
    return Linearization(eq.community, tuple(I + out), B11, B12, B22, full)


def invasion_rate(sys: LVSystem, I: Community, i: int, tol: float = DEFAULT_TOL) -> float:
    eq = sys.catalog(tol)[tuple(I)]
    if i in eq.community:
        return 0.0
    return float(eq.rates[i])


@dataclass(frozen=True, eq=False)
class InvasionScheme:
    """Signs of invasion rates for every admissible community."""

    n: int
    communities: tuple[Community, ...]
    rates: dict[Community, np.ndarray]
    signs: dict[Community, np.ndarray]
    sign_tol: float
    nonhyperbolic: tuple[Community, ...] = ()

    def sign(self, I: Community, i: int) -> int:
        return int(self.signs[tuple(I)][i])

    @property
    def table(self) -> dict[tuple[Community, int], int]:
        return {(I, i): int(s[i]) for I, s in self.signs.items() for i in range(self.n)}

    @property
    def hyperbolic(self) -> bool:
        return not self.nonhyperbolic


def invasion_scheme(sys: LVSystem, sign_tol: float = DEFAULT_TOL,
                    tol: float = DEFAULT_TOL) -> InvasionScheme:
    catalog = sys.catalog(tol)
    rates, signs, nonhyp = {}, {}, []
    for eq in catalog:
        r = eq.rates
        s = np.where(r > sign_tol, 1, np.where(r < -sign_tol, -1, 0)).astype(np.int8)
        s[list(eq.community)] = 0
        rates[eq.community] = r
        signs[eq.community] = s
        if np.any(np.delete(s, list(eq.community)) == 0):
            nonhyp.append(eq.community)
    return InvasionScheme(sys.n, tuple(catalog.communities), rates, signs, sign_tol, tuple(nonhyp))


def hyperbolicity_report(sys: LVSystem, sign_tol: float = DEFAULT_TOL,
                         tol: float = DEFAULT_TOL) -> dict[Community, bool]:
    """Hyperbolicity of each admissible equilibrium from its invasion rates,
    cross-checked against the spectrum of the Jacobian."""
    if not sys.vl_certificate.is_vl:
        raise PreconditionFailed("hyperbolicity via invasion rates needs a VL-stable matrix")
    report = {}
    for eq in sys.catalog(tol):
        off = np.delete(eq.rates, list(eq.community))
        by_rates = bool(np.all(np.abs(off) > sign_tol))
        ev = np.linalg.eigvals(linearize(sys, eq).full_B)
        by_spectrum = bool(np.all(np.abs(ev.real) > sign_tol))
        if by_rates != by_spectrum:
            raise InternalConsistencyError(
                f"{eq.label}: rate-based hyperbolicity {by_rates} disagrees with spectrum {ev}"
            )
        report[eq.community] = by_rates
    return report


__all__ = [
    "EMPTY", "Catalog", "Equilibrium", "InvasionScheme", "LVSystem", "Linearization",
    "enumerate_admissible", "hyperbolicity_report", "invasion_rate", "invasion_scheme", "linearize",
]
