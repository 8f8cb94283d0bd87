"""Robustness of the invasion scheme under perturbation of (A, b).

Perturbations of the whole problem are probed by sampling.  For a fixed A
the growth vectors b with a common scheme form open convex cones, bounded
by the hyperplanes {b : r_i(I) = 0} returned by :func:`residual_hyperplanes`.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .community import Community, all_subsets, complement, label
from .equilibria import InvasionScheme, LVSystem, invasion_scheme
from .errors import PreconditionFailed
from .matrix_analysis import DEFAULT_TOL

BISECTION_STEPS = 12


def scheme_equal(s1: InvasionScheme, s2: InvasionScheme) -> bool:
    """Same admissible communities and identical sign tables."""
    if s1.n != s2.n or set(s1.communities) != set(s2.communities):
        return False
    return all(np.array_equal(s1.signs[c], s2.signs[c]) for c in s1.communities)


def first_divergence(ref: InvasionScheme, other: InvasionScheme) -> dict | None:
    """Describe the first difference between two schemes, or None."""
    ref_set, other_set = set(ref.communities), set(other.communities)
    if ref_set != other_set:
        return {
            "reason": "admissibility",
            "lost": [label(c) for c in sorted(ref_set - other_set)],
            "gained": [label(c) for c in sorted(other_set - ref_set)],
        }
    for c in ref.communities:
        diff = np.nonzero(ref.signs[c] != other.signs[c])[0]
        if diff.size:
            i = int(diff[0])
            return {"reason": "sign", "community": label(c), "species": i + 1,
                    "expected": int(ref.signs[c][i]), "found": int(other.signs[c][i])}
    return None


def sample_ball(rng: np.random.Generator, center: np.ndarray, radius: float) -> np.ndarray:
    """Uniform point in the Euclidean ball of ``radius`` around ``center``."""
    d = center.size
    g = rng.standard_normal(d)
    g /= np.linalg.norm(g)
    r = radius * rng.uniform() ** (1.0 / d)
    return center + (r * g).reshape(center.shape)


@dataclass
class StabilityReport:
    epsilon_star: float
    radius: float
    trials: int
    failures: list[dict] = field(default_factory=list)
    scheme_ref: InvasionScheme | None = None
    untested: bool = False

    def to_json(self) -> str:
        payload = {
            "epsilon_star": self.epsilon_star,
            "radius": self.radius,
            "trials": self.trials,
            "untested": self.untested,
            "failure_count": len(self.failures),
            "failures": self.failures,
        }
        return json.dumps(payload, indent=2)


def _trial(sys: LVSystem, ref: InvasionScheme, radius: float, seed: int, k: int,
           perturb_matrix: bool, sign_tol: float):
    rng = np.random.default_rng([seed, k])
    A = sample_ball(rng, sys.A, radius) if perturb_matrix else sys.A
    b = sample_ball(rng, sys.b, radius)
    other = invasion_scheme(LVSystem(A, b), sign_tol)
    return A, b, first_divergence(ref, other)


def _failures(sys, ref, radius, trials, seed, perturb_matrix, sign_tol, stop_early):
    out = []
    for k in range(trials):
        A, b, div = _trial(sys, ref, radius, seed, k, perturb_matrix, sign_tol)
        if div is not None:
            out.append({"trial": k, "A": A.tolist(), "b": b.tolist(), "divergence": div})
            if stop_early:
                break
    return out


def perturbation_sweep(sys: LVSystem, radius: float = 1.0, trials: int = 200, seed: int = 0,
                       sign_tol: float = DEFAULT_TOL, perturb_matrix: bool = True) -> StabilityReport:
    """Sample (A', b') in B(A, radius) x B(b, radius) and compare schemes.

    ``failures`` lists the diverging trials at ``radius``.  If any exist,
    ``epsilon_star`` is refined by bisection on [0, radius] using the same
    per-trial random substreams.
    """
    if not sys.vl_certificate.is_vl:
        raise PreconditionFailed("perturbation sweep needs a VL-stable base matrix")
    ref = invasion_scheme(sys, sign_tol)
    if not ref.hyperbolic:
        raise PreconditionFailed(
            "base system has nonhyperbolic equilibria: "
            + ", ".join(label(c) for c in ref.nonhyperbolic))
    if trials == 0:
        return StabilityReport(radius, radius, 0, [], ref, untested=True)

    failures = _failures(sys, ref, radius, trials, seed, perturb_matrix, sign_tol, False)
    if not failures:
        return StabilityReport(radius, radius, trials, [], ref)
    lo, hi = 0.0, radius
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if _failures(sys, ref, mid, trials, seed, perturb_matrix, sign_tol, True):
            hi = mid
        else:
            lo = mid
    return StabilityReport(lo, radius, trials, failures, ref)


def cone_membership(sys_ref: LVSystem, b, sign_tol: float = DEFAULT_TOL) -> bool:
    """True iff (A, b) is hyperbolic and shares the reference invasion scheme."""
    ref = invasion_scheme(sys_ref, sign_tol)
    if not ref.hyperbolic:
        raise PreconditionFailed("reference system is not hyperbolic")
    other = invasion_scheme(sys_ref.with_b(b), sign_tol)
    return other.hyperbolic and scheme_equal(ref, other)


def convexity_probe(sys_ref: LVSystem, b2, lambdas, sign_tol: float = DEFAULT_TOL) -> bool:
    """Check that every b = lam * b_ref + (1 - lam) * b2 stays in the cone."""
    b2 = np.asarray(b2, dtype=float)
    if not cone_membership(sys_ref, b2, sign_tol):
        raise PreconditionFailed("b2 is not in the reference cone")
    return all(cone_membership(sys_ref, lam * sys_ref.b + (1.0 - lam) * b2, sign_tol)
               for lam in lambdas)


@dataclass(frozen=True, eq=False)
class Hyperplane:
    """{b : normal . b = 0}, where normal . b = r_i(I) whenever I is admissible."""

    community: Community
    species: int
    normal: np.ndarray
    # u*(I) = coupling @ b(I) with coupling = -A(I)^{-1}
    coupling: np.ndarray = field(repr=False)
    offset: float = 0.0

    def value(self, b) -> float:
        return float(self.normal @ np.asarray(b, dtype=float))

    def side_condition(self, b, tol: float = DEFAULT_TOL) -> bool:
        """u*(I) > tol componentwise, i.e. I is admissible for b."""
        if not self.community:
            return True
        b = np.asarray(b, dtype=float)
        return bool(np.all(self.coupling @ b[list(self.community)] > tol))

    def distance(self, b) -> float:
        return abs(self.value(b)) / float(np.linalg.norm(self.normal))


@dataclass(frozen=True)
class ResidualArrangement:
    hyperplanes: list[Hyperplane]
    singular: list[Community]

    def __len__(self) -> int:
        return len(self.hyperplanes)

    def to_csv(self) -> str:
        buf = io.StringIO()
        n = len(self.hyperplanes[0].normal) if self.hyperplanes else 0
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["community", "species"] + [f"n{k + 1}" for k in range(n)])
        for h in self.hyperplanes:
            w.writerow([label(h.community), h.species + 1] + [repr(float(x)) for x in h.normal])
        return buf.getvalue()


def residual_hyperplanes(A, singular_cond: float = 1e12) -> ResidualArrangement:
    """One hyperplane per (I, i not in I): the zero set of r_i(I) as a linear
    function of b.  Subsets with singular A(I) are skipped and reported."""
    A = np.asarray(A, dtype=float)
    n = len(A)
    planes, singular = [], []
    for I in all_subsets(range(n)):
        idx = list(I)
        if I:
            AI = A[np.ix_(idx, idx)]
            if np.linalg.cond(AI) > singular_cond:
                singular.append(I)
                continue
            coupling = -np.linalg.inv(AI)
        else:
            coupling = np.zeros((0, 0))
        for i in complement(I, n):
            normal = np.zeros(n)
            normal[i] = 1.0
            if I:
                # r_i(I) = b_i + sum_j a_ij u*_j with u*(I) = -A(I)^{-1} b(I)
                normal[idx] += A[i, idx] @ coupling
            planes.append(Hyperplane(I, i, normal, coupling))
    return ResidualArrangement(planes, singular)


@dataclass(frozen=True)
class ResidualDistance:
    restricted: float
    unrestricted: float
    nearest: Hyperplane | None = None


def distance_to_residual(sys: LVSystem, arrangement: ResidualArrangement | None = None,
                         tol: float = DEFAULT_TOL) -> ResidualDistance:
    """Euclidean distance from b to the nonhyperbolicity hyperplanes.

    ``restricted`` only counts planes whose side condition holds at b;
    ``unrestricted`` is the conservative lower bound over all planes.
    """
    if arrangement is None:
        arrangement = residual_hyperplanes(sys.A)
    restricted, unrestricted, nearest = np.inf, np.inf, None
    for h in arrangement.hyperplanes:
        d = h.distance(sys.b)
        unrestricted = min(unrestricted, d)
        if d < restricted and h.side_condition(sys.b, tol):
            restricted, nearest = d, h
    return ResidualDistance(float(restricted), float(unrestricted), nearest)
