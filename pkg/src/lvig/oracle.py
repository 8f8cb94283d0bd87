"""Numerical oracle: integrate the Lotka-Volterra flow and check predictions.

Predicted heteroclinic edges are verified by seeding a trajectory on the
linearized unstable direction of the source equilibrium and watching where it
settles.  Also here: stable/unstable dimension counts, the transversality
test for the Morse-Smale property, and MacArthur's Lyapunov function for
symmetric interaction matrices.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .community import Community, label
from .equilibria import Catalog, Equilibrium, LVSystem, linearize
from .errors import (
    AmbiguousCatalog,
    NotAnUnstableDirection,
    NotSymmetric,
    PreconditionFailed,
    StiffnessError,
    VerificationInconclusive,
)

RTOL = 1e-8
ATOL = 1e-10
CONVERGENCE_WINDOW = 50
DIVERGENCE_BOUND = 1e12

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = np.array(_A[6] + (0.0,))
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4
A_TAB = np.zeros((7, 7))
for _s, _row in enumerate(_A):
    A_TAB[_s, :len(_row)] = _row
B5, E = _B5, _E


@dataclass(frozen=True, eq=False)
class Classification:
    kind: str  # "ConvergedTo", "Undecided" or "Diverged"
    equilibrium: Equilibrium | None = None
    distance: float = math.inf

    @property
    def converged(self) -> bool:
        return self.kind == "ConvergedTo"

    def describe(self) -> str:
        if self.converged:
            return f"converged: {self.equilibrium.label}"
        return self.kind.lower()


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    final_speed: float
    classification: Classification | None = None
    diverged: bool = False

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"u{i + 1}" for i in range(self.states.shape[1])])
        for t, u in zip(self.times, self.states):
            w.writerow([repr(float(t))] + [repr(float(x)) for x in u])
        return buf.getvalue()


def _initial_step(f, y0, f0, rtol, atol):
    sc = atol + rtol * np.abs(y0)
    d0 = np.linalg.norm(y0 / sc) / math.sqrt(len(y0))
    d1 = np.linalg.norm(f0 / sc) / math.sqrt(len(y0))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = f(y0 + h0 * f0)
    d2 = np.linalg.norm((f1 - f0) / sc) / math.sqrt(len(y0)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


@njit(cache=True)
def _dopri_kernel(A, b, y0, t_max, h, rtol, atol, eq_points, tol, window):
    """Returns (times, states, final_speed, status).

    status: 0 reached t_max, 1 settled early, 2 diverged, 3 step underflow.
    """
    n = y0.size
    cap = 1024
    times = np.empty(cap)
    states = np.empty((cap, n))
    k = np.empty((7, n))
    y = y0.copy()
    t = 0.0
    times[0] = t
    states[0] = y
    m = 1
    k[0] = y * (b + A @ y)
    speed = np.max(np.abs(k[0]))
    quiet = 0
    status = 0
    y_stage = np.empty(n)
    while t < t_max:
        h = min(h, t_max - t)
        if h < 1e-14 * max(1.0, abs(t)):
            status = 3
            break
        for s in range(1, 7):
            y_stage[:] = y
            for j in range(s):
                y_stage += h * A_TAB[s, j] * k[j]
            k[s] = y_stage * (b + A @ y_stage)
        y_new = y.copy()
        err_sq = 0.0
        for j in range(7):
            y_new += h * B5[j] * k[j]
        worst_negative = 0.0
        for i in range(n):
            e = 0.0
            for j in range(7):
                e += E[j] * k[j, i]
            sc = atol + rtol * max(abs(y[i]), abs(y_new[i]))
            err_sq += (h * e / sc) ** 2
            worst_negative = min(worst_negative, y_new[i])
        err = np.sqrt(err_sq / n)
        if err > 1.0:
            h *= max(0.2, 0.9 * err ** -0.2)
            continue
        if worst_negative < -atol:
            h *= 0.5
            continue
        # overshoot below zero within atol: the boundary face is invariant
        clamped = False
        for i in range(n):
            if y_new[i] < 0.0:
                y_new[i] = 0.0
                clamped = True
        t += h
        y = y_new
        if clamped:
            k[0] = y * (b + A @ y)
        else:
            k[0] = k[6]
        if m == cap:
            cap *= 2
            grown_t = np.empty(cap)
            grown_t[:m] = times
            grown_s = np.empty((cap, n))
            grown_s[:m] = states
            times = grown_t
            states = grown_s
        times[m] = t
        states[m] = y
        m += 1
        speed = np.max(np.abs(k[0]))
        if not np.all(np.isfinite(y)) or np.max(y) > DIVERGENCE_BOUND:
            status = 2
            break
        if speed < 10 * atol:
            quiet += 1
            if quiet >= window:
                near = np.inf
                for p in range(eq_points.shape[0]):
                    near = min(near, np.sqrt(np.sum((eq_points[p] - y) ** 2)))
                if near < tol:
                    status = 1
                    break
        else:
            quiet = 0
        if err > 0:
            h *= min(5.0, 0.9 * err ** -0.2)
        else:
            h *= 5.0
    return times[:m], states[:m], speed, status


def integrate(sys: LVSystem, u0, t_max: float, rtol: float = RTOL, atol: float = ATOL,
              tol: float = 1e-4, catalog: Catalog | list[Equilibrium] | None = None,
              window: int = CONVERGENCE_WINDOW) -> Trajectory:
    """Adaptive Dormand-Prince 5(4) integration of the Lotka-Volterra flow.

    Stops early once |u'| < 10 atol for ``window`` consecutive accepted steps
    while the state lies within ``tol`` of a catalog equilibrium.  A
    coordinate that starts at zero stays exactly zero.
    """
    y = np.asarray(u0, dtype=float).copy()
    if y.shape != (sys.n,):
        raise ValueError(f"initial state has shape {y.shape}, expected ({sys.n},)")
    if np.any(y < 0) or not np.all(np.isfinite(y)):
        raise ValueError("initial state must be finite and nonnegative")
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    if catalog is None:
        catalog = sys.catalog()
    eq_points = np.array([eq.u_star for eq in catalog])

    f0 = sys.rhs(y)
    if not np.any(f0):
        traj = Trajectory(np.array([0.0]), y[None, :], 0.0)
        traj.classification = classify_limit(traj, catalog, tol)
        return traj
    h0 = min(_initial_step(sys.rhs, y, f0, rtol, atol), t_max)
    A = np.ascontiguousarray(sys.A)
    b = np.ascontiguousarray(sys.b)
    times, states, speed, status = _dopri_kernel(A, b, y, float(t_max), h0, rtol, atol,
                                                 eq_points, tol, window)
    if status == 3:
        raise StiffnessError(f"step size underflow at t={times[-1]:.6g}")
    traj = Trajectory(times, states, float(speed), diverged=(status == 2))
    traj.classification = classify_limit(traj, catalog, tol)
    return traj


def classify_limit(traj: Trajectory, catalog, tol: float = 1e-4,
                   speed_tol: float | None = None) -> Classification:
    """Match the terminal state to the unique catalog equilibrium within tol."""
    eqs = list(catalog)
    points = np.array([eq.u_star for eq in eqs])
    for a in range(len(eqs)):
        for c in range(a + 1, len(eqs)):
            if np.linalg.norm(points[a] - points[c]) < 2 * tol:
                raise AmbiguousCatalog(
                    f"{eqs[a].label} and {eqs[c].label} are closer than 2*tol={2 * tol:g}")
    if traj.diverged:
        return Classification("Diverged")
    dist = np.linalg.norm(points - traj.final_state, axis=1)
    best = int(np.argmin(dist))
    if dist[best] < tol and traj.final_speed < (tol if speed_tol is None else speed_tol):
        return Classification("ConvergedTo", eqs[best], float(dist[best]))
    return Classification("Undecided", distance=float(dist[best]))


def trajectory_from_states(sys: LVSystem, times, states) -> Trajectory:
    """Wrap precomputed samples (e.g. from another integrator) as a Trajectory."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    speed = float(np.max(np.abs(sys.rhs(states[-1]))))
    return Trajectory(np.asarray(times, dtype=float), states, speed)


def unstable_seed(sys: LVSystem, eq: Equilibrium, target: Community, eps: float = 1e-4) -> np.ndarray:
    """u* + eps * (sum of invasion eigenvectors of the species in target but not in eq)."""
    invaders = [i for i in target if i not in eq.community]
    if not invaders:
        raise NotAnUnstableDirection(f"{label(target)} adds no invader to {eq.label}")
    lin = linearize(sys, eq)
    rates = dict(zip(lin.outside, lin.B22))
    bad = [i for i in invaders if rates[i] <= 0]
    if bad:
        raise NotAnUnstableDirection(
            f"species {[i + 1 for i in bad]} cannot invade {eq.label} (rates <= 0)")
    direction = sum(lin.invasion_eigenvector(i) for i in invaders)
    seed = eq.u_star + eps * direction
    if np.any(seed < 0):
        warnings.warn(f"seed from {eq.label} left the nonnegative cone; clamped", RuntimeWarning)
        seed = np.maximum(seed, 0.0)
    return seed


@dataclass(eq=False)
class EdgeVerification:
    verified: bool
    eps: float
    trajectory: Trajectory
    classification: Classification


def verify_edge_detail(sys: LVSystem, edge: tuple[Community, Community], eps: float = 1e-4,
                       t_max: float = 1e4, tol: float = 1e-4, retries: int = 8) -> EdgeVerification:
    """Integrate from the unstable seed of edge[0] toward edge[0] | edge[1].

    Inside that face the target community is the GASS, so the trajectory
    must settle there.  ``eps`` is halved on each inconclusive attempt.
    """
    src, dst = tuple(edge[0]), tuple(edge[1])
    catalog = sys.catalog()
    source, target = catalog[src], catalog[dst]
    K = tuple(sorted(set(src) | set(dst)))
    # the face of K is invariant, so only its equilibria are candidates
    face = [eq for eq in catalog if set(eq.community) <= set(K)]
    for _ in range(retries + 1):
        seed = unstable_seed(sys, source, K, eps)
        try:
            traj = integrate(sys, seed, t_max, tol=tol, catalog=face)
        except AmbiguousCatalog as exc:
            raise VerificationInconclusive(f"{label(src)} -> {label(dst)}: {exc}") from exc
        cls = traj.classification
        # still sitting at the source means the horizon was too short
        if cls.converged and cls.equilibrium.community != source.community:
            return EdgeVerification(cls.equilibrium.community == target.community, eps, traj, cls)
        eps /= 2
    raise VerificationInconclusive(
        f"{label(src)} -> {label(dst)}: trajectory undecided at t_max={t_max:g}")


def verify_edge(sys: LVSystem, edge, eps: float = 1e-4, t_max: float = 1e4,
                tol: float = 1e-4) -> bool:
    return verify_edge_detail(sys, edge, eps, t_max, tol).verified


def manifold_dimensions(sys: LVSystem, eq: Equilibrium, tol: float = 1e-9) -> tuple[int, int, int]:
    """(unstable, stable, center) eigenvalue counts of the Jacobian at eq."""
    re = np.linalg.eigvals(linearize(sys, eq).full_B).real
    return int(np.sum(re > tol)), int(np.sum(re < -tol)), int(np.sum(np.abs(re) <= tol))


def edge_dimensions(sys: LVSystem, edge, tol: float = 1e-9) -> tuple[int, int]:
    """(dim W^u(source), dim W^s(target))."""
    catalog = sys.catalog()
    src = manifold_dimensions(sys, catalog[tuple(edge[0])], tol)
    dst = manifold_dimensions(sys, catalog[tuple(edge[1])], tol)
    if src[2] or dst[2]:
        raise PreconditionFailed("transversality needs hyperbolic endpoints")
    return src[0], dst[1]


def transversality_obstruction(sys: LVSystem, edge, tol: float = 1e-9) -> bool:
    """True when dim W^u(source) + dim W^s(target) < n + 1.

    A transversal intersection must span R^n while sharing the flow
    direction, so an actual connection along such an edge breaks Morse-Smale.
    """
    du, ds = edge_dimensions(sys, edge, tol)
    return du + ds < sys.n + 1


def _check_symmetric(A: np.ndarray) -> None:
    if np.max(np.abs(A - A.T)) > 1e-12:
        raise NotSymmetric("MacArthur's function needs a symmetric interaction matrix")


def macarthur_V(sys: LVSystem, u) -> float:
    """V(u) = -b.u - u.A.u / 2."""
    _check_symmetric(sys.A)
    u = np.asarray(u, dtype=float)
    return float(-sys.b @ u - 0.5 * u @ sys.A @ u)


def macarthur_dissipation(sys: LVSystem, u) -> float:
    """dV/dt along the flow: -sum_i (b_i + (Au)_i)^2 u_i."""
    _check_symmetric(sys.A)
    u = np.asarray(u, dtype=float)
    g = sys.b + sys.A @ u
    return float(-np.sum(g * g * u))


def symmetric_edge_monotonicity(sys: LVSystem, g, margin: float = 1e-12) -> bool:
    _check_symmetric(sys.A)
    catalog = sys.catalog()
    for e in g.edges:
        v_src = macarthur_V(sys, catalog[e.src].u_star)
        v_dst = macarthur_V(sys, catalog[e.dst].u_star)
        if not v_src > v_dst + margin:
            return False
    return True


@dataclass(frozen=True)
class AbsorbingBound:
    weights: np.ndarray
    c: float
    d: float

    @property
    def threshold(self) -> float:
        return 2 * self.c / self.d

    def size(self, u) -> float:
        return float(self.weights @ np.asarray(u, dtype=float))


def absorbing_bound(sys: LVSystem) -> AbsorbingBound:
    """Constants with d/dt (w.u) <= c (w.u) - d (w.u)^2 on the nonnegative cone.

    Weights come from the VL certificate: the quadratic part is bounded by
    lambda_max(HA + A^T H) |u|^2 / 2 and |u|^2 >= (w.u)^2 / |w|^2.
    """
    cert = sys.vl_certificate
    if cert.h is None or cert.lambda_max is None or cert.lambda_max >= 0:
        raise PreconditionFailed("absorbing bound needs a VL certificate with weights")
    w = np.asarray(cert.h)
    c = max(float(np.max(sys.b)), 0.0)
    d = -cert.lambda_max / (2 * float(w @ w))
    return AbsorbingBound(w, c, d)
