"""Lagrangian dual machinery for the deterministic scheduling problem.

For a scenario with state probabilities p_i, the dual of the deterministic
problem at penalty weight V is the concave function

    q(u) = sum_i p_i min_x [ V f(s_i, x) + u . (g(s_i, x) - b(s_i, x)) ]

over multiplier vectors u >= 0, where g are arrival maps and b service
maps.  The minimizing action in state s_i at multiplier u is exactly the
greedy per-slot decision at backlog u, which is what ties the dual's
geometry to the backlog process: the backlog vector behaves like a noisy
subgradient iterate and concentrates near the dual maximizer U*_V.

This module evaluates q and its subgradient, runs deterministic (OSM) and
randomized incremental (RISM) subgradient steps, locates U*_V, probes the
local geometry of the dual (polyhedral vs smooth), checks the structural
assumptions (slackness, scaling, subgradient inequality), and computes the
attraction-theorem constants.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .model import ContinuousActions, NetworkSpec, tables
from .scenarios import ScenarioHandle, as_handle

__all__ = [
    "DualEval",
    "MultiplierResult",
    "GeometryEstimate",
    "TheoremConstants",
    "ScalingReport",
    "SlacknessResult",
    "ConvergenceError",
    "evaluate_dual",
    "per_state_dual",
    "per_state_optimum",
    "osm_step",
    "rism_step",
    "find_optimal_multiplier",
    "check_scaling",
    "check_subgradient_inequality",
    "check_slackness",
    "estimate_geometry",
    "theorem2_constants",
]


class ConvergenceError(RuntimeError):
    """Multiplier search failed; ``best`` holds the best iterate found."""

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


@dataclass
class DualEval:
    """q(u), one subgradient, and the per-state minimizers behind them."""

    value: float
    subgradient: np.ndarray
    argmin_actions: list


@dataclass
class MultiplierResult:
    u_star: np.ndarray
    value: float
    method: str  # "closed-form" | "numeric"
    iterations: int
    probe_ok: bool


@dataclass
class GeometryEstimate:
    """Local shape of q at V=1 near its maximizer.

    ``kind`` is "polyhedral" when the directional decay rate
    (q(U*) - q(U)) / ||U - U*|| is stable across two probe radii, else
    "smooth" with L fitted from quadratic decay.  L is taken as a minimum
    over probes, so it is a valid modulus for the matching lower bound.
    """

    kind: str
    L: float
    ratios: tuple[float, float]
    radii: tuple[float, float]
    n_directions: int


@dataclass
class TheoremConstants:
    """Attraction constants for a polyhedral dual with modulus L.

    Built with eta = L/2 and the i.i.d. state specialization (nu = 0,
    T_nu = 1): D1 = 2B^2/L + L/4, K1 = (B^2 + BL/6)/(L/2),
    c1* = 8 (B^2 + BL/6) e^(L/(B + L/6)) / L^2, beta* = 1/K1.
    ``d_smooth`` is the smooth-case drift distance, present when V is
    supplied: D = (sqrt(V) + sqrt(V + 4 B^2 L V)) / (2L).
    """

    B: float
    L: float
    d1: float
    k1: float
    c1_star: float
    beta_star: float
    d_smooth: float | None = None


@dataclass
class ScalingReport:
    """Residuals of the multiplier scaling identity U*_V = V U*_1."""

    u_star_1: np.ndarray
    residuals: dict[float, float]
    tol: float
    ok: bool


@dataclass
class SlacknessResult:
    """LP certificate for average service slack epsilon.

    ``witness`` is a per-state distribution over actions whose mean
    arrival-minus-service vector is <= -margin in every coordinate.
    """

    feasible: bool
    epsilon: float
    margin: float
    witness: list[np.ndarray]


# -- per-state selection -----------------------------------------------------
#
# One canonical score computation is shared by dual evaluation, the greedy
# per-slot decision and RISM, so their selections agree bit for bit
# (ties broken toward the lowest action index by first-maximum argmax).


def _finite_argmin(tab, V: float, i: int, u: np.ndarray) -> int:
    score = tab.sma[i] @ u
    score -= V * tab.cost[i]
    return int(np.argmax(score))


def _state_argmin(spec: NetworkSpec, V: float, i: int, u: np.ndarray):
    """Return (action, cost, arrivals, services) minimizing the state term."""
    st = spec.states[i]
    if isinstance(st.actions, ContinuousActions):
        fam = st.actions
        x = float(fam.dual_argmin(V, u))
        return x, float(fam.cost(x)), fam.arrivals(x), fam.services(x)
    tab = tables(spec)
    k = _finite_argmin(tab, V, i, u)
    return k, float(tab.cost[i][k]), tab.arr[i][k], tab.svc[i][k]


def _check_multiplier(u, r: int) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (r,):
        raise ValueError(f"multiplier must have shape ({r},), got {u.shape}")
    if (u < 0).any():
        raise ValueError(f"multiplier must be entrywise nonnegative, got {u}")
    return u


def evaluate_dual(spec: NetworkSpec, V: float, u) -> DualEval:
    """Evaluate q(u) with a subgradient.

    The subgradient is G_j = sum_i p_i (g_j - b_j) at the per-state
    minimizers; its Euclidean norm never exceeds B.
    """
    u = _check_multiplier(u, spec.r)
    if not (V > 0):
        raise ValueError(f"V must be positive, got {V!r}")
    value = 0.0
    G = np.zeros(spec.r)
    actions = []
    for i, st in enumerate(spec.states):
        k, cost, arr, svc = _state_argmin(spec, V, i, u)
        gmb = arr - svc
        value += st.prob * (V * cost + float(gmb @ u))
        G += st.prob * gmb
        actions.append(k)
    return DualEval(value, G, actions)


def per_state_dual(spec: NetworkSpec, V: float, state: int, u) -> tuple[float, "int | float"]:
    """Minimum and minimizer of the single-state dual term at multiplier u."""
    u = _check_multiplier(u, spec.r)
    k, cost, arr, svc = _state_argmin(spec, V, state, u)
    return V * cost + float((arr - svc) @ u), k


def per_state_optimum(spec: NetworkSpec, V: float, state: int) -> float:
    """Largest maximizer of the single-queue per-state dual over u >= 0.

    The per-state dual is concave in the scalar multiplier; below its
    largest maximizer no minimizing action can decrease the backlog, which
    is what makes the absorbing interval work.  Returns +inf when the
    function never starts decreasing (the state only pushes the backlog
    up).  Finite action tables are scanned at their breakpoints;
    continuous families are bisected on the minimizer's service rate.
    """
    if spec.r != 1:
        raise ValueError("per-state optima are defined for single-queue scenarios")
    st = spec.states[state]
    if isinstance(st.actions, ContinuousActions):
        return _continuous_state_optimum(spec, V, state, st.actions)
    tab = tables(spec)
    c = V * tab.cost[state]
    d = (tab.arr[state] - tab.svc[state])[:, 0]
    if d.min() >= 0.0:
        return math.inf
    zs = {0.0}
    for x, y in itertools.combinations(range(len(d)), 2):
        if d[x] != d[y]:
            z = (c[y] - c[x]) / (d[x] - d[y])
            if z > 0:
                zs.add(float(z))
    z_arr = np.array(sorted(zs))
    env = (c[None, :] + z_arr[:, None] * d[None, :]).min(axis=1)
    top = env.max()
    tol = 1e-9 * max(1.0, abs(top))
    return float(z_arr[env >= top - tol].max())


def _continuous_state_optimum(spec: NetworkSpec, V: float, state: int,
                              fam: ContinuousActions) -> float:
    # Largest u with arrival rate >= minimizing service rate; the minimizer's
    # rate is nondecreasing in u, so the set is an interval and bisection works.
    a = float(fam.arrivals(fam.dual_argmin(V, np.zeros(1)))[0])

    def rate(u1: float) -> float:
        return float(fam.services(fam.dual_argmin(V, np.array([u1])))[0])

    hi = max(1.0, V)
    for _ in range(200):
        if rate(hi) > a + 1e-12:
            break
        hi *= 2.0
        if hi > 1e15:
            return math.inf
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if rate(mid) <= a + 1e-12:
            lo = mid
        else:
            hi = mid
    return lo


# -- subgradient steps -------------------------------------------------------


def osm_step(spec: NetworkSpec, V: float, u, alpha: float = 1.0) -> np.ndarray:
    """One deterministic subgradient ascent step, projected to u >= 0."""
    ev = evaluate_dual(spec, V, u)
    return np.maximum(np.asarray(u, dtype=float) + alpha * ev.subgradient, 0.0)


def rism_step(spec: NetworkSpec, V: float, u, state: int, alpha: float = 1.0) -> np.ndarray:
    """One randomized incremental step on the sampled state's term.

    u_j <- max[u_j - alpha * b_j, 0] + alpha * g_j at the state's
    minimizing action; with alpha = 1 this is exactly the idle-fill queue
    update under the greedy decision.
    """
    u = _check_multiplier(u, spec.r)
    _, _, arr, svc = _state_argmin(spec, V, state, u)
    return np.maximum(u - alpha * svc, 0.0) + alpha * arr


# -- multiplier search -------------------------------------------------------


def _probe_local_optimality(spec, V, u_star, q_star, rng, n=100, radius=None,
                            tol=1e-9) -> bool:
    r = spec.r
    if radius is None:
        radius = 0.5
    ok = True
    for _ in range(n):
        d = rng.standard_normal(r)
        nrm = float(np.linalg.norm(d))
        if nrm == 0.0:
            continue
        cand = np.maximum(u_star + (radius / nrm) * d, 0.0)
        if evaluate_dual(spec, V, cand).value > q_star + tol:
            ok = False
            break
    return ok


def _coordinate_profile(spec, tab, V, u, j):
    """Per-state (base, slope) arrays of the dual along coordinate j."""
    profiles = []
    for i in range(spec.n_states):
        gmb = -tab.sma[i]  # arrivals minus services
        base = V * tab.cost[i] + gmb @ u - gmb[:, j] * u[j]
        profiles.append((base, gmb[:, j]))
    return profiles


def _profile_eval(spec, profiles, zs: np.ndarray) -> np.ndarray:
    out = np.zeros(len(zs))
    for prob, (base, d) in zip(spec.probs, profiles):
        out += prob * (base[None, :] + zs[:, None] * d[None, :]).min(axis=1)
    return out


def _breakpoint_snap(spec: NetworkSpec, V: float, u: np.ndarray,
                     max_rounds: int = 12) -> np.ndarray:
    """Exact coordinate ascent over breakpoints of the piecewise-linear dual.

    Along one coordinate the dual is a probability mix of lower envelopes
    of lines, so its maximum sits at a pairwise tie point of some state's
    lines (or at 0).  Tie points are computed in closed form, which lets
    vertex coordinates come out exact instead of golden-section-close.
    """
    tab = tables(spec)
    u = u.copy()
    for _ in range(max_rounds):
        moved = False
        for j in range(spec.r):
            profiles = _coordinate_profile(spec, tab, V, u, j)
            cands = {0.0, float(u[j])}
            for base, d in profiles:
                dd = d[:, None] - d[None, :]
                bb = base[None, :] - base[:, None]
                with np.errstate(divide="ignore", invalid="ignore"):
                    z = bb / dd
                z = z[np.isfinite(z) & (z > 0)]
                cands.update(z.tolist())
            zs = np.array(sorted(cands))
            vals = _profile_eval(spec, profiles, zs)
            best = int(np.argmax(vals))
            cur = float(_profile_eval(spec, profiles, np.array([u[j]]))[0])
            if vals[best] > cur and zs[best] != u[j]:
                u[j] = zs[best]
                moved = True
        if not moved:
            break
    return u


def _solve_exact(rows, rhs, r):
    """Solve rows @ u = rhs in exact rational arithmetic.

    Returns the unique solution as floats, or None when the system is
    underdetermined or inconsistent.  Floats are dyadic rationals, so the
    elimination is exact; the only rounding is the final conversion.
    """
    if not rows:
        return None
    aug = [[Fraction(float(v)) for v in row] + [Fraction(float(b))]
           for row, b in zip(rows, rhs)]
    n_rows = len(aug)
    piv_cols = []
    rix = 0
    for col in range(r):
        p = next((k for k in range(rix, n_rows) if aug[k][col] != 0), None)
        if p is None:
            continue
        aug[rix], aug[p] = aug[p], aug[rix]
        pv = aug[rix][col]
        aug[rix] = [x / pv for x in aug[rix]]
        for k in range(n_rows):
            if k != rix and aug[k][col] != 0:
                f = aug[k][col]
                aug[k] = [a - f * b for a, b in zip(aug[k], aug[rix])]
        piv_cols.append(col)
        rix += 1
        if rix == n_rows:
            break
    if len(piv_cols) < r:
        return None
    if any(aug[k][r] != 0 for k in range(rix, n_rows)):
        return None
    sol = np.zeros(r)
    for prow, col in enumerate(piv_cols):
        sol[col] = float(aug[prow][r])
    return sol


def _rational_vertex(spec: NetworkSpec, V: float, u: np.ndarray) -> np.ndarray:
    """Exactify a near-optimal multiplier of a finite (piecewise-linear) dual.

    Coordinate moves stall near vertices whose defining kinks run along
    diagonal directions, and float accumulation cannot land on the vertex
    bit for bit.  Instead, collect the action pairs that nearly tie in the
    per-state minimization (under a ladder of tolerances), solve the
    resulting equality system exactly, and keep the best candidate by
    dual value.  Any consistent full-rank subset of truly-active ties
    pins the same vertex, so wrong rungs either fail rank/consistency or
    score worse; the result never regresses below the input point.
    """
    tab = tables(spec)
    rel = max(1.0, float(V), float(np.max(u, initial=0.0)))
    best_u = u
    best_q = evaluate_dual(spec, V, u).value
    for t in (1e-12, 1e-9, 1e-7, 1e-5, 1e-3, 1e-2):
        tol = t * rel
        seen = set()
        rows, rhs = [], []
        for i in range(spec.n_states):
            gmb = -tab.sma[i]
            vals = V * tab.cost[i] + gmb @ u
            near = np.flatnonzero(vals <= vals.min() + tol)
            k0 = int(near[0])
            for k in near[1:]:
                row = gmb[k0] - gmb[int(k)]
                b = V * tab.cost[i][int(k)] - V * tab.cost[i][k0]
                key = (tuple(row.tolist()), float(b))
                if key not in seen:
                    seen.add(key)
                    rows.append(row)
                    rhs.append(b)
        for j in range(spec.r):
            if u[j] <= 1e-6 * rel:  # boundary coordinate pinned at zero
                e = np.zeros(spec.r)
                e[j] = 1.0
                rows.append(e)
                rhs.append(0.0)
        cand = _solve_exact(rows, rhs, spec.r)
        if cand is None or (cand < 0).any():
            continue
        qc = evaluate_dual(spec, V, cand).value
        # >= so a float-equal exact tie point replaces a merely-polished one
        if qc >= best_q:
            best_q, best_u = qc, cand
    return best_u


def _golden_polish(spec, V, u, rounds, span, tol):
    """Coordinate-wise golden-section ascent on q (works on any scenario)."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0

    def qv(vec):
        return evaluate_dual(spec, V, vec).value

    u = u.copy()
    for _ in range(rounds):
        moved = 0.0
        for j in range(spec.r):
            lo = max(u[j] - span, 0.0)
            hi = u[j] + span

            def qj(z):
                cand = u.copy()
                cand[j] = z
                return qv(cand)

            a, b = lo, hi
            c = b - invphi * (b - a)
            d = a + invphi * (b - a)
            fc, fd = qj(c), qj(d)
            while b - a > tol:
                if fc >= fd:
                    b, d, fd = d, c, fc
                    c = b - invphi * (b - a)
                    fc = qj(c)
                else:
                    a, c, fc = c, d, fd
                    d = a + invphi * (b - a)
                    fd = qj(d)
            z = 0.5 * (a + b)
            if qj(z) > qj(u[j]):
                moved = max(moved, abs(z - u[j]))
                u[j] = z
        if moved <= tol:
            break
    return u


def find_optimal_multiplier(scenario, V: float, method: str = "auto",
                            rng: "np.random.Generator | int | None" = None,
                            max_iter: int = 4000,
                            step_a: "float | None" = None,
                            step_b: float = 200.0,
                            probe_directions: int = 100) -> MultiplierResult:
    """Locate the dual maximizer U*_V.

    With ``method="auto"`` a registered closed form is returned directly;
    ``method="numeric"`` forces the search: projected subgradient ascent
    with diminishing steps alpha_t = a/(1 + t/b), coordinate-wise
    golden-section polish, and (finite tables) an exact breakpoint snap.
    The result must pass a local-optimality probe of random perturbations;
    a failed probe raises :class:`ConvergenceError` with the best iterate.

    If the dual maximizer is not unique the returned point is one maximizer
    among possibly many; the probe cannot detect flat optima.
    """
    handle = as_handle(scenario)
    spec = handle.spec
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(0 if rng is None else int(rng))
    if method not in ("auto", "closed-form", "numeric"):
        raise ValueError(f"unknown method {method!r}")
    if method in ("auto", "closed-form") and handle.u_star is not None:
        u = np.asarray(handle.u_star(V), dtype=float)
        ev = evaluate_dual(spec, V, u)
        ok = _probe_local_optimality(spec, V, u, ev.value, rng, n=probe_directions)
        return MultiplierResult(u, ev.value, "closed-form", 0, ok)
    if method == "closed-form":
        raise ValueError(f"scenario {spec.name!r} has no registered closed form")

    # Subgradient warmup from a V-scaled start.
    if step_a is None:
        step_a = max(1.0, 0.1 * V)
    u = np.full(spec.r, float(V))
    best_u, best_q = u.copy(), evaluate_dual(spec, V, u).value
    for t in range(max_iter):
        alpha = step_a / (1.0 + t / step_b)
        ev = evaluate_dual(spec, V, u)
        if ev.value > best_q:
            best_q, best_u = ev.value, u.copy()
        u = np.maximum(u + alpha * ev.subgradient, 0.0)
    u = best_u

    span = max(2.0 * spec.B, 0.05 * V, 1.0)
    u = _golden_polish(spec, V, u, rounds=8, span=span, tol=1e-10 * max(1.0, V))
    if spec.is_finite:
        u = _breakpoint_snap(spec, V, u)
        u = _rational_vertex(spec, V, u)
    ev = evaluate_dual(spec, V, u)
    result = MultiplierResult(u, ev.value, "numeric", max_iter, True)
    if not _probe_local_optimality(spec, V, u, ev.value, rng, n=probe_directions):
        result.probe_ok = False
        raise ConvergenceError(
            f"multiplier search did not reach a local maximum for {spec.name!r} at V={V}",
            best=result)
    return result


# -- structural checks -------------------------------------------------------


def check_scaling(scenario, V_list: Sequence[float], tol: float = 1e-9) -> ScalingReport:
    """Residuals of U*_V = V * U*_1 over the given V values.

    Each residual is the max-norm gap ||U*_V - V U*_1||_inf; the report is
    ok when every residual is within tol * V.
    """
    handle = as_handle(scenario)
    u1 = find_optimal_multiplier(handle, 1.0).u_star
    residuals = {}
    ok = True
    for V in V_list:
        uv = find_optimal_multiplier(handle, V).u_star
        res = float(np.max(np.abs(uv - V * u1)))
        residuals[V] = res
        ok = ok and res <= tol * V
    return ScalingReport(u1, residuals, tol, ok)


def check_subgradient_inequality(spec: NetworkSpec, V: float, u, u_hat,
                                 tol: float = 1e-9) -> bool:
    """Concavity certificate: (u_hat - u) . G_u >= q(u_hat) - q(u) - tol."""
    u = _check_multiplier(u, spec.r)
    u_hat = _check_multiplier(u_hat, spec.r)
    ev = evaluate_dual(spec, V, u)
    q_hat = evaluate_dual(spec, V, u_hat).value
    return float((u_hat - u) @ ev.subgradient) >= q_hat - ev.value - tol


def check_slackness(spec: NetworkSpec, epsilon: float) -> SlacknessResult:
    """Search for per-state action distributions with service slack epsilon.

    Solves the small LP  max s  over per-state distributions theta with
    sum_i p_i E_theta[g - b] <= -s  per queue, and reports whether the
    optimal margin reaches epsilon.  The witness distributions are returned
    so they can be checked independently.
    """
    from scipy.optimize import linprog

    if not (epsilon > 0):
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    if not spec.is_finite:
        raise ValueError("slackness LP needs finite action tables")
    tab = tables(spec)
    sizes = [len(c) for c in tab.cost]
    n_theta = sum(sizes)
    offsets = np.concatenate(([0], np.cumsum(sizes)))

    # Inequalities: sum_i p_i theta_i . (g - b)_j + s <= 0 for each queue j.
    A_ub = np.zeros((spec.r, n_theta + 1))
    for i, st in enumerate(spec.states):
        gmb = -tab.sma[i]  # (A_i, r)
        A_ub[:, offsets[i]:offsets[i + 1]] = st.prob * gmb.T
    A_ub[:, -1] = 1.0
    b_ub = np.zeros(spec.r)
    # Equalities: each state's theta sums to one.
    A_eq = np.zeros((spec.n_states, n_theta + 1))
    for i in range(spec.n_states):
        A_eq[i, offsets[i]:offsets[i + 1]] = 1.0
    b_eq = np.ones(spec.n_states)
    c = np.zeros(n_theta + 1)
    c[-1] = -1.0
    bounds = [(0.0, 1.0)] * n_theta + [(None, None)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs")
    if not res.success:
        raise RuntimeError(f"slackness LP failed: {res.message}")
    margin = float(res.x[-1])
    witness = [np.asarray(res.x[offsets[i]:offsets[i + 1]]) for i in range(spec.n_states)]
    return SlacknessResult(margin >= epsilon - 1e-9, epsilon, margin, witness)


# -- geometry and constants --------------------------------------------------


def estimate_geometry(scenario, u_star0=None, probe_radius: float = 0.5,
                      n_directions: int = 64,
                      rng: "np.random.Generator | int | None" = None,
                      ratio_tol: float = 0.2) -> GeometryEstimate:
    """Classify the V=1 dual's local shape at its maximizer and estimate L.

    Probes q at two radii (probe_radius and its double) along random
    directions kept inside the nonnegative orthant.  A stable minimum
    decay ratio across radii (change < ratio_tol) means piecewise-linear
    growth away from U*_0 (polyhedral, L = the stable ratio); otherwise
    decay is fitted as L ||U - U*_0||^2 (smooth).
    """
    handle = as_handle(scenario)
    spec = handle.spec
    if not (probe_radius > 0):
        raise ValueError(f"probe_radius must be positive, got {probe_radius!r}")
    if n_directions < 2:
        raise ValueError("need at least two probe directions")
    if rng is None:
        rng = np.random.default_rng(0)
    if u_star0 is None:
        u_star0 = find_optimal_multiplier(handle, 1.0).u_star
    u_star0 = np.asarray(u_star0, dtype=float)
    q_star = evaluate_dual(spec, 1.0, u_star0).value
    radii = (probe_radius, 2.0 * probe_radius)

    dirs = []
    attempts = 0
    while len(dirs) < n_directions:
        attempts += 1
        if attempts > 200 * n_directions:
            raise ValueError("could not find probe directions keeping U*_0 + 2*radius*d >= 0")
        d = rng.standard_normal(spec.r)
        nrm = float(np.linalg.norm(d))
        if nrm == 0.0:
            continue
        d /= nrm
        if ((u_star0 + radii[1] * d) >= 0.0).all():
            dirs.append(d)

    decays = np.empty((2, len(dirs)))
    for a, rad in enumerate(radii):
        for b, d in enumerate(dirs):
            decays[a, b] = q_star - evaluate_dual(spec, 1.0, u_star0 + rad * d).value
    ratio_small = float(decays[0].min() / radii[0])
    ratio_large = float(decays[1].min() / radii[1])
    if ratio_small <= 0 or ratio_large <= 0:
        raise ValueError("dual appears flat along some probe direction; maximizer "
                         "may be non-unique or off its optimum")
    if abs(ratio_large / ratio_small - 1.0) < ratio_tol:
        L = min(ratio_small, ratio_large)
        kind = "polyhedral"
    else:
        quad = min(decays[0].min() / radii[0] ** 2, decays[1].min() / radii[1] ** 2)
        L = float(quad)
        kind = "smooth"
    return GeometryEstimate(kind, L, (ratio_small, ratio_large), radii, len(dirs))


def theorem2_constants(B: float, L: float, V: "float | None" = None) -> TheoremConstants:
    """Attraction constants from the change bound B and modulus L (B >= L > 0)."""
    if not (L > 0):
        raise ValueError(f"L must be positive, got {L!r}")
    if not (B >= L):
        raise ValueError(f"need B >= L, got B={B!r}, L={L!r}")
    d1 = 2.0 * B * B / L + L / 4.0
    k1 = (B * B + B * L / 6.0) / (L / 2.0)
    c1_star = 8.0 * (B * B + B * L / 6.0) * math.exp(L / (B + L / 6.0)) / (L * L)
    d_smooth = None
    if V is not None:
        if not (V > 0):
            raise ValueError(f"V must be positive, got {V!r}")
        d_smooth = (math.sqrt(V) + math.sqrt(V + 4.0 * B * B * L * V)) / (2.0 * L)
    return TheoremConstants(B, L, d1, k1, c1_star, 1.0 / k1, d_smooth)
