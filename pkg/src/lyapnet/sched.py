"""Per-slot scheduling algorithms.

The greedy rule picks, in the sampled state, the action maximizing
-V f + u . (b - g) at the current backlog u; that action is exactly the
per-state dual minimizer at multiplier u, so the backlog process is a
randomized incremental subgradient iterate and hovers near the dual
maximizer U*_V.

The delay-reduced variants exploit that attraction: a placeholder level
W_cal_j just below U*_Vj is treated as permanently-present fake backlog.
The virtual backlog W runs the plain queue law and drives decisions, the
actual backlog is U = W minus the placeholder (up to one slot of traffic),
and arrivals are throttled only when W dips below the placeholder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dual import _state_argmin
from .model import NetworkSpec, queue_update, substream
from .scenarios import as_handle

__all__ = [
    "Decision",
    "FqlaState",
    "GeneralEstimate",
    "BisectionResult",
    "qla_decide",
    "fqla_placeholder_ideal",
    "fqla_start",
    "fqla_step",
    "fqla_general_estimate",
    "bisection_placeholder",
    "ALGORITHMS",
]

ALGORITHMS = ("qla", "fqla-ideal", "fqla-general", "fqla-bisect")


@dataclass
class Decision:
    """Chosen action with its cost, arrival and service vectors."""

    action: "int | float"
    cost: float
    arrivals: np.ndarray
    services: np.ndarray


@dataclass
class FqlaState:
    """Running state of a delay-reduced run: actual and virtual backlogs."""

    u: np.ndarray
    w: np.ndarray
    placeholders: np.ndarray
    dropped: np.ndarray
    admitted: np.ndarray


def qla_decide(spec: NetworkSpec, V: float, state: int, u) -> Decision:
    """Greedy decision in ``state`` at backlog u: argmax of u.(b-g) - V f.

    Ties break toward the lowest action index.  Scale invariance holds:
    (V, u) and (cV, cu) admit the same maximizer set for any c > 0.
    """
    u = np.asarray(u, dtype=float)
    k, cost, arr, svc = _state_argmin(spec, V, state, u)
    return Decision(k, cost, arr, svc)


def fqla_placeholder_ideal(u_star, V: float, regime: str = "polyhedral") -> np.ndarray:
    """Placeholder levels from a known optimal multiplier.

    Polyhedral duals concentrate the backlog within O(log V) of U*_V, so
    the placeholder sits log^2 V below it: W_cal = max[U*_V - log^2 V, 0].
    Smooth duals spread over O(sqrt(V)) and use
    W_cal = max[U*_V - log^2 V * sqrt(V), 0].  Logs are natural.
    """
    u_star = np.asarray(u_star, dtype=float)
    if not (V > 0):
        raise ValueError(f"V must be positive, got {V!r}")
    gap = math.log(V) ** 2
    if regime == "smooth":
        gap *= math.sqrt(V)
    elif regime != "polyhedral":
        raise ValueError(f"unknown regime {regime!r}")
    return np.maximum(u_star - gap, 0.0)


def fqla_start(placeholders) -> FqlaState:
    """Initial delay-reduced state: empty actual queues, W(0) = placeholders."""
    wl = np.asarray(placeholders, dtype=float)
    r = wl.shape[0]
    return FqlaState(np.zeros(r), wl.copy(), wl, np.zeros(r), np.zeros(r))


def fqla_step(st: FqlaState, decision: Decision) -> FqlaState:
    """Advance one slot.

    The virtual backlog follows the plain queue law with the full
    arrivals.  Actual arrivals are admitted in full while W_j stays at or
    above the placeholder; below it only the excess over the deficit is
    admitted and the rest is dropped.
    """
    a, mu = decision.arrivals, decision.services
    deficit = np.maximum(st.placeholders - st.w, 0.0)
    admit = np.maximum(a - deficit, 0.0)
    return FqlaState(
        u=queue_update(st.u, mu, admit),
        w=queue_update(st.w, mu, a),
        placeholders=st.placeholders,
        dropped=st.dropped + (a - admit),
        admitted=st.admitted + admit,
    )


@dataclass
class GeneralEstimate:
    """Placeholder estimate from virtual warmup runs."""

    placeholders: np.ndarray
    w_terminal_mean: np.ndarray
    T: int
    K: int


def fqla_general_estimate(scenario, V: float, T: "int | None" = None, K: int = 20,
                          rng: "np.random.Generator | int" = 0) -> GeneralEstimate:
    """Estimate placeholders without knowing U*_V.

    Runs K independent virtual-backlog trajectories under the greedy rule
    from W(0) = 0 for T slots, averages the terminal backlogs, and backs
    off by log^2 V.  T defaults to 50 V and must dominate the trajectory's
    settling time for the terminal average to sit near U*_V; K repetitions
    damp the O(log V) per-run fluctuation.  ``rng`` is a base seed or
    generator; repetition k uses its own substream.
    """
    from . import sim

    handle = as_handle(scenario)
    if T is None:
        T = int(50 * V)
    if T < 1 or K < 1:
        raise ValueError(f"need positive T and K, got T={T}, K={K}")
    if isinstance(rng, np.random.Generator):
        streams = rng.spawn(K)
    else:
        streams = [substream(int(rng), k) for k in range(K)]
    finals = np.empty((K, handle.spec.r))
    for k, gen in enumerate(streams):
        finals[k] = sim._virtual_trajectory_final(handle.spec, V, T, gen)
    w_mean = finals.mean(axis=0)
    placeholders = np.maximum(w_mean - math.log(V) ** 2, 0.0)
    return GeneralEstimate(placeholders, w_mean, T, K)


@dataclass
class BisectionResult:
    """Placeholder estimate from trajectory-trend bisection.

    ``levels`` are the located hover levels (pre-backoff); ``converged``
    flags queues whose trajectory fluctuated within the slope threshold;
    ``warning`` is set when the depth budget ran out first.
    """

    placeholders: np.ndarray
    levels: np.ndarray
    converged: np.ndarray
    warning: bool


def bisection_placeholder(scenario, V: float, T1: "int | None" = None,
                          guess: "float | None" = None,
                          rng: "np.random.Generator | int" = 0,
                          max_depth: int = 40) -> BisectionResult:
    """Estimate placeholders by bisecting on trajectory trend.

    The first level tried is ``guess`` (default: half the natural backlog
    scale r delta_max V); each round runs the greedy rule for T1 slots
    starting at the level vector and classifies every queue by the OLS
    slope of its trajectory: fluctuating iff |slope| < B / sqrt(T1), else
    increasing (level below the hover point) or decreasing (above).
    Brackets are bisected per queue, widening upward when the hover point
    sits above the initial bracket, until every queue fluctuates or the
    depth budget is exhausted (warning).  Returns max[level - log^2 V, 0]
    as placeholders.  This is a labeled heuristic: a noisy window can
    misclassify a trend, T1 defaults to the small sqrt(V) window, and for
    multi-queue scenarios the joint trajectory couples the queues, so
    per-queue classifications degrade; single-queue levels are reliable
    for windows long enough that drift clears the threshold.
    """
    from . import sim

    handle = as_handle(scenario)
    spec = handle.spec
    r = spec.r
    if T1 is None:
        T1 = max(int(math.ceil(math.sqrt(V))), 2)
    if guess is None:
        guess = 0.5 * spec.r * spec.delta_max * max(V, 1.0)
    if guess < 0:
        raise ValueError(f"guess must be nonnegative, got {guess!r}")
    thresh = spec.B / math.sqrt(T1)
    lo_b = np.zeros(r)
    hi_b = np.full(r, 2.0 * float(guess))
    level = 0.5 * (lo_b + hi_b)
    converged = np.zeros(r, dtype=bool)
    slots_axis = np.arange(T1, dtype=float)
    slots_axis -= slots_axis.mean()
    denom = float(slots_axis @ slots_axis)
    if isinstance(rng, np.random.Generator):
        base = rng
    else:
        base = None
        seed = int(rng)
    for depth in range(max_depth):
        gen = base.spawn(1)[0] if base is not None else substream(seed, depth)
        traj = sim._virtual_trajectory(spec, V, T1, gen, u0=level)
        slopes = slots_axis @ (traj[:T1] - traj[:T1].mean(axis=0)) / denom
        for j in range(r):
            if converged[j]:
                continue
            if abs(slopes[j]) < thresh:
                converged[j] = True
            elif slopes[j] > 0:
                lo_b[j] = level[j]
                if hi_b[j] - lo_b[j] < 1.0:  # attractor above the bracket: widen
                    hi_b[j] = 2.0 * hi_b[j] + 1.0
            else:
                hi_b[j] = level[j]
            level[j] = 0.5 * (lo_b[j] + hi_b[j])
        if converged.all():
            break
    placeholders = np.maximum(level - math.log(V) ** 2, 0.0)
    return BisectionResult(placeholders, level, converged, not bool(converged.all()))
