"""Simulation engine and empirical attraction statistics.

A run draws an i.i.d. state sequence, applies the chosen per-slot
algorithm, and reports time averages, drop accounting, and the deviation
record used to verify attraction: for plain greedy runs the deviation of
the backlog U(t) from the reference point, for delay-reduced runs the
deviation of the virtual backlog W(t).

Runs are reproducible: the state stream for (seed, stream) comes from a
dedicated substream, and internal repetitions (placeholder warmups,
bisection windows) use deeper substreams, so the same config yields a
bit-identical report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dual import per_state_optimum
from .model import ContinuousActions, NetworkSpec, sample_states, substream, tables
from .scenarios import ScenarioHandle, as_handle
from .sched import (
    ALGORITHMS,
    bisection_placeholder,
    fqla_general_estimate,
    fqla_placeholder_ideal,
)

__all__ = [
    "RunConfig",
    "SimReport",
    "Trace",
    "DeviationCurve",
    "TailFit",
    "AbsorptionReport",
    "SimInvariantError",
    "TailFitError",
    "run",
    "deviation_statistics",
    "curve_from_deviations",
    "fit_tail",
    "absorption_check",
    "write_trace_csv",
    "write_report_csv",
    "REPORT_CSV_NOTE",
]

_TOL = 1e-9


class SimInvariantError(RuntimeError):
    """A per-slot invariant failed; carries the slot and a state dump."""

    def __init__(self, message: str, slot: int, state: int, u, w=None):
        self.slot = slot
        self.state = state
        self.u = np.asarray(u)
        self.w = None if w is None else np.asarray(w)
        dump = f" at slot {slot}, state {state}, U={self.u}"
        if w is not None:
            dump += f", W={self.w}"
        super().__init__(message + dump)


class TailFitError(ValueError):
    pass


@dataclass
class RunConfig:
    """One simulation run.

    ``burn_in`` defaults to min(100 V, slots // 10).  ``stream`` selects
    the substream for this run under the shared seed; sweeps give each
    cell its own stream.  ``placeholders`` overrides the placeholder rule
    for delay-reduced algorithms; ``deviation_reference`` overrides the
    registered U*_V.  ``check_invariants`` turns on the per-slot contract
    scans (nonnegativity, change bound, sandwich), which abort the run
    with the offending slot.
    """

    scenario: "ScenarioHandle | NetworkSpec"
    V: float
    algorithm: str = "qla"
    slots: int = 100_000
    seed: int = 0
    stream: int = 0
    burn_in: "int | None" = None
    record_trace: bool = False
    check_invariants: bool = False
    deviation_reference: "np.ndarray | None" = None
    placeholders: "np.ndarray | None" = None
    regime: "str | None" = None
    general_T: "int | None" = None
    general_K: int = 20
    bisect_T1: "int | None" = None
    bisect_guess: "float | None" = None
    initial_backlog: "np.ndarray | None" = None


@dataclass
class Trace:
    """Per-slot record; backlogs are slot-start values."""

    states: np.ndarray
    actions: np.ndarray
    costs: np.ndarray
    u: np.ndarray
    w: "np.ndarray | None"
    dropped: "np.ndarray | None"


@dataclass
class SimReport:
    """Summary of one run.

    Averages, the drop accounting (``drops`` / ``offered`` /
    ``drop_fraction``) and the deviation record all cover the post
    burn-in window, so ``drop_fraction`` is the long-run fraction of
    offered exogenous packets dropped rather than a startup artifact.
    ``final_*`` fields are end-of-run snapshots.
    """

    scenario: str
    algorithm: str
    V: float
    seed: int
    stream: int
    slots: int
    burn_in: int
    avg_cost: float
    avg_backlog: np.ndarray
    avg_backlog_total: float
    final_backlog: np.ndarray
    drops: np.ndarray
    drop_fraction: float
    offered: float
    avg_virtual_backlog: "np.ndarray | None" = None
    avg_virtual_backlog_total: "float | None" = None
    final_virtual: "np.ndarray | None" = None
    placeholders: "np.ndarray | None" = None
    sandwich_violations: "int | None" = None
    deviation_reference: "np.ndarray | None" = None
    deviations: "np.ndarray | None" = None
    per_coord_deviations: "np.ndarray | None" = None
    deviation_hist: "np.ndarray | None" = None
    per_coord_deviation_hist: "np.ndarray | None" = None
    trace: "Trace | None" = None


@dataclass
class DeviationCurve:
    """m -> empirical fraction of slots with deviation > D + m."""

    D: float
    m: np.ndarray
    p: np.ndarray
    n_samples: int


@dataclass
class TailFit:
    """Least-squares exponential fit p ~ c_hat * exp(-beta_hat m)."""

    c_hat: float
    beta_hat: float
    r2: float
    m_lo: int
    m_hi: int
    n_bins: int


@dataclass
class AbsorptionReport:
    """Single-queue absorbing-interval verdict.

    ``interval`` is [min_i U*_si - B, max_i U*_si + B] from the per-state
    optima (+inf upper end when some state never pushes the backlog down).
    ``ok`` means the recorded path entered the interval and never left.
    """

    interval: tuple[float, float]
    per_state_optima: list[float]
    entered_at: "int | None"
    violations: int
    ok: bool


# -- core loops --------------------------------------------------------------
#
# The loops keep per-slot work to a handful of vector ops; scores and
# updates use the same expressions as the one-shot API so decisions and
# backlogs agree bit for bit with qla_decide / rism_step / fqla_step.


def _loop_qla_finite(spec, V, idx, u0, burn):
    tab = tables(spec)
    slots = len(idx)
    r = spec.r
    cost_t, arr_t, svc_t, sma_t = tab.cost, tab.arr, tab.svc, tab.sma
    vcost = [V * c for c in cost_t]
    U = np.empty((slots + 1, r))
    U[0] = u0
    costs = np.empty(slots)
    acts = np.empty(slots, dtype=np.int64)
    arr_sum = np.zeros(r)
    u = np.array(u0, dtype=float)
    for t, i in enumerate(idx.tolist()):
        sc = sma_t[i] @ u
        sc -= vcost[i]
        k = int(sc.argmax())
        acts[t] = k
        costs[t] = cost_t[i][k]
        a = arr_t[i][k]
        u = u - svc_t[i][k]
        np.maximum(u, 0.0, out=u)
        u += a
        if t >= burn:
            arr_sum += a
        U[t + 1] = u
    return U, costs, acts, arr_sum


def _loop_qla_cont(spec, V, idx, u0, burn):
    fams = [st.actions for st in spec.states]
    slots = len(idx)
    r = spec.r
    U = np.empty((slots + 1, r))
    U[0] = u0
    costs = np.empty(slots)
    acts = np.empty(slots)
    arr_sum = np.zeros(r)
    u = np.array(u0, dtype=float)
    for t, i in enumerate(idx.tolist()):
        fam = fams[i]
        x = float(fam.dual_argmin(V, u))
        acts[t] = x
        costs[t] = fam.cost(x)
        a = fam.arrivals(x)
        u = u - fam.services(x)
        np.maximum(u, 0.0, out=u)
        u += a
        if t >= burn:
            arr_sum += a
        U[t + 1] = u
    return U, costs, acts, arr_sum


def _loop_fqla_finite(spec, V, idx, wl, burn):
    tab = tables(spec)
    slots = len(idx)
    r = spec.r
    cost_t, arr_t, svc_t, sma_t = tab.cost, tab.arr, tab.svc, tab.sma
    vcost = [V * c for c in cost_t]
    U = np.empty((slots + 1, r))
    W = np.empty((slots + 1, r))
    U[0] = 0.0
    W[0] = wl
    costs = np.empty(slots)
    acts = np.empty(slots, dtype=np.int64)
    drops_t = np.empty(slots)
    arr_sum = np.zeros(r)
    drop_sum = np.zeros(r)
    u = np.zeros(r)
    w = np.array(wl, dtype=float)
    for t, i in enumerate(idx.tolist()):
        sc = sma_t[i] @ w
        sc -= vcost[i]
        k = int(sc.argmax())
        acts[t] = k
        costs[t] = cost_t[i][k]
        a = arr_t[i][k]
        mu = svc_t[i][k]
        deficit = np.maximum(wl - w, 0.0)
        admit = np.maximum(a - deficit, 0.0)
        dropped = a - admit
        u = u - mu
        np.maximum(u, 0.0, out=u)
        u += admit
        w = w - mu
        np.maximum(w, 0.0, out=w)
        w += a
        if t >= burn:
            arr_sum += a
            drop_sum += dropped
        drops_t[t] = dropped.sum()
        U[t + 1] = u
        W[t + 1] = w
    return U, W, costs, acts, drops_t, arr_sum, drop_sum


def _loop_fqla_cont(spec, V, idx, wl, burn):
    fams = [st.actions for st in spec.states]
    slots = len(idx)
    r = spec.r
    U = np.empty((slots + 1, r))
    W = np.empty((slots + 1, r))
    U[0] = 0.0
    W[0] = wl
    costs = np.empty(slots)
    acts = np.empty(slots)
    drops_t = np.empty(slots)
    arr_sum = np.zeros(r)
    drop_sum = np.zeros(r)
    u = np.zeros(r)
    w = np.array(wl, dtype=float)
    for t, i in enumerate(idx.tolist()):
        fam = fams[i]
        x = float(fam.dual_argmin(V, w))
        acts[t] = x
        costs[t] = fam.cost(x)
        a = fam.arrivals(x)
        mu = fam.services(x)
        deficit = np.maximum(wl - w, 0.0)
        admit = np.maximum(a - deficit, 0.0)
        dropped = a - admit
        u = u - mu
        np.maximum(u, 0.0, out=u)
        u += admit
        w = w - mu
        np.maximum(w, 0.0, out=w)
        w += a
        if t >= burn:
            arr_sum += a
            drop_sum += dropped
        drops_t[t] = dropped.sum()
        U[t + 1] = u
        W[t + 1] = w
    return U, W, costs, acts, drops_t, arr_sum, drop_sum


def _engine_kind(spec: NetworkSpec) -> str:
    finite = [isinstance(st.actions, list) for st in spec.states]
    if all(finite):
        return "finite"
    if not any(finite):
        return "continuous"
    raise ValueError("scenarios mixing finite and continuous states are not supported")


def _virtual_trajectory(spec, V, T, rng, u0=None):
    """Greedy backlog path of length T+1 (used by placeholder estimators)."""
    idx = sample_states(spec, rng, T)
    start = np.zeros(spec.r) if u0 is None else np.asarray(u0, dtype=float)
    if _engine_kind(spec) == "finite":
        U, _, _, _ = _loop_qla_finite(spec, V, idx, start, 0)
    else:
        U, _, _, _ = _loop_qla_cont(spec, V, idx, start, 0)
    return U


def _virtual_trajectory_final(spec, V, T, rng):
    return _virtual_trajectory(spec, V, T, rng)[-1]


# -- run ---------------------------------------------------------------------


def _resolve_u_star(handle: ScenarioHandle, config: RunConfig):
    if config.deviation_reference is not None:
        return np.asarray(config.deviation_reference, dtype=float)
    if handle.u_star is not None:
        return np.asarray(handle.u_star(config.V), dtype=float)
    return None


def _resolve_placeholders(handle: ScenarioHandle, config: RunConfig) -> np.ndarray:
    if config.placeholders is not None:
        wl = np.asarray(config.placeholders, dtype=float)
        if wl.shape != (handle.spec.r,) or (wl < 0).any():
            raise ValueError(f"placeholders must be {handle.spec.r} nonnegative levels")
        return wl
    V = config.V
    if config.algorithm == "fqla-ideal":
        u_star = _resolve_u_star(handle, config)
        if u_star is None:
            import warnings

            from .dual import find_optimal_multiplier

            warnings.warn(f"no U*_V available for {handle.name!r}; "
                          "falling back to numeric multiplier search")
            u_star = find_optimal_multiplier(handle, V).u_star
        regime = config.regime or handle.geometry or "polyhedral"
        return fqla_placeholder_ideal(u_star, V, regime)
    if config.algorithm == "fqla-general":
        gen = np.random.default_rng(
            np.random.SeedSequence(config.seed, spawn_key=(config.stream, 1)))
        est = fqla_general_estimate(handle, V, T=config.general_T, K=config.general_K,
                                    rng=gen)
        return est.placeholders
    if config.algorithm == "fqla-bisect":
        gen = np.random.default_rng(
            np.random.SeedSequence(config.seed, spawn_key=(config.stream, 2)))
        res = bisection_placeholder(handle, V, T1=config.bisect_T1, guess=config.bisect_guess,
                                    rng=gen)
        return res.placeholders
    raise ValueError(f"unknown algorithm {config.algorithm!r}")


def run(config: RunConfig) -> SimReport:
    """Simulate one run and report averages plus the deviation record."""
    handle = as_handle(config.scenario)
    spec = handle.spec
    if config.algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {config.algorithm!r}; choose from {ALGORITHMS}")
    if config.slots < 1:
        raise ValueError(f"slots must be positive, got {config.slots}")
    if not (config.V > 0):
        raise ValueError(f"V must be positive, got {config.V!r}")
    slots = int(config.slots)
    burn_in = config.burn_in
    if burn_in is None:
        burn_in = int(min(100 * config.V, slots // 10))
    if not (0 <= burn_in < slots):
        raise ValueError(f"burn_in must lie in [0, slots), got {burn_in}")

    kind = _engine_kind(spec)
    rng = substream(config.seed, config.stream)
    idx = sample_states(spec, rng, slots)

    is_fqla = config.algorithm != "qla"
    u_star = _resolve_u_star(handle, config)
    W = wl = drops_t = arr_sum = None
    drop_sum = np.zeros(spec.r)
    if is_fqla:
        wl = _resolve_placeholders(handle, config)
        loop = _loop_fqla_finite if kind == "finite" else _loop_fqla_cont
        U, W, costs, acts, drops_t, arr_sum, drop_sum = loop(
            spec, config.V, idx, wl, burn_in)
    else:
        if config.initial_backlog is not None:
            u0 = np.asarray(config.initial_backlog, dtype=float)
        else:
            u0 = np.zeros(spec.r)
        loop = _loop_qla_finite if kind == "finite" else _loop_qla_cont
        U, costs, acts, arr_sum = loop(spec, config.V, idx, u0, burn_in)

    # Drop accounting matches the averages: both sides of the fraction
    # count post burn-in slots only, so the startup climb from W(0) to
    # the steady band does not leak into a long-run statistic.
    exo = handle.exogenous if handle.exogenous is not None else tuple(range(spec.r))
    offered = float(arr_sum[list(exo)].sum())
    drops_total = float(drop_sum.sum())
    drop_fraction = drops_total / offered if offered > 0 else 0.0

    sandwich_violations = None
    if is_fqla:
        floor = np.maximum(W - wl, 0.0)
        bad = (U < floor - _TOL) | (U > floor + spec.delta_max + _TOL)
        sandwich_violations = int(bad.sum())

    if config.check_invariants:
        _invariant_scan(spec, idx, U, W, wl, sandwich_violations)

    win = slice(burn_in, slots)
    avg_backlog = U[win].mean(axis=0)
    report = SimReport(
        scenario=handle.name,
        algorithm=config.algorithm,
        V=config.V,
        seed=config.seed,
        stream=config.stream,
        slots=slots,
        burn_in=burn_in,
        avg_cost=float(costs[win].mean()),
        avg_backlog=avg_backlog,
        avg_backlog_total=float(avg_backlog.sum()),
        final_backlog=U[slots].copy(),
        drops=drop_sum,
        drop_fraction=drop_fraction,
        offered=offered,
    )
    if is_fqla:
        avg_w = W[win].mean(axis=0)
        report.avg_virtual_backlog = avg_w
        report.avg_virtual_backlog_total = float(avg_w.sum())
        report.final_virtual = W[slots].copy()
        report.placeholders = wl
        report.sandwich_violations = sandwich_violations

    if u_star is not None:
        ref = W if is_fqla else U  # attraction acts on the virtual backlog
        diff = ref[win] - u_star
        dev = np.linalg.norm(diff, axis=1)
        pcd = np.abs(diff).max(axis=1)
        report.deviation_reference = u_star
        report.deviations = dev
        report.per_coord_deviations = pcd
        report.deviation_hist = np.bincount(dev.astype(np.int64))
        report.per_coord_deviation_hist = np.bincount(pcd.astype(np.int64))

    if config.record_trace:
        report.trace = Trace(
            states=idx,
            actions=acts,
            costs=costs,
            u=U[:slots].copy(),
            w=W[:slots].copy() if is_fqla else None,
            dropped=drops_t,
        )
    return report


def _invariant_scan(spec, idx, U, W, wl, sandwich_violations):
    """Raise on the first slot breaking a per-slot contract."""
    B = spec.B

    def first_bad(mask):
        return int(np.flatnonzero(mask)[0])

    for name, X in (("backlog", U), ("virtual backlog", W)):
        if X is None:
            continue
        neg = (X < -_TOL).any(axis=1)
        if neg.any():
            t = first_bad(neg)  # row t was produced by slot t - 1
            slot = max(t - 1, 0)
            raise SimInvariantError(f"{name} went negative", slot, int(idx[slot]),
                                    U[t], None if W is None else W[t])
        step = np.linalg.norm(np.diff(X, axis=0), axis=1)
        jump = step > B + _TOL
        if jump.any():
            t = first_bad(jump)
            raise SimInvariantError(
                f"{name} moved {step[t]:.6g} > B={B:.6g} in one slot", t, int(idx[t]),
                U[t], None if W is None else W[t])
    if sandwich_violations:
        floor = np.maximum(W - wl, 0.0)
        bad = ((U < floor - _TOL) | (U > floor + spec.delta_max + _TOL)).any(axis=1)
        t = first_bad(bad)
        slot = max(t - 1, 0)
        raise SimInvariantError("sandwich bound violated", slot, int(idx[slot]),
                                U[t], W[t])


# -- deviation statistics ----------------------------------------------------


def curve_from_deviations(dev: np.ndarray, D: float) -> DeviationCurve:
    """Exact tail curve of a deviation sample, integer m until p hits 0."""
    dev = np.asarray(dev, dtype=float)
    if dev.size == 0:
        raise ValueError("empty deviation sample")
    if D < 0:
        raise ValueError(f"D must be nonnegative, got {D!r}")
    srt = np.sort(dev)
    n = srt.size
    m_max = int(max(0.0, math.ceil(float(srt[-1]) - D)))
    ms = np.arange(m_max + 1)
    p = 1.0 - np.searchsorted(srt, D + ms, side="right") / n
    return DeviationCurve(float(D), ms, p, n)


def deviation_statistics(report: SimReport, D: float, per_coord: bool = False) -> DeviationCurve:
    """Empirical tail curve m -> fraction of slots with deviation > D + m.

    Exact over the post-burn-in window, for integer m from 0 until the
    curve reaches zero.  ``per_coord`` switches to the max per-coordinate
    deviation.
    """
    dev = report.per_coord_deviations if per_coord else report.deviations
    if dev is None:
        raise ValueError("run recorded no deviations (no reference point available)")
    return curve_from_deviations(dev, D)


def fit_tail(curve: DeviationCurve, min_samples: int = 30) -> TailFit:
    """Fit ln p = ln c - beta m over bins with enough samples.

    Only bins holding at least ``min_samples`` tail samples qualify; fewer
    than 4 qualifying bins raises :class:`TailFitError` (insufficient tail
    mass).
    """
    counts = curve.p * curve.n_samples
    mask = (curve.p > 0) & (counts >= min_samples)
    if int(mask.sum()) < 4:
        raise TailFitError("insufficient tail mass: need at least 4 bins with "
                           f">= {min_samples} samples, have {int(mask.sum())}")
    x = curve.m[mask].astype(float)
    y = np.log(curve.p[mask])
    slope, intercept = np.polyfit(x, y, 1)
    fitted = intercept + slope * x
    ss_res = float(((y - fitted) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return TailFit(math.exp(intercept), -float(slope), r2,
                   int(x[0]), int(x[-1]), int(mask.sum()))


def absorption_check(scenario, V: float, report: SimReport) -> AbsorptionReport:
    """Check the single-queue absorbing interval on a recorded path.

    The interval is [min_i U*_si - B, max_i U*_si + B] over the per-state
    dual optima; the verdict is whether the path entered it and stayed.
    """
    handle = as_handle(scenario)
    spec = handle.spec
    if spec.r != 1:
        raise ValueError("absorbing intervals are defined for single-queue scenarios")
    if report.trace is None:
        raise ValueError("absorption check needs a recorded trace (record_trace=True)")
    optima = [per_state_optimum(spec, V, i) for i in range(spec.n_states)]
    lo = min(optima) - spec.B
    hi = max(optima) + spec.B
    path = np.concatenate([report.trace.u[:, 0], [report.final_backlog[0]]])
    inside = (path >= lo - _TOL) & (path <= hi + _TOL)
    entered = np.flatnonzero(inside)
    if entered.size == 0:
        return AbsorptionReport((lo, hi), optima, None, 0, False)
    t0 = int(entered[0])
    violations = int((~inside[t0:]).sum())
    return AbsorptionReport((lo, hi), optima, t0, violations, violations == 0)


# -- CSV output --------------------------------------------------------------

REPORT_CSV_NOTE = "all floats formatted with 12 significant digits"


def _fmt(x) -> str:
    return "%.12g" % float(x)


def write_trace_csv(report: SimReport, path: str) -> None:
    """Write the per-slot trace: slot,state,cost,U_*,W_*,dropped_this_slot.

    W columns are left empty for plain greedy runs.
    """
    tr = report.trace
    if tr is None:
        raise ValueError("report holds no trace (record_trace=True required)")
    r = tr.u.shape[1]
    cols = (["slot", "state", "cost"] + [f"U_{j + 1}" for j in range(r)]
            + [f"W_{j + 1}" for j in range(r)] + ["dropped_this_slot"])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for t in range(tr.u.shape[0]):
            row = [str(t), str(int(tr.states[t])), _fmt(tr.costs[t])]
            row += [_fmt(v) for v in tr.u[t]]
            if tr.w is not None:
                row += [_fmt(v) for v in tr.w[t]]
            else:
                row += [""] * r
            row.append(_fmt(tr.dropped[t]) if tr.dropped is not None else _fmt(0.0))
            fh.write(",".join(row) + "\n")


def report_csv_header(r: int) -> list[str]:
    return (["scenario", "algorithm", "V", "seed", "stream", "slots", "burn_in",
             "avg_cost", "avg_backlog_total"]
            + [f"avg_backlog_{j + 1}" for j in range(r)]
            + ["avg_virtual_total"] + [f"avg_virtual_{j + 1}" for j in range(r)]
            + ["drop_fraction", "drops", "offered", "sandwich_violations"])


def report_csv_row(report: SimReport) -> list[str]:
    r = report.avg_backlog.shape[0]
    row = [report.scenario, report.algorithm, _fmt(report.V), str(report.seed),
           str(report.stream), str(report.slots), str(report.burn_in),
           _fmt(report.avg_cost), _fmt(report.avg_backlog_total)]
    row += [_fmt(v) for v in report.avg_backlog]
    if report.avg_virtual_backlog is not None:
        row.append(_fmt(report.avg_virtual_backlog_total))
        row += [_fmt(v) for v in report.avg_virtual_backlog]
    else:
        row += [""] * (r + 1)
    row += [_fmt(report.drop_fraction), _fmt(float(report.drops.sum())),
            _fmt(report.offered),
            "" if report.sandwich_violations is None else str(report.sandwich_violations)]
    return row


def write_report_csv(reports: Sequence[SimReport], path: str) -> None:
    """Write one row of scalars per run."""
    if not reports:
        raise ValueError("no reports to write")
    r = reports[0].avg_backlog.shape[0]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(report_csv_header(r)) + "\n")
        for rep in reports:
            fh.write(",".join(report_csv_row(rep)) + "\n")
