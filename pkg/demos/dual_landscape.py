#!/usr/bin/env python3
"""Walk the dual landscape behind the greedy rule.

Evaluates q(U) along rays through the maximizer to show the piecewise
linear (kinked) shape, compares the closed-form maximizer with the
numeric search, checks that the maximizer scales linearly in V, and then
watches fixed-step subgradient ascent fall into the ball the attraction
constants predict and stay there.
"""

import argparse
import math

import numpy as np

from lyapnet import (
    by_name,
    check_scaling,
    estimate_geometry,
    evaluate_dual,
    find_optimal_multiplier,
    osm_step,
    theorem2_constants,
)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description="dual function landscape tour")
    ap.add_argument("--V", type=float, default=100.0)
    ap.add_argument("--ascent-steps", type=int, default=2200)
    args = ap.parse_args(argv)
    V = args.V

    two = by_name("two-queue")
    u_star = np.asarray(two.u_star(V), dtype=float)
    print(f"scenario {two.name}: closed-form maximizer U*_V = {u_star}")
    res = find_optimal_multiplier(two, V, method="numeric")
    print(f"numeric search lands on   {res.u_star}  "
          f"({res.iterations} iterations, probe_ok={res.probe_ok})")
    print()

    # q along a coordinate ray through the maximizer: linear pieces meeting
    # at a kink, the signature of the polyhedral case
    print("q(U* + t e1) - q(U*), two-queue:")
    q_star = evaluate_dual(two.spec, V, u_star).value
    for t in (-2 * V, -V, -V / 2, 0.0, V / 2, V, 2 * V):
        u = u_star + np.array([t, 0.0])
        if (u < 0).any():
            continue
        q = evaluate_dual(two.spec, V, u).value
        bar = "#" * max(0, int(40 + (q - q_star) / V))
        print(f"  t={t:8.1f}   dq={q - q_star:10.2f}   {bar}")
    print()

    five = by_name("five-queue-chain")
    scaling = check_scaling(five, [50.0, 100.0])
    print(f"five-queue maximizer scaling U*_V = V U*_1: residuals "
          f"{ {v: f'{r:.1e}' for v, r in scaling.residuals.items()} } "
          f"(ok={scaling.ok})")

    geo = estimate_geometry(five)
    consts = theorem2_constants(five.spec.B, geo.L)
    ball = consts.d1 + five.spec.B
    print(f"estimated geometry: {geo.kind}, modulus L={geo.L:.4f}")
    print(f"attraction constants: D1={consts.d1:.1f}  K1={consts.k1:.1f}  "
          f"beta*={consts.beta_star:.4f}  ball radius D1+B={ball:.1f}")
    print()

    # fixed-step ascent from a far corner of the orthant
    u_star5 = np.asarray(five.u_star(V), dtype=float)
    u = np.zeros(5)
    entered = None
    print(f"fixed-step ascent on the five-queue dual from the origin (V={V:g}):")
    for it in range(args.ascent_steps):
        u = osm_step(five.spec, V, u)
        dist = float(np.linalg.norm(u - u_star5))
        if it % (args.ascent_steps // 8) == 0:
            print(f"  step {it:5d}   ||U - U*|| = {dist:9.2f}")
        if entered is None and dist <= ball:
            entered = it
    dist = float(np.linalg.norm(u - u_star5))
    print(f"  step {args.ascent_steps:5d}   ||U - U*|| = {dist:9.2f}")
    if entered is None:
        print("  never entered the predicted ball (raise --ascent-steps)")
        return 1
    print(f"  entered the predicted ball at step {entered} and stayed inside")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
