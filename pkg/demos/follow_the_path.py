"""Classical path following on a tiny box LP.

- Minimize c . x over the box [-1, 1] x [-2, 2] with the log barrier
- Generate the eta ladder, then Newton-center at every rung (warm starts)
- Check the duality gap certificate theta/eta against the known LP optimum
"""
import numpy as np

from barrierlab import (box_barrier, duality_gap_check, eta_schedule,
                        follow_path)


def main():
    # Params (edit freely)
    c = np.array([1.0, -0.5])
    gamma = 50.0
    eps = 0.02       # target duality gap theta * eps
    kappa = 0.5      # step aggressiveness, in (0, 1]

    b = box_barrier([(-1.0, 1.0), (-2.0, 2.0)])
    lp_value = -np.abs(c) @ np.array([1.0, 2.0])  # corner (-1, 2)

    sched = eta_schedule(b, c, gamma, eps, kappa=kappa, mode="riemannian")
    print(f"schedule: {sched.steps} rungs, eta {sched.etas[0]:g} -> "
          f"{sched.etas[-1]:.1f} (target theta/eps = {b.theta / eps:g})")

    path = follow_path(b, c, sched, tol=1e-10)

    print(f"{'eta':>10} {'x1':>9} {'x2':>9} {'c.x - opt':>11} {'theta/eta':>10}")
    stride = max(1, len(path) // 12)
    for p in path[::stride] + [path[-1]]:
        gap = float(c @ p.x) - lp_value
        print(f"{p.eta:>10.3f} {p.x[0]:>9.5f} {p.x[1]:>9.5f} "
              f"{gap:>11.2e} {b.theta / p.eta:>10.2e}")

    checks = [duality_gap_check(b, c, p, lp_value) for p in path]
    print(f"duality certificate held on {sum(ch.passed for ch in checks)}"
          f"/{len(checks)} rungs")
    final = float(c @ path[-1].x) - lp_value
    print(f"final suboptimality {final:.2e} <= theta * eps = "
          f"{b.theta * eps:g}: {final <= b.theta * eps}")


if __name__ == "__main__":
    main()
