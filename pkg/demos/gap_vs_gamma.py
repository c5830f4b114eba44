"""Spectral gap of the interval-barrier operator as gamma grows.

- Build -1/2 Delta + gamma^2 f on [-1, 1] for a ladder of gammas
- Do the same for the Hessian-metric (Riemannian) operator
- Compare each measured gap to the harmonic reference and the proven bound
- Save the Euclidean sweep as an SVG log-log plot
"""
import numpy as np

from barrierlab import GridPolicy, gap_experiment, interval_barrier


def print_table(table):
    print(f"\n{table.instance} [{table.mode}]")
    print(f"{'gamma':>8} {'gap':>12} {'bound':>12} {'reference':>12}  ok")
    for r in table.rows:
        if r.error is not None:
            print(f"{r.gamma:>8g}  solver failure: {r.error}")
            continue
        flag = "yes" if r.bound_satisfied else "NO"
        print(f"{r.gamma:>8g} {r.gap:>12.4f} {r.bound:>12.4f} "
              f"{r.gap_ref:>12.4f}  {flag}")
    s = table.summary()
    print(f"bound holds from gamma = {s['gamma_threshold_observed']}, "
          f"min margin {s['min_margin']:.3f}")


def main():
    # Params (edit freely)
    gammas = [25.0, 50.0, 100.0, 200.0, 400.0]
    policy = GridPolicy(npts=600)

    b = interval_barrier()
    euclid = gap_experiment(b, None, 0.0, "euclidean", gammas, policy)
    print_table(euclid)
    # Euclidean reference: omega = gamma sqrt(A) with A = f''(0) = 2,
    # so the harmonic gap is gamma sqrt(2) and the bound is half of it.
    last = euclid.rows[-1]
    print(f"largest gamma: {last.gap:.2f} vs gamma sqrt(2) = "
          f"{last.gamma * np.sqrt(2):.2f} "
          f"({100 * abs(last.gap / last.gap_ref - 1):.2f}% off)")

    riem = gap_experiment(b, None, 0.0, "riemannian",
                          [50.0, 100.0, 200.0, 400.0], policy)
    print_table(riem)
    # Riemannian mode is metric-normalized, the reference gap is gamma itself.

    euclid.plot_svg("gap_vs_gamma.svg")
    print("\nwrote gap_vs_gamma.svg")


if __name__ == "__main__":
    main()
