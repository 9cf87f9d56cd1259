"""Time the compiled and pure-Python state-space kernels on the same inputs.

    python benchmarks/bench_kernels.py --n 300 --iters 2000
"""

import argparse
import time

import numpy as np

from coverimpact.bsts import available, build_model, ffbs, gibbs_sample, kalman_filter


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=300, help="series length")
    ap.add_argument("--iters", type=int, default=2000, help="Gibbs iterations")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--component", default="local_linear_trend", choices=("local_level", "local_linear_trend"))
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    y = np.cumsum(rng.normal(0, 0.1, args.n)) + rng.normal(0, 0.2, args.n)
    m = build_model(args.component, [0.04] * (2 if args.component == "local_level" else 3), y=y)

    cases = {
        "kalman_filter": lambda b: kalman_filter(m, y, backend=b).a_filt,
        "ffbs": lambda b: ffbs(m, y, seed=1, backend=b),
        f"gibbs x{args.iters}": lambda b: gibbs_sample(m, y, n_iter=args.iters, burn_in=args.iters // 4, seed=1,
                                                       backend=b).states,
    }
    backends = available()
    print(f"n={args.n} component={args.component} backends={','.join(backends)}")
    print(f"{'kernel':<16}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}{'max diff':>12}")
    for name, fn in cases.items():
        # the pure-Python Gibbs chain is slow; one repeat is enough there
        results = {}
        for b in backends:
            repeat = 1 if (b == "python" and name.startswith("gibbs")) else args.repeat
            results[b] = best_of(lambda: fn(b), repeat)
        row = f"{name:<16}" + "".join(f"{results[b][0]:>11.4f}s" for b in backends)
        if len(backends) == 2:
            speedup = results["python"][0] / results["compiled"][0]
            diff = float(np.max(np.abs(results["python"][1] - results["compiled"][1])))
            row += f"{speedup:>9.1f}x{diff:>12.2e}"
        print(row)


if __name__ == "__main__":
    main()
