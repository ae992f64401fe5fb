"""Monte Carlo comparison of amplitude and phase noise on a blockade-regime pulse.

For each noise amplitude the script runs white and pink ensembles on both
channels and prints mean fidelity with its standard error.
"""
import argparse

from rydopt import DEFAULT_PARAMS, NoiseSpec, SweepConfig, sweep
from rydopt.units import femtoseconds


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--tau-fs", type=float, default=2000.0)
    parser.add_argument("--alphas", default="0.1,0.3,0.5")
    parser.add_argument("--n", type=int, default=50, help="realizations per point")
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()
    tau = femtoseconds(args.tau_fs)
    alphas = tuple(float(a) for a in args.alphas.split(","))
    print(f"{'channel':>10} {'kind':>6} {'alpha':>6} {'mean_F':>10} {'stderr':>9}")
    for channel in ("amplitude", "phase"):
        for kind in ("white", "pink"):
            cfg = SweepConfig(taus=(tau,), alphas=alphas, n_realizations=args.n,
                              noise=NoiseSpec(kind, channel, seed=1))
            for r in sweep(cfg, DEFAULT_PARAMS, threads=args.threads):
                print(f"{channel:>10} {kind:>6} {r.alpha:6.2f} {r.mean_fidelity:10.6f} "
                      f"{r.standard_error:9.2e}")


if __name__ == "__main__":
    main()
