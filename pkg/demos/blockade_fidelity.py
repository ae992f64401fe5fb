"""Noise-free Bell-state fidelity of Gaussian pulses across the blockade crossover.

Prints the final fidelity for the numerical ladder model, the Magnus
approximation and the two-level limit as the pulse width grows from the
broadband to the narrow-band regime.
"""
import argparse

from rydopt import DEFAULT_PARAMS, final_fidelity, gaussian_pulse, symmetric_grid
from rydopt.ensemble import resolved_steps
from rydopt.units import femtoseconds


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--taus-fs", default="100,250,400,1000,2000,3000",
                        help="comma-separated Gaussian widths")
    args = parser.parse_args()
    p = DEFAULT_PARAMS
    print(f"{'tau_fs':>8} {'dw/Vdd':>8} {'3ln':>10} {'3la':>10} {'2la':>10}")
    for tau_fs in (float(t) for t in args.taus_fs.split(",")):
        tau = femtoseconds(tau_fs)
        f = gaussian_pulse(symmetric_grid(tau, resolved_steps(tau, p, 10_000)), tau, p)
        row = [final_fidelity(f, p, m) for m in ("3ln", "3la", "2la")]
        print(f"{tau_fs:8.0f} {1 / (tau * p.vdd):8.3f} " + " ".join(f"{F:10.6f}" for F in row))


if __name__ == "__main__":
    main()
