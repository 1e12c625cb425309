"""Time the compiled kernels against the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Runs the three hot loops on realistic inputs (an OU moment run at
T = 5 T0, a 256-member Gaussian batch, and a 1e5-point Ei evaluation),
checks both backends agree, and prints wall times and speed-ups.
"""

import argparse
import timeit

import numpy as np

from shuttlekit import _backend
from shuttlekit import oracle as orc
from shuttlekit.noise import OrnsteinUhlenbeck
from shuttlekit.trajectories import Protocol, figure_params, synthesize


def workloads():
    p = figure_params(5.0)
    tr = synthesize(Protocol.QUINTIC, p)
    model = OrnsteinUhlenbeck(1e-14, 0.05 / p.omega)
    dt = orc.default_step(p, model)
    drive = orc.make_drive(tr, p, dt)
    g0, g1 = orc._kernel_arrays(model, drive.h, drive.n_steps)
    state0 = np.array([0.0, 0.0, *orc.ground_state(p)])
    x = orc._member_noise(model, tr.duration, dt, 1, range(256), p.period)
    ei_args = -np.geomspace(1e-6, 700.0, 100_000)

    return {
        f"moments_rk4 ({drive.n_steps} steps)": lambda k: k.moments_rk4(
            0, state0, drive.h, drive.lag, drive.mis, drive.rdot, g0, g1, p.mass, p.omega, 0.0),
        f"gaussian_members (256 x {drive.n_steps})": lambda k: k.gaussian_members(
            0, state0, drive.h, drive.lag, drive.mis, x, p.mass, p.omega, 0.0),
        "expint_ei_array (1e5 points)": lambda k: k.expint_ei_array(ei_args),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _backend.compiled_available():
        raise SystemExit("compiled kernels are not built; run `pip install -e .` first")
    fast, slow = _backend.get_kernels("compiled"), _backend.get_kernels("python")

    print(f"{'kernel':40s} {'compiled [s]':>13s} {'python [s]':>11s} {'speed-up':>9s}")
    for name, fn in workloads().items():
        a, b = np.asarray(fn(fast)), np.asarray(fn(slow))
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=0)
        tc = min(timeit.repeat(lambda: fn(fast), number=1, repeat=args.repeat))
        tp = min(timeit.repeat(lambda: fn(slow), number=1, repeat=args.repeat))
        print(f"{name:40s} {tc:13.4f} {tp:11.4f} {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
