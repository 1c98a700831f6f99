"""Compare the numba kernels with their numpy fallbacks.

    python3 benchmarks/bench_backends.py [--size 512] [--repeat 5]

Each kernel runs on both backends in-process (results are checked for
agreement), then an end-to-end fatness certificate is timed in two
subprocesses, one with FRACBOUND_NO_NUMBA=1.
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from fracbound import _jit, _kernels

END_TO_END = """
import time
from fracbound import fatness, pipeline
dom = pipeline.build_family(pipeline.FamilySpec("random_perforated", 1/{q}, {{"seed": 3, "count": 40, "side": 8.0}}))
t = time.perf_counter()
cert = fatness.fatness_certificate(dom, (4.0, 4.0))
print(time.perf_counter() - t, cert.holds())
"""


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(n: int, rng):
    obstacle = rng.random((n, n)) < 0.02
    fg = rng.random((n, n)) < 0.55
    u = rng.standard_normal((n // 4, n // 4))
    member = rng.random(u.shape) < 0.8
    w = rng.random((17, 17))
    return {
        "edt_squared": lambda: _kernels.edt_squared(obstacle),
        "label(8)": lambda: _kernels.label(fg, 8),
        "pair_energy": lambda: _kernels.pair_energy(u, member, w),
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=512)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--q", type=int, default=32, help="1/h for the end-to-end run")
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    kernels = cases(args.size, rng)

    print(f"{'kernel':<14}{'numpy [s]':>12}{'numba [s]':>12}{'speed-up':>10}{'jit [s]':>10}  agree")
    for name, fn in kernels.items():
        _jit.set_backend("numpy")
        ref = fn()
        t_np = best_of(fn, args.repeat)
        if not _jit.HAS_NUMBA:
            print(f"{name:<14}{t_np:>12.4f}{'n/a':>12}")
            continue
        _jit.set_backend("numba")
        t = time.perf_counter()
        out = fn()
        t_jit = time.perf_counter() - t
        t_nb = best_of(fn, args.repeat)
        agree = np.array_equal(out, ref) if name != "pair_energy" else abs(out - ref) <= 1e-9 * abs(ref)
        print(f"{name:<14}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>10.1f}{t_jit:>10.3f}  {agree}")
    _jit.set_backend("numba" if _jit.HAS_NUMBA else "numpy")

    print("\nend-to-end fatness certificate (subprocess, includes nothing but the certificate)")
    for flag in ("0", "1"):
        env = dict(os.environ, FRACBOUND_NO_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", END_TO_END.format(q=args.q)], env=env,
                             capture_output=True, text=True, check=True)
        t, ok = res.stdout.split()
        print(f"  FRACBOUND_NO_NUMBA={flag}: {float(t):.3f} s, certificate holds: {ok}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
