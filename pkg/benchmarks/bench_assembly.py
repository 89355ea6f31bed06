"""Compare the compiled and numpy contraction backends on Exact tensor assembly.

Usage: python3 benchmarks/bench_assembly.py [--qubits 3 4] [--threads 1 4] [--repeat 3]
"""
import argparse
import time

import numpy as np

from collchain import kernels
from collchain.chain import ChainSpec, spectrum_for
from collchain.collision import assemble_tensor
from collchain.quadrature import QuadratureConfig


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--qubits", type=int, nargs="+", default=[3, 4])
    parser.add_argument("--threads", type=int, nargs="+", default=[1, 4])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    quad = QuadratureConfig(check_convergence=False)
    print(f"backends available: {', '.join(kernels.available_backends())}")
    print(f"{'N':>2} {'backend':>9} {'threads':>7} {'seconds':>9} {'speedup':>8} {'max|diff|':>10}")
    for n in args.qubits:
        spec = ChainSpec(n_qubits=n)
        sp = spectrum_for(spec)
        ref = None
        base = None
        for backend in ("python", "compiled"):
            if backend not in kernels.available_backends():
                continue
            for threads in args.threads:
                secs, T = best_of(lambda: assemble_tensor(spec, sp, "Exact", quad, n_threads=threads, backend=backend), args.repeat)
                if ref is None:
                    ref, base = T.entries, secs
                diff = float(np.abs(T.entries - ref).max())
                print(f"{n:>2} {backend:>9} {threads:>7} {secs:>9.3f} {base / secs:>8.1f} {diff:>10.2e}")


if __name__ == "__main__":
    main()
