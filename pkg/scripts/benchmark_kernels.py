#!/usr/bin/env python3
"""Benchmark the numba-jitted kernels against the pure-numpy fallbacks.

Covers the convolution forward/backward kernels and the circuit integration
loop. The numba path needs a warmup call to trigger compilation; that time is
reported separately and excluded from the steady-state numbers.

Usage:
    python scripts/benchmark_kernels.py [--repeats 5] [--batch 16]
"""

import argparse
import time

import numpy as np

from phasornet import _kernels as K
from phasornet.circuit import CircuitParams, build_circuit, run
from phasornet.phasor_net import LayerSpec, PhasorNetwork


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_conv(args):
    rng = np.random.default_rng(0)
    x = (rng.normal(size=(args.batch, 6, 28, 28))
         + 1j * rng.normal(size=(args.batch, 6, 28, 28))).astype(np.complex64)
    k = (rng.normal(size=(16, 6, 3, 3))
         + 1j * rng.normal(size=(16, 6, 3, 3))).astype(np.complex64)
    b = np.zeros(16, dtype=np.complex64)
    delta = (rng.normal(size=(args.batch, 16, 26, 26))
             + 1j * rng.normal(size=(args.batch, 16, 26, 26))).astype(np.complex64)

    cases = [
        ("conv forward", lambda: K.conv2d_forward_numpy(x, k, b), None),
        ("conv grad kernels", lambda: K.conv2d_backward_kernels_numpy(x, delta), None),
        ("conv grad input", lambda: K.conv2d_backward_input_numpy(delta, k), None),
    ]
    if K.NUMBA_AVAILABLE:
        cases[0] = (cases[0][0], cases[0][1], lambda: K.conv2d_forward_numba(x, k, b))
        cases[1] = (cases[1][0], cases[1][1],
                    lambda: K.conv2d_backward_kernels_numba(x, delta))
        cases[2] = (cases[2][0], cases[2][1],
                    lambda: K.conv2d_backward_input_numba(delta, k))

    print(f"convolution, batch {args.batch}, 6ch 28x28 -> 16ch, complex64")
    for name, np_fn, nb_fn in cases:
        t_np = timeit(np_fn, args.repeats)
        line = f"  {name:<20s} numpy {t_np * 1e3:8.2f} ms"
        if nb_fn is not None:
            t_warm = timeit(nb_fn, 1)  # includes JIT compilation
            t_nb = timeit(nb_fn, args.repeats)
            line += (f"   numba {t_nb * 1e3:8.2f} ms"
                     f"   speedup {t_np / t_nb:5.2f}x"
                     f"   (compile+first {t_warm * 1e3:.0f} ms)")
        print(line)


def bench_circuit(args):
    specs = [
        LayerSpec("dense", fan_in=64, fan_out=128),
        LayerSpec("dense", fan_in=128, fan_out=128),
        LayerSpec("dense", fan_in=128, fan_out=10),
    ]
    net = PhasorNetwork.create((64,), specs, seed=0)
    circuit = build_circuit(net, CircuitParams())
    rng = np.random.default_rng(1)
    image = rng.uniform(size=64).astype(np.float32)
    stimuli = [(image, 15)]

    print(f"\ncircuit integration, {circuit.n_synapses} synapses, "
          f"{circuit.n_neurons} neurons, 15 cycles at dt=0.025 ms")
    t_np = timeit(lambda: run(circuit, stimuli, v_threshold=0.01,
                              use_numba=False), args.repeats)
    print(f"  euler loop           numpy {t_np * 1e3:8.2f} ms")
    if K.NUMBA_AVAILABLE:
        nb = lambda: run(circuit, stimuli, v_threshold=0.01, use_numba=True)
        t_warm = timeit(nb, 1)
        t_nb = timeit(nb, args.repeats)
        print(f"  euler loop           numba {t_nb * 1e3:8.2f} ms"
              f"   speedup {t_np / t_nb:5.2f}x"
              f"   (compile+first {t_warm * 1e3:.0f} ms)")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats; the best run is reported")
    parser.add_argument("--batch", type=int, default=16,
                        help="batch size for the convolution benchmark")
    args = parser.parse_args()
    if not K.NUMBA_AVAILABLE:
        print("numba unavailable or disabled; showing numpy path only\n")
    bench_conv(args)
    bench_circuit(args)


if __name__ == "__main__":
    main()
