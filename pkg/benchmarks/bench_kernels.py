"""Compiled core vs numpy fallback on the hot kernels and on end-to-end solves.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints one row per case: median seconds for each backend and the speedup.
"""

import argparse
import statistics
import time

import numpy as np

from pberg import _pycore
from pberg.basis import TruncatedBasis
from pberg.domains import build_quadrature, disk
from pberg.extremal import ZERO, p_extremal

try:
    from pberg import _core
except ImportError:
    _core = None


def _median_time(fn, repeat):
    out = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return statistics.median(out)


def _swap(module):
    """Point the dispatcher (and modules that imported it) at ``module``."""
    from pberg import _kernels
    for name in ("neumaier_sum", "ring_accumulate", "monomial_design"):
        setattr(_kernels, name, getattr(module, name))


def cases():
    rng = np.random.default_rng(0)
    rule = build_quadrature(disk(1.0), 272)
    nr, m = rule.rings.radii.shape[0], rule.rings.n_angles
    k = np.arange(257)
    powers = np.ascontiguousarray(rule.rings.radii[:, None] ** k[None, :])
    spec = np.ascontiguousarray(np.fft.fft(rng.random((nr, m)), axis=1).astype(complex))
    pts = np.ascontiguousarray(rng.standard_normal((4000, 2)) + 1j * rng.standard_normal((4000, 2)))
    exps = np.ascontiguousarray(TruncatedBasis(2, 12).indices.astype(np.int_))
    x = rng.standard_normal(200_000)
    basis = TruncatedBasis(1, 128)
    rule_s = build_quadrature(disk(1.0), 144)
    return [
        (f"ring_accumulate gram ({nr} rings, K=257)", lambda mod: mod.ring_accumulate(powers, spec, False)),
        ("monomial_design (4000 pts, n=2, d=12)", lambda mod: mod.monomial_design(pts, exps)),
        ("neumaier_sum (2e5 terms)", lambda mod: mod.neumaier_sum(x)),
        ("p_extremal p=1, d=128, z=0.9", lambda mod: (_swap(mod), p_extremal(basis, rule_s, ZERO, 1.0, 0.9))),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _core is None:
        print("compiled core not built; nothing to compare")
        return 1
    print(f"{'case':48s} {'cython [s]':>11s} {'numpy [s]':>11s} {'speedup':>8s}")
    for name, fn in cases():
        tc = _median_time(lambda: fn(_core), args.repeat)
        tp = _median_time(lambda: fn(_pycore), args.repeat)
        print(f"{name:48s} {tc:11.4f} {tp:11.4f} {tp / tc:8.1f}x")
    _swap(_core)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
