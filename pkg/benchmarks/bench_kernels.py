"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--n 2048] [--repeat 5]

Inputs are an equilibrated WCA liquid at rho = 0.8 with a 9^3 CV grid; each
kernel is called with identical arguments on both backends and the outputs
are checked for bit identity.
"""
import argparse
import timeit

import numpy as np

from cvmd._backend import get_kernels
from cvmd.core import wrap_position
from cvmd.forces import RC
from cvmd.harness.checks import _fluid_state
from cvmd.lcv import CVGrid


def _cases(n, seed=0):
    state = _fluid_state(seed=seed, steps=100, n=n)
    pos, box = state.positions, state.box
    L = np.ascontiguousarray(box.lengths)
    per = tuple(int(p) for p in box.periodic)
    grid = CVGrid.tiling(box, (9, 9, 9))
    ref = get_kernels("python")
    i, j, r = ref.wca_pairs(pos, L, per, RC)[:3]
    ci, cj = ref.wca_pairs(pos, L, per, RC + 0.3)[:2]
    ri, rj = np.ascontiguousarray(pos[i]), np.ascontiguousarray(pos[j])
    disp = np.random.default_rng(seed).normal(0.0, 0.05, pos.shape)
    x1, shift = wrap_position(pos + disp, box, return_shift=True)
    shift = np.ascontiguousarray(shift, dtype=np.int_)
    return {
        "wca_pairs": lambda k: k.wca_pairs(pos, L, per, RC),
        "wca_filter": lambda k: k.wca_filter(pos, L, per, RC, ci, cj),
        "pair_traverse": lambda k: k.pair_traverse(ri, rj, r, want_visits=True, **grid._args),
        "point_crossings": lambda k: k.point_crossings(pos, x1, disp, shift, **grid._args),
    }


def _flatten(out):
    if isinstance(out, np.ndarray):
        return [out]
    return [a for x in out for a in _flatten(x)]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2048, help="atoms (4 k^3)")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    try:
        compiled = get_kernels("compiled")
    except ImportError:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    python = get_kernels("python")

    print(f"{'kernel':<16}{'compiled ms':>12}{'python ms':>12}{'speedup':>9}  identical")
    for name, call in _cases(args.n).items():
        same = all(np.array_equal(a, b) for a, b in
                   zip(_flatten(call(compiled)), _flatten(call(python))))
        t = {}
        for label, k in (("c", compiled), ("p", python)):
            reps = 1 if label == "p" else 10
            t[label] = min(timeit.repeat(lambda: call(k), number=reps, repeat=args.repeat)) / reps
        print(f"{name:<16}{1e3 * t['c']:>12.3f}{1e3 * t['p']:>12.3f}{t['p'] / t['c']:>8.1f}x  {same}")


if __name__ == "__main__":
    main()
