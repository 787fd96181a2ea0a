"""Time the compiled kernels against their pure-Python twins.

    python3 benchmarks/bench_kernels.py [--items 5000] [--edges 50000] [--repeat 3]

Both backends run on the same random transition graph and BPR inputs; the
script also checks that their outputs agree before reporting timings.
"""
import argparse
import time

import numpy as np

from seqrec_audit import _pykernels
from seqrec_audit.graph import TransitionGraph

try:
    from seqrec_audit import _kernels
except ImportError:
    _kernels = None


def _best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--items", type=int, default=5000)
    ap.add_argument("--edges", type=int, default=50000)
    ap.add_argument("--anchors", type=int, default=500)
    ap.add_argument("--queries", type=int, default=5000)
    ap.add_argument("--pairs", type=int, default=5000)
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _kernels is None:
        raise SystemExit("compiled extension not built; run `pip install --no-build-isolation -e .` first")

    rng = np.random.default_rng(args.seed)
    g = TransitionGraph.from_pairs(rng.integers(0, args.items, args.edges),
                                   rng.integers(0, args.items, args.edges), args.items)
    anchors = rng.integers(0, args.items, args.anchors).tolist()
    src = rng.integers(0, args.items, args.queries).astype(np.int32)
    dst = rng.integers(0, args.items, args.queries).astype(np.int32)
    a0 = rng.uniform(-0.01, 0.01, (args.items, args.dim))
    t0 = rng.uniform(-0.01, 0.01, (args.items, args.dim))
    ps = rng.integers(0, args.items, args.pairs).astype(np.int32)
    pd = rng.integers(0, args.items, args.pairs).astype(np.int32)
    order = rng.permutation(args.pairs).astype(np.int64)
    neg = rng.integers(0, args.items, (args.pairs, 5)).astype(np.int32)

    def cases(mod):
        def khop():
            return [mod.khop(g.indptr, g.indices, a, 3, 0) for a in anchors]

        def dist():
            return mod.hop_distances(g.indptr, g.indices, src, dst, 3)

        def bpr():
            a, t = a0.copy(), t0.copy()
            loss = mod.bpr_epoch(a, t, ps, pd, order, neg, 0.05, 1e-4)
            return loss, a, t

        return {"khop x%d (k=3)" % args.anchors: khop,
                "hop_distances x%d" % args.queries: dist,
                "bpr_epoch %d pairs x5 neg" % args.pairs: bpr}

    fast, slow = cases(_kernels), cases(_pykernels)
    print(f"graph: {g.num_items} items, {g.num_edges} edges; best of {args.repeat}")
    print(f"{'kernel':32s} {'cython (s)':>11s} {'python (s)':>11s} {'speedup':>8s}  agree")
    for name in fast:
        tc, oc = _best_of(fast[name], args.repeat)
        tp, op = _best_of(slow[name], args.repeat)
        if name.startswith("khop"):
            agree = all(np.array_equal(x[0], y[0]) and np.array_equal(x[1], y[1]) for x, y in zip(oc, op))
        elif name.startswith("hop"):
            agree = np.array_equal(oc, op)
        else:
            agree = oc[0] == op[0] and np.array_equal(oc[1], op[1]) and np.array_equal(oc[2], op[2])
        print(f"{name:32s} {tc:11.4f} {tp:11.4f} {tp / tc:7.1f}x  {'yes' if agree else 'NO'}")


if __name__ == "__main__":
    main()
