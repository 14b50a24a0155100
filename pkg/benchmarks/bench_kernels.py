"""Compare the compiled kernels with the numpy fallback on synthetic inputs.

    python benchmarks/bench_kernels.py [--repeat 5] [--docs 20000] [--items 200000]

Each kernel is run on identical inputs under both backends; outputs are
checked for agreement before timings are reported.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from remem import kernels
from remem.retrieval import Bm25Index


def bm25_case(n_docs: int, rng: np.random.Generator):
    vocab = [f"w{i}" for i in range(2000)]
    # Zipf-ish term choice so some postings lists get long
    weights = 1.0 / np.arange(1, len(vocab) + 1)
    weights /= weights.sum()
    docs = [" ".join(rng.choice(vocab, size=rng.integers(5, 40), p=weights)) for _ in range(n_docs)]
    idx = Bm25Index(docs)
    terms = np.array(sorted({idx.vocab[w] for w in vocab[:30] if w in idx.vocab}), dtype=np.int64)
    n = idx.df[terms].astype(np.float64)
    idf = np.log(1.0 + (idx.n_docs - n + 0.5) / (n + 0.5))
    return (idx.indptr, idx.post_doc, idx.post_tf, idx.doc_len, terms, idf, idx.k1, idx.b, idx.avgdl)


def window_case(n: int, rng: np.random.Generator):
    earliest = rng.integers(0, 10**9, size=n, dtype=np.int64)
    latest = earliest + rng.integers(0, 10**7, size=n, dtype=np.int64)
    timed = (rng.random(n) < 0.8).astype(np.uint8)
    return (earliest, latest, timed, kernels.MODE_INCLUSIVE, 3 * 10**8, 3 * 10**8 + 86399,
            kernels.MODE_STRICT, 7 * 10**8, 7 * 10**8 + 86399)


def pairs_case(n: int, rng: np.random.Generator):
    v = rng.normal(size=(n, 32))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return (np.ascontiguousarray(v @ v.T), 0, 0, 0.5)


def same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b)) or np.allclose(a, b, rtol=0, atol=1e-12)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--docs", type=int, default=20000)
    ap.add_argument("--items", type=int, default=200000)
    ap.add_argument("--gists", type=int, default=2048)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if kernels.compiled is None:
        raise SystemExit("compiled kernels are not available; build with `pip install -e . --no-build-isolation`")

    rng = np.random.default_rng(args.seed)
    cases = {
        "bm25_scores": bm25_case(args.docs, rng),
        "window_mask": window_case(args.items, rng),
        "threshold_pairs": pairs_case(args.gists, rng),
    }
    print(f"{'kernel':<16} {'python ms':>10} {'cython ms':>10} {'speedup':>8}")
    for name, inputs in cases.items():
        py_fn, c_fn = getattr(kernels.py, name), getattr(kernels.compiled, name)
        if not same(py_fn(*inputs), c_fn(*inputs)):
            raise SystemExit(f"{name}: backends disagree")
        t_py = min(timeit.repeat(lambda: py_fn(*inputs), number=1, repeat=args.repeat))
        t_c = min(timeit.repeat(lambda: c_fn(*inputs), number=1, repeat=args.repeat))
        print(f"{name:<16} {1e3 * t_py:>10.2f} {1e3 * t_c:>10.2f} {t_py / t_c:>7.1f}x")


if __name__ == "__main__":
    main()
