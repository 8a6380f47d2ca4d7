"""Ids scanned and wall time for a query set, with and without path minimization."""

import argparse
import time
from dataclasses import dataclass

from pathsum.errors import Unsatisfiable
from pathsum.execution import build_plan, execute
from pathsum.generate import GenSpec, Shape, generate
from pathsum.pattern import parse_xpath
from pathsum.relpaths import compute_relevant_paths
from pathsum.store import build_store


@dataclass
class Config:
    depth: int = 5
    fanout: int = 8
    recursion_prob: float = 0.3
    seed: int = 1
    queries: tuple = ("//t1//t2//t3", "//t1[t2]//t4", "//t0//t2/t3", "//t2[t3]", "//t1//t3[t4]",
                      "//t0/t1/t2/t3/t4")


def run(store, q, minimize: bool):
    store.reset_stats()
    t0 = time.perf_counter()
    try:
        forest = compute_relevant_paths(store.summary, q, minimize)
        rows = len(execute(build_plan(q, forest, store), store))
    except Unsatisfiable:
        rows = 0
    return rows, store.stats["ids"] + store.stats["values"], time.perf_counter() - t0


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--fanout", type=int, default=Config.fanout)
    ap.add_argument("--seed", type=int, default=Config.seed)
    args = ap.parse_args()
    cfg = Config(fanout=args.fanout, seed=args.seed)
    doc = generate(GenSpec(Shape.RECURSIVE, cfg.depth, cfg.fanout, cfg.recursion_prob, cfg.seed))
    store = build_store(doc.encode())
    print(f"document: {store.summary.build_stats['nodes']} nodes, |PS| = {len(store.summary)}")
    print(f"{'query':22} {'rows':>6} {'ids(min)':>9} {'ids(full)':>9} {'ms(min)':>8} {'ms(full)':>8}")
    for text in cfg.queries:
        q = parse_xpath(text)
        rows_a, ids_a, t_a = run(store, q, True)
        rows_b, ids_b, t_b = run(store, q, False)
        assert rows_a == rows_b
        print(f"{text:22} {rows_a:6d} {ids_a:9d} {ids_b:9d} {1000 * t_a:8.1f} {1000 * t_b:8.1f}")


if __name__ == "__main__":
    main()
