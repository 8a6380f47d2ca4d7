"""Peak buffers of streaming reconstruction versus rows materialized by the outer-union baseline."""

import argparse
import time
from dataclasses import dataclass

from pathsum.generate import GenSpec, Shape, generate
from pathsum.reconstruct import ReconstructStats, reconstruct, sorted_outer_union, subtree_paths
from pathsum.store import build_store


@dataclass
class Config:
    depth: int = 5
    fanouts: tuple = (4, 6, 10)
    recursion_prob: float = 0.3
    seed: int = 1


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=Config.seed)
    cfg = Config(seed=ap.parse_args().seed)
    print(f"{'shape':10} {'N':>7} {'paths':>6} {'buffers':>8} {'rows':>8} {'ms rec':>8} {'ms sou':>8}")
    for shape in (Shape.RECURSIVE, Shape.TEXT_HEAVY):
        for f in cfg.fanouts:
            spec = GenSpec(shape, cfg.depth, f, cfg.recursion_prob if shape is Shape.RECURSIVE else 0.0, cfg.seed)
            store = build_store(generate(spec).encode())
            rs, ss = ReconstructStats(), ReconstructStats()
            t0 = time.perf_counter()
            a = reconstruct(store, [1], rs)
            t1 = time.perf_counter()
            b = sorted_outer_union(store, [1], stats=ss)
            t2 = time.perf_counter()
            assert a == b
            n = len(subtree_paths(store.summary, 1))
            print(f"{shape.value:10} {store.summary.build_stats['nodes']:7d} {n:6d} {rs.peak_buffers:8d} "
                  f"{ss.materialized_rows:8d} {1000 * (t1 - t0):8.1f} {1000 * (t2 - t1):8.1f}")


if __name__ == "__main__":
    main()
