"""Summary size and build time as the document grows, per generator shape."""

import argparse
import time
from dataclasses import dataclass

from pathsum.generate import GenSpec, Shape, generate
from pathsum.ingest import read_events
from pathsum.summary import SerialFormat, build_summary, serialize


@dataclass
class Config:
    fanouts: tuple = (10, 31, 100, 316)
    depth: int = 3
    recursion_prob: float = 0.3
    repeats: int = 3
    seed: int = 0


def measure(spec: GenSpec, repeats: int) -> dict:
    data = generate(spec).encode()
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        s = build_summary(read_events(data))
        best = min(best, time.perf_counter() - t0)
    return {"N": s.build_stats["nodes"], "PS": len(s), "h": s.height, "secs": best,
            "peak": s.build_stats["peak_tracked"],
            "bin": len(serialize(s, SerialFormat.BINARY_DIRECT)),
            "xml": len(serialize(s, SerialFormat.XML_DIRECT))}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=Config.repeats)
    args = ap.parse_args()
    cfg = Config(repeats=args.repeats)
    print(f"{'shape':10} {'N':>8} {'|PS|':>6} {'h':>3} {'peak':>6} {'bin B':>7} {'xml B':>7} {'ms':>8} {'us/node':>8}")
    for shape in (Shape.FANOUT, Shape.RECURSIVE, Shape.TEXT_HEAVY):
        for f in cfg.fanouts:
            spec = GenSpec(shape, cfg.depth, f, cfg.recursion_prob if shape is Shape.RECURSIVE else 0.0, cfg.seed)
            r = measure(spec, cfg.repeats)
            print(f"{shape.value:10} {r['N']:8d} {r['PS']:6d} {r['h']:3d} {r['peak']:6d} {r['bin']:7d} "
                  f"{r['xml']:7d} {1000 * r['secs']:8.1f} {1e6 * r['secs'] / r['N']:8.2f}")
    for depth in (10, 100, 1000):
        r = measure(GenSpec(Shape.CHAIN, depth), cfg.repeats)
        print(f"{'chain':10} {r['N']:8d} {r['PS']:6d} {r['h']:3d} {r['peak']:6d} {r['bin']:7d} "
              f"{r['xml']:7d} {1000 * r['secs']:8.1f} {1e6 * r['secs'] / r['N']:8.2f}")


if __name__ == "__main__":
    main()
