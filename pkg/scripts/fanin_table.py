"""Per-tag fan-in and the median fan-in mf over fixtures and generated documents."""

import argparse

from pathsum.generate import GenSpec, Shape, generate
from pathsum.store import build_store
from pathsum.summary import fanin_report

D1 = (b"<site><asia><item><name>n1</name><desc/></item><item><name>n2</name></item></asia>"
      b"<europe><item><name>n3</name></item></europe></site>")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--detail", action="store_true", help="print every tag's fan-in")
    args = ap.parse_args()
    docs = {
        "D1": D1,
        "chain-40": generate(GenSpec(Shape.CHAIN, depth=40)).encode(),
        "fanout": generate(GenSpec(Shape.FANOUT, depth=4, fanout=8)).encode(),
    }
    for p in (0.1, 0.3, 0.6):
        docs[f"recursive p={p}"] = generate(GenSpec(Shape.RECURSIVE, 5, 6, p, seed=2)).encode()
    print(f"{'document':18} {'tags':>5} {'max fin':>8} {'mf':>6}")
    for name, data in docs.items():
        store = build_store(data)
        rep = fanin_report(store.summary, store.tag_counts())
        print(f"{name:18} {len(rep.per_tag):5d} {rep.max_fanin:8d} {rep.mf:6.2f}")
        if args.detail:
            print(rep.format())


if __name__ == "__main__":
    main()
