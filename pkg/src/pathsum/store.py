"""Path-partitioned storage of structural ids and values.

Layout of a store directory::

    manifest.json          counts plus a CRC-32 for every file below
    summary.xsum           binary summary (direct or precomputed)
    ids/<pid>.seq          "XIDS", varint count, then (dpre, post, depth) varints
    vals/<pid>.val         "XVAL", varint count, then
                           (dself_pre, self_pre - owner_pre, owner_post,
                            owner_depth, len, utf-8 bytes)

Sequences are decoded lazily, on first scan of each path.
"""

from __future__ import annotations

import json
import os
import zlib
from collections import Counter
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Optional

from . import varint
from .errors import CorruptStore, SummaryMismatch, UnknownPath, VersionMismatch
from .ingest import EventKind, NodeEvent, Source, StructuralId, read_events
from .summary import (Encoding, PathSummary, SerialFormat, build_summary,
                      deserialize, precompute, serialize)

STORE_VERSION = 1
ID_MAGIC = b"XIDS"
VAL_MAGIC = b"XVAL"


class ValueEntry(NamedTuple):
    owner: StructuralId
    self: StructuralId
    value: str


class PathStore:
    """Per-path id and value sequences plus the summary they are keyed by.

    ``stats`` counts ids and value entries handed out by scans; plans use it
    to report how much data a query touched.
    """

    def __init__(self, summary: PathSummary, id_seqs=None, val_seqs=None,
                 manifest: Optional[dict] = None, loader=None):
        self.summary = summary
        self._ids: dict[int, list[StructuralId]] = dict(id_seqs or {})
        self._vals: dict[int, list[ValueEntry]] = dict(val_seqs or {})
        self.manifest = manifest or {}
        self._loader = loader
        if loader is None:
            self._id_paths = set(self._ids)
            self._val_paths = set(self._vals)
        else:
            self._id_paths = set(loader.id_paths)
            self._val_paths = set(loader.val_paths)
        self.stats: Counter = Counter()
        self.path_stats: Counter = Counter()

    @property
    def id_paths(self) -> list[int]:
        return sorted(self._id_paths)

    @property
    def value_paths(self) -> list[int]:
        return sorted(self._val_paths)

    @property
    def loaded_paths(self) -> int:
        return len(self._ids) + len(self._vals)

    def ids(self, pid: int) -> list[StructuralId]:
        seq = self._ids.get(pid)
        if seq is None:
            if pid not in self._id_paths:
                raise UnknownPath(f"no id sequence for path {pid}")
            seq = self._ids[pid] = self._loader.load_ids(pid)
        return seq

    def values(self, pid: int) -> list[ValueEntry]:
        seq = self._vals.get(pid)
        if seq is None:
            if pid not in self._val_paths:
                raise UnknownPath(f"no value sequence for path {pid}")
            seq = self._vals[pid] = self._loader.load_vals(pid)
        return seq

    def has_ids(self, pid: int) -> bool:
        return pid in self._id_paths

    def has_values(self, pid: int) -> bool:
        return pid in self._val_paths

    def count(self, pid: int) -> int:
        if pid in self._id_paths:
            return len(self.ids(pid))
        if pid in self._val_paths:
            return len(self.values(pid))
        return 0

    def reset_stats(self) -> None:
        self.stats.clear()
        self.path_stats.clear()

    def tag_counts(self) -> dict[str, int]:
        counts: Counter = Counter()
        for pid in self._id_paths:
            counts[self.summary.node(pid).label] += len(self.ids(pid))
        return dict(counts)


def partition(events: Iterable[NodeEvent], summary: PathSummary,
              document: str = "") -> PathStore:
    """Split an id-stamped event stream into per-path sequences in one pass."""
    ids: dict[int, list[StructuralId]] = {}
    vals: dict[int, list[ValueEntry]] = {}
    stack: list[tuple[int, StructuralId]] = []
    counts = Counter()
    for ev in events:
        kind = ev.kind
        if kind is EventKind.ELEMENT_START:
            if stack:
                pid = summary.child(stack[-1][0], ev.label)
            else:
                pid = 1 if summary.root.label == ev.label else None
            if pid is None:
                raise SummaryMismatch(f"element {ev.label!r} has no summary path")
            ids.setdefault(pid, []).append(ev.id)
            stack.append((pid, ev.id))
            counts["elements"] += 1
        elif kind is EventKind.ELEMENT_END:
            stack.pop()
        else:
            owner_pid, owner = stack[-1]
            pid = summary.child(owner_pid, ev.label)
            if pid is None:
                raise SummaryMismatch(f"value node {ev.label!r} has no summary path")
            if kind is EventKind.ATTRIBUTE:
                ids.setdefault(pid, []).append(ev.id)
                counts["attributes"] += 1
            else:
                counts["texts"] += 1
            vals.setdefault(pid, []).append(ValueEntry(owner, ev.id, ev.value))
    counts["paths"] = len(summary)
    manifest = {"document": document, "counts": dict(counts)}
    return PathStore(summary, ids, vals, manifest)


def build_store(source: Source, precomputed: bool = False, document: str = "") -> PathStore:
    """Parse ``source`` twice: once for the summary, once to partition."""
    if hasattr(source, "read"):
        source = source.read()
    summary = build_summary(read_events(source))
    if precomputed:
        summary = precompute(summary)
    return partition(read_events(source), summary, document)


def scan_ids(store: PathStore, pid: int) -> Iterator[StructuralId]:
    seq = store.ids(pid)
    stats = store.stats
    for sid in seq:
        stats["ids"] += 1
        store.path_stats[pid] += 1
        yield sid


def scan_values(store: PathStore, pid: int) -> Iterator[ValueEntry]:
    seq = store.values(pid)
    stats = store.stats
    for entry in seq:
        stats["values"] += 1
        store.path_stats[pid] += 1
        yield entry


# -- on-disk encoding ------------------------------------------------------------

def encode_ids(seq: list[StructuralId]) -> bytes:
    buf = bytearray(ID_MAGIC)
    varint.write(buf, len(seq))
    prev = 0
    for sid in seq:
        varint.write(buf, sid.pre - prev)
        varint.write(buf, sid.post)
        varint.write(buf, sid.depth)
        prev = sid.pre
    return bytes(buf)


def decode_ids(data: bytes) -> list[StructuralId]:
    if data[:4] != ID_MAGIC:
        raise CorruptStore("bad id sequence magic")
    try:
        n, pos = varint.decode(data, 4)
        out = []
        pre = 0
        for _ in range(n):
            d, pos = varint.decode(data, pos)
            post, pos = varint.decode(data, pos)
            depth, pos = varint.decode(data, pos)
            pre += d
            out.append(StructuralId(pre, post, depth))
    except IndexError:
        raise CorruptStore("id sequence truncated") from None
    return out


def encode_vals(seq: list[ValueEntry]) -> bytes:
    buf = bytearray(VAL_MAGIC)
    varint.write(buf, len(seq))
    prev = 0
    for owner, me, value in seq:
        varint.write(buf, me.pre - prev)
        varint.write(buf, me.pre - owner.pre)
        varint.write(buf, owner.post)
        varint.write(buf, owner.depth)
        raw = value.encode("utf-8")
        varint.write(buf, len(raw))
        buf += raw
        prev = me.pre
    return bytes(buf)


def decode_vals(data: bytes) -> list[ValueEntry]:
    if data[:4] != VAL_MAGIC:
        raise CorruptStore("bad value sequence magic")
    try:
        n, pos = varint.decode(data, 4)
        out = []
        pre = 0
        for _ in range(n):
            d, pos = varint.decode(data, pos)
            back, pos = varint.decode(data, pos)
            post, pos = varint.decode(data, pos)
            depth, pos = varint.decode(data, pos)
            size, pos = varint.decode(data, pos)
            if pos + size > len(data):
                raise IndexError
            value = data[pos:pos + size].decode("utf-8")
            pos += size
            pre += d
            owner = StructuralId(pre - back, post, depth)
            out.append(ValueEntry(owner, StructuralId(pre, pre, depth + 1), value))
    except IndexError:
        raise CorruptStore("value sequence truncated") from None
    return out


def _crc(data: bytes) -> int:
    return zlib.crc32(data) & 0xFFFFFFFF


def persist(store: PathStore, directory) -> None:
    root = Path(directory)
    (root / "ids").mkdir(parents=True, exist_ok=True)
    (root / "vals").mkdir(parents=True, exist_ok=True)
    files = {}

    def put(rel: str, data: bytes) -> None:
        (root / rel).write_bytes(data)
        files[rel] = {"crc32": _crc(data), "bytes": len(data)}

    fmt = (SerialFormat.BINARY_PRECOMPUTED if store.summary.encoding is Encoding.PRECOMPUTED
           else SerialFormat.BINARY_DIRECT)
    put("summary.xsum", serialize(store.summary, fmt))
    for pid in store.id_paths:
        put(f"ids/{pid}.seq", encode_ids(store.ids(pid)))
    for pid in store.value_paths:
        put(f"vals/{pid}.val", encode_vals(store.values(pid)))
    manifest = {
        "format": "pathsum-store",
        "version": STORE_VERSION,
        "document": store.manifest.get("document", ""),
        "counts": store.manifest.get("counts", {}),
        "files": files,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


class _DirLoader:
    def __init__(self, root: Path, files: dict):
        self.root = root
        self.files = files
        self.id_paths = [int(k[4:-4]) for k in files if k.startswith("ids/")]
        self.val_paths = [int(k[5:-4]) for k in files if k.startswith("vals/")]

    def read(self, rel: str) -> bytes:
        try:
            data = (self.root / rel).read_bytes()
        except OSError as exc:
            raise CorruptStore(f"cannot read {rel}: {exc}") from None
        if _crc(data) != self.files[rel]["crc32"]:
            raise CorruptStore(f"checksum mismatch in {rel}")
        return data

    def load_ids(self, pid: int) -> list[StructuralId]:
        return decode_ids(self.read(f"ids/{pid}.seq"))

    def load_vals(self, pid: int) -> list[ValueEntry]:
        return decode_vals(self.read(f"vals/{pid}.val"))


def open_store(directory) -> PathStore:
    """Open a persisted store; sequences are read on first use."""
    root = Path(directory)
    if not root.is_dir():
        raise FileNotFoundError(f"{root}: no such store directory")
    try:
        manifest = json.loads((root / "manifest.json").read_text())
    except FileNotFoundError:
        raise CorruptStore(f"{root}: no manifest.json") from None
    except (OSError, ValueError) as exc:
        raise CorruptStore(f"{root}: unreadable manifest ({exc})") from None
    if not isinstance(manifest, dict) or manifest.get("format") != "pathsum-store":
        raise CorruptStore(f"{root}: not a path store")
    if manifest.get("version") != STORE_VERSION:
        raise VersionMismatch(f"store version {manifest.get('version')}, expected {STORE_VERSION}")
    files = manifest.get("files", {})
    if "summary.xsum" not in files:
        raise CorruptStore("manifest lists no summary")
    loader = _DirLoader(root, files)
    summary = deserialize(loader.read("summary.xsum"))
    return PathStore(summary, manifest=manifest, loader=loader)


# alias matching the persist/open pair
open = open_store  # noqa: A001
