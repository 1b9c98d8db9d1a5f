"""Contact-event ingestion.

Parses raw interaction records (CSV / JSONL, optionally gzipped) into a
columnar event table, removes exact duplicates and self-contacts, applies the
observation window, and builds the underlying temporal graph. User ids are
opaque; they are canonicalized to strings and mapped to dense integer indices
internally so that all downstream analytics run on numpy arrays.
"""

from __future__ import annotations

import gzip
import io
import json
import struct
from collections.abc import Sequence
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import IO, Iterable, Iterator

import numpy as np

CSV_HEADER = ["source", "target", "timestamp", "kind", "status_id"]

_BIN_MAGIC = b"EMBREVT1"


class Kind(Enum):
    """Interaction type. Downstream analysis treats all kinds uniformly."""

    RETWEET = "retweet"
    REPLY = "reply"
    QUOTE = "quote"
    UNKNOWN = "unknown"

    @classmethod
    def from_code(cls, code: int) -> "Kind":
        return _KIND_BY_CODE[code]

    @property
    def code(self) -> int:
        return _KIND_CODE[self]


_KIND_BY_CODE = {0: Kind.RETWEET, 1: Kind.REPLY, 2: Kind.QUOTE, 3: Kind.UNKNOWN}
_KIND_CODE = {k: c for c, k in _KIND_BY_CODE.items()}
_KIND_BY_NAME = {k.value: k for k in Kind}


@dataclass(frozen=True)
class ContactEvent:
    """One timestamped directed interaction between two distinct users."""

    source: str
    target: str
    timestamp: int
    kind: Kind = Kind.UNKNOWN
    status_id: str | None = None


@dataclass
class ParseStats:
    records_parsed: int = 0
    malformed_lines: int = 0
    self_loops_dropped: int = 0

    def to_dict(self) -> dict:
        return {
            "records_parsed": self.records_parsed,
            "malformed_lines": self.malformed_lines,
            "self_loops_dropped": self.self_loops_dropped,
        }


class EventTable(Sequence):
    """Columnar store of contact events; behaves as a sequence of ContactEvent.

    Columns: ``src``/``dst`` (int64 indices into ``users``), ``ts`` (int64
    epoch seconds), ``kind`` (uint8 codes) and ``status`` (object array of
    ``str | None``). The user vocabulary is in first-seen order.
    """

    __slots__ = ("users", "src", "dst", "ts", "kind", "status", "_index")

    def __init__(self, users, src, dst, ts, kind, status):
        self.users = np.asarray(users, dtype=object)
        self.src = np.asarray(src, dtype=np.int64)
        self.dst = np.asarray(dst, dtype=np.int64)
        self.ts = np.asarray(ts, dtype=np.int64)
        self.kind = np.asarray(kind, dtype=np.uint8)
        self.status = np.asarray(status, dtype=object)
        self._index = None

    # -- construction -------------------------------------------------------

    @classmethod
    def from_events(cls, events: Iterable[ContactEvent]) -> "EventTable":
        users: list[str] = []
        lookup: dict[str, int] = {}
        src, dst, ts, kind, status = [], [], [], [], []
        for ev in events:
            for uid in (ev.source, ev.target):
                if uid not in lookup:
                    lookup[uid] = len(users)
                    users.append(uid)
            src.append(lookup[ev.source])
            dst.append(lookup[ev.target])
            ts.append(int(ev.timestamp))
            kind.append(ev.kind.code)
            status.append(ev.status_id)
        return cls(users, src, dst, ts, kind, status)

    @classmethod
    def from_arrays(cls, users, src, dst, ts, kind=None, status=None) -> "EventTable":
        n = len(src)
        if kind is None:
            kind = np.full(n, Kind.UNKNOWN.code, dtype=np.uint8)
        if status is None:
            status = np.full(n, None, dtype=object)
        return cls(users, src, dst, ts, kind, status)

    # -- sequence protocol ---------------------------------------------------

    def __len__(self) -> int:
        return self.src.shape[0]

    def __getitem__(self, i):
        if isinstance(i, slice):
            return EventTable(self.users, self.src[i], self.dst[i],
                              self.ts[i], self.kind[i], self.status[i])
        return ContactEvent(
            source=self.users[self.src[i]],
            target=self.users[self.dst[i]],
            timestamp=int(self.ts[i]),
            kind=Kind.from_code(int(self.kind[i])),
            status_id=self.status[i],
        )

    def __iter__(self) -> Iterator[ContactEvent]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other) -> bool:
        if isinstance(other, EventTable) and len(self) == len(other):
            if (np.array_equal(self.ts, other.ts)
                    and np.array_equal(self.kind, other.kind)):
                same_ids = (
                    np.array_equal(self.users[self.src], other.users[other.src])
                    and np.array_equal(self.users[self.dst], other.users[other.dst]))
                return bool(same_ids and np.array_equal(self.status, other.status))
            return False
        if isinstance(other, Sequence):
            return len(self) == len(other) and all(a == b for a, b in zip(self, other))
        return NotImplemented

    # -- helpers -------------------------------------------------------------

    @property
    def n_users(self) -> int:
        return self.users.shape[0]

    def user_index(self) -> dict:
        if self._index is None:
            self._index = {u: i for i, u in enumerate(self.users)}
        return self._index

    def take(self, mask_or_idx) -> "EventTable":
        return EventTable(self.users, self.src[mask_or_idx], self.dst[mask_or_idx],
                          self.ts[mask_or_idx], self.kind[mask_or_idx],
                          self.status[mask_or_idx])

    def sorted_by_time(self) -> "EventTable":
        order = np.argsort(self.ts, kind="stable")
        if np.array_equal(order, np.arange(len(self))):
            return self
        return self.take(order)

    def compact(self) -> "EventTable":
        """Drop vocabulary entries that no event references."""
        used = np.zeros(self.n_users, dtype=bool)
        used[self.src] = True
        used[self.dst] = True
        if used.all():
            return self
        remap = np.cumsum(used) - 1
        return EventTable(self.users[used], remap[self.src], remap[self.dst],
                          self.ts, self.kind, self.status)

    def _dedup_keys(self):
        # row identity = (source, target, timestamp, kind, status_id)
        status_codes = np.empty(len(self), dtype=np.int64)
        lookup: dict = {}
        for i, s in enumerate(self.status):
            code = lookup.setdefault(s, len(lookup))
            status_codes[i] = code
        return np.rec.fromarrays(
            [self.src, self.dst, self.ts, self.kind, status_codes],
            names=["s", "d", "t", "k", "z"],
        )


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _coerce_timestamp(raw) -> int | None:
    if isinstance(raw, (int, float)):
        if isinstance(raw, float) and not np.isfinite(raw):
            return None
        t = int(raw)
        return t if t >= 0 else None
    text = str(raw).strip()
    if not text:
        return None
    try:
        t = int(text)
        return t if t >= 0 else None
    except ValueError:
        pass
    try:
        t = int(float(text))
        return t if t >= 0 else None
    except (ValueError, OverflowError):
        pass
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        t = int(dt.timestamp())
        return t if t >= 0 else None
    except ValueError:
        return None


def _coerce_kind(raw) -> Kind:
    if raw is None:
        return Kind.UNKNOWN
    return _KIND_BY_NAME.get(str(raw).strip().lower(), Kind.UNKNOWN)


def _open_input(source) -> IO[bytes]:
    if isinstance(source, bytes):
        stream: IO[bytes] = io.BytesIO(source)
    elif hasattr(source, "read"):
        stream = source
        if isinstance(stream.read(0), str):
            raise TypeError("parse_contacts expects a binary stream, path, or bytes")
    else:
        stream = open(source, "rb")  # str or pathlib.Path
    if stream.seekable():
        head = stream.read(2)
        if head:
            stream.seek(-len(head), io.SEEK_CUR)
    else:
        stream = io.BufferedReader(stream)
        head = stream.peek(2)[:2]
    if head == b"\x1f\x8b":
        return gzip.open(stream, "rb")
    return stream


class _RowBuilder:
    """Accumulates parsed rows columnarly while counting rejects."""

    def __init__(self):
        self.users: list[str] = []
        self.lookup: dict[str, int] = {}
        self.src: list[int] = []
        self.dst: list[int] = []
        self.ts: list[int] = []
        self.kind: list[int] = []
        self.status: list = []
        self.stats = ParseStats()

    def add(self, source, target, timestamp, kind_raw, status_raw) -> None:
        if source is None or target is None:
            self.stats.malformed_lines += 1
            return
        source = str(source).strip()
        target = str(target).strip()
        if not source or not target:
            self.stats.malformed_lines += 1
            return
        t = _coerce_timestamp(timestamp)
        if t is None:
            self.stats.malformed_lines += 1
            return
        if source == target:
            self.stats.self_loops_dropped += 1
            return
        si = self.lookup.setdefault(source, len(self.users))
        if si == len(self.users):
            self.users.append(source)
        di = self.lookup.setdefault(target, len(self.users))
        if di == len(self.users):
            self.users.append(target)
        self.src.append(si)
        self.dst.append(di)
        self.ts.append(t)
        self.kind.append(_coerce_kind(kind_raw).code)
        status = None
        if status_raw is not None:
            s = str(status_raw).strip()
            status = s or None
        self.status.append(status)
        self.stats.records_parsed += 1

    def finish(self) -> tuple[EventTable, ParseStats]:
        table = EventTable(self.users, self.src, self.dst, self.ts,
                           self.kind, self.status)
        table._index = dict(self.lookup)
        return table, self.stats


def _parse_csv(stream: IO[bytes], builder: _RowBuilder,
               column_map: dict | None = None) -> None:
    text = io.TextIOWrapper(stream, encoding="utf-8", errors="replace", newline="")
    import csv

    reader = csv.reader(text)
    header = next(reader, None)
    if header is None:
        return
    names = [h.strip().lower() for h in header]
    cmap = {k.lower(): v.lower() for k, v in (column_map or {}).items()}

    def col(canonical: str) -> int | None:
        wanted = cmap.get(canonical, canonical)
        try:
            return names.index(wanted)
        except ValueError:
            return None

    i_src, i_dst, i_ts = col("source"), col("target"), col("timestamp")
    i_kind, i_status = col("kind"), col("status_id")
    if i_src is None or i_dst is None or i_ts is None:
        raise ValueError(
            f"CSV header must provide source/target/timestamp columns, got {header!r}")
    need = max(x for x in (i_src, i_dst, i_ts) if x is not None) + 1
    for row in reader:
        if len(row) < need:
            if any(f.strip() for f in row):
                builder.stats.malformed_lines += 1
            continue
        kind_raw = row[i_kind] if i_kind is not None and i_kind < len(row) else None
        status_raw = row[i_status] if i_status is not None and i_status < len(row) else None
        builder.add(row[i_src], row[i_dst], row[i_ts], kind_raw, status_raw)


def _parse_jsonl(stream: IO[bytes], builder: _RowBuilder) -> None:
    for raw in stream:
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ValueError
        except (json.JSONDecodeError, ValueError):
            builder.stats.malformed_lines += 1
            continue
        builder.add(obj.get("source"), obj.get("target"), obj.get("timestamp"),
                    obj.get("kind"), obj.get("status_id"))


def parse_contacts(source, fmt: str = "csv",
                   column_map: dict | None = None) -> tuple[EventTable, ParseStats]:
    """Parse raw contact records into an event table.

    ``source`` is a path, bytes, or binary stream; gzip input is detected by
    magic bytes. Malformed lines are counted and skipped, never fatal.
    Self-contacts are dropped and counted separately.
    """
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"unsupported format: {fmt!r}")
    stream = _open_input(source)
    builder = _RowBuilder()
    if fmt == "csv":
        _parse_csv(stream, builder, column_map)
    else:
        _parse_jsonl(stream, builder)
    return builder.finish()


# Column synonyms observed in public interaction-network exports. The OSF
# release of the underlying dataset is mapped through the same path; override
# any column via ``column_map`` / the CLI flags if an export deviates.
OSF_COLUMN_CANDIDATES = {
    "source": ("source", "src", "user1", "from", "retweeter", "u"),
    "target": ("target", "dst", "user2", "to", "author", "v"),
    "timestamp": ("timestamp", "time", "t", "created_at", "ts"),
    "kind": ("kind", "type", "interaction", "edge_type"),
    "status_id": ("status_id", "status", "tweet_id", "id"),
}


def load_osf_interactions(source, column_map: dict | None = None
                          ) -> tuple[EventTable, ParseStats]:
    """Adapter for published interaction-network CSV exports.

    Resolves each canonical column against a list of known header synonyms
    (see ``OSF_COLUMN_CANDIDATES``); explicit ``column_map`` entries win.
    """
    stream = _open_input(source)
    text = io.TextIOWrapper(stream, encoding="utf-8", errors="replace", newline="")
    import csv

    reader = csv.reader(text)
    header = next(reader, None)
    if header is None:
        return EventTable.from_events([]), ParseStats()
    names = [h.strip().lower() for h in header]
    resolved: dict[str, str] = {}
    overrides = {k.lower(): v.lower() for k, v in (column_map or {}).items()}
    for canonical, candidates in OSF_COLUMN_CANDIDATES.items():
        if canonical in overrides:
            resolved[canonical] = overrides[canonical]
            continue
        for cand in candidates:
            if cand in names:
                resolved[canonical] = cand
                break
    missing = [c for c in ("source", "target", "timestamp") if c not in resolved]
    if missing:
        raise ValueError(f"could not resolve columns {missing} in header {header!r}")

    idx = {c: names.index(col) for c, col in resolved.items()}
    builder = _RowBuilder()
    for row in reader:
        if len(row) <= max(idx[c] for c in ("source", "target", "timestamp")):
            if any(f.strip() for f in row):
                builder.stats.malformed_lines += 1
            continue

        def get(c):
            return row[idx[c]] if c in idx and idx[c] < len(row) else None

        builder.add(get("source"), get("target"), get("timestamp"),
                    get("kind"), get("status_id"))
    return builder.finish()


# ---------------------------------------------------------------------------
# dedup / window filter
# ---------------------------------------------------------------------------


def _as_table(events) -> EventTable:
    if isinstance(events, EventTable):
        return events
    return EventTable.from_events(events)


def deduplicate(events) -> EventTable:
    """Collapse exact-duplicate records, keeping first occurrences in order."""
    table = _as_table(events)
    if len(table) == 0:
        return table
    keys = table._dedup_keys()
    _, first = np.unique(keys, return_index=True)
    first.sort()
    if first.shape[0] == len(table):
        return table
    return table.take(first)


def filter_window(events, t_start: int, t_end: int) -> EventTable:
    """Keep events with t_start <= t < t_end."""
    if t_start >= t_end:
        raise ValueError(f"empty window: [{t_start}, {t_end})")
    table = _as_table(events)
    mask = (table.ts >= t_start) & (table.ts < t_end)
    if mask.all():
        return table
    return table.take(np.flatnonzero(mask))


# ---------------------------------------------------------------------------
# underlying temporal graph
# ---------------------------------------------------------------------------


@dataclass
class TemporalGraph:
    """The underlying graph of all contacts in the observation window.

    ``table`` is time-sorted and its vocabulary contains exactly the event
    endpoints. Immutable by convention; safe for concurrent read-only use.
    """

    table: EventTable
    t0: int
    horizon: int

    @property
    def events(self) -> EventTable:
        return self.table

    @property
    def users(self) -> np.ndarray:
        return self.table.users

    @property
    def vertices(self) -> frozenset:
        return frozenset(self.table.users.tolist())

    @property
    def n_vertices(self) -> int:
        return self.table.n_users

    @property
    def n_events(self) -> int:
        return len(self.table)

    def view(self):
        from .slicing import build_view

        return build_view(self.table.src, self.table.dst, self.table.n_users)


def build_underlying_graph(events, t0: int | None = None,
                           horizon: int | None = None) -> TemporalGraph:
    """Assemble the underlying graph from deduplicated, window-filtered events.

    Events must lie in [t0, horizon]; the bounds default to the observed
    min/max timestamps.
    """
    table = _as_table(events).compact().sorted_by_time()
    if len(table) == 0:
        t0 = 0 if t0 is None else int(t0)
        horizon = t0 if horizon is None else int(horizon)
        return TemporalGraph(table, t0, horizon)
    lo = int(table.ts[0])
    hi = int(table.ts[-1])
    t0 = lo if t0 is None else int(t0)
    horizon = hi if horizon is None else int(horizon)
    if lo < t0 or hi > horizon:
        raise ValueError(
            f"events outside window [{t0}, {horizon}]: observed [{lo}, {hi}]")
    return TemporalGraph(table, t0, horizon)


# ---------------------------------------------------------------------------
# serialization: canonical CSV / JSONL and the compact binary cache
# ---------------------------------------------------------------------------


def write_csv(events, path_or_buf) -> None:
    """Serialize events to the canonical CSV layout (round-trips exactly)."""
    table = _as_table(events)
    import csv

    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    fh = open(path_or_buf, "w", newline="", encoding="utf-8") if own else path_or_buf
    try:
        writer = csv.writer(fh)
        has_status = any(s is not None for s in table.status)
        writer.writerow(CSV_HEADER if has_status else CSV_HEADER[:4])
        for i in range(len(table)):
            row = [table.users[table.src[i]], table.users[table.dst[i]],
                   int(table.ts[i]), Kind.from_code(int(table.kind[i])).value]
            if has_status:
                row.append(table.status[i] if table.status[i] is not None else "")
            writer.writerow(row)
    finally:
        if own:
            fh.close()


def write_jsonl(events, path_or_buf) -> None:
    table = _as_table(events)
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    fh = open(path_or_buf, "w", encoding="utf-8") if own else path_or_buf
    try:
        for i in range(len(table)):
            obj = {
                "source": table.users[table.src[i]],
                "target": table.users[table.dst[i]],
                "timestamp": int(table.ts[i]),
                "kind": Kind.from_code(int(table.kind[i])).value,
            }
            if table.status[i] is not None:
                obj["status_id"] = table.status[i]
            fh.write(json.dumps(obj) + "\n")
    finally:
        if own:
            fh.close()


_REC_DTYPE = np.dtype([("src", "<u8"), ("dst", "<u8"), ("ts", "<i8"), ("kind", "u1")])


def write_events_binary(path, events, t0: int | None = None,
                        horizon: int | None = None) -> None:
    """Compact cache: header, user vocabulary, then packed event records.

    Record layout (little-endian): u64 source index, u64 target index,
    i64 timestamp, u8 kind code. status_id is not retained — the cache is
    written after deduplication, which is the only consumer of status ids.
    """
    table = _as_table(events)
    if t0 is None:
        t0 = int(table.ts.min()) if len(table) else 0
    if horizon is None:
        horizon = int(table.ts.max()) if len(table) else int(t0)
    with open(path, "wb") as fh:
        fh.write(_BIN_MAGIC)
        fh.write(struct.pack("<QQqq", table.n_users, len(table), int(t0), int(horizon)))
        for u in table.users:
            b = str(u).encode("utf-8")
            fh.write(struct.pack("<I", len(b)))
            fh.write(b)
        rec = np.empty(len(table), dtype=_REC_DTYPE)
        rec["src"] = table.src
        rec["dst"] = table.dst
        rec["ts"] = table.ts
        rec["kind"] = table.kind
        fh.write(rec.tobytes())


def read_events_binary(path) -> tuple[EventTable, int, int]:
    """Read the binary cache; returns (events, t0, horizon)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_BIN_MAGIC))
        if magic != _BIN_MAGIC:
            raise ValueError(f"{path}: not an embernet event cache")
        n_users, n_events, t0, horizon = struct.unpack("<QQqq", fh.read(32))
        users = np.empty(n_users, dtype=object)
        for i in range(n_users):
            (ln,) = struct.unpack("<I", fh.read(4))
            users[i] = fh.read(ln).decode("utf-8")
        blob = fh.read(n_events * _REC_DTYPE.itemsize)
        rec = np.frombuffer(blob, dtype=_REC_DTYPE, count=n_events)
    table = EventTable.from_arrays(users, rec["src"].astype(np.int64),
                                   rec["dst"].astype(np.int64),
                                   rec["ts"].astype(np.int64),
                                   rec["kind"].copy())
    return table, int(t0), int(horizon)


def parse_iso_utc(text: str) -> int:
    """ISO-8601 date/datetime to epoch seconds, assuming UTC when naive."""
    dt = datetime.fromisoformat(str(text).replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())
