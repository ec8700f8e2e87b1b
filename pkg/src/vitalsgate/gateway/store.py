"""Durable per-node storage: append-only JSON-lines logs plus sparse indexes.

Layout under the store root::

    nodes/<node_id>/
        records-YYYYMMDD.jsonl   one sample record per line, arrival order
        records-YYYYMMDD.idx     sparse "received_at byte_offset" pairs
        profiles.jsonl           threshold profile versions, append-only
        alerts.jsonl             alert lifecycle events, append-only

Every append is flushed to the OS before returning, so whatever a
killed process had already processed is on disk (kill -9 semantics:
process state dies, page cache survives). No external database; the
logs are plain text and diffable.
"""

from __future__ import annotations

import json
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterator

INDEX_EVERY = 256  # records between index entries


def _day_of(received_at_ms: int) -> str:
    return datetime.fromtimestamp(received_at_ms / 1000.0, tz=timezone.utc).strftime("%Y%m%d")


class NodeStore:
    """Single-writer store for one node's logs."""

    def __init__(self, root: Path, node_id: int):
        self.node_id = node_id
        self.dir = root / "nodes" / str(node_id)
        self.dir.mkdir(parents=True, exist_ok=True)
        self._records_fh = None
        self._index_fh = None
        self._open_day: str | None = None
        self._records_in_file = 0
        self.malformed_lines = 0

    # -- records ---------------------------------------------------------

    def _roll(self, day: str) -> None:
        self.close()
        path = self.dir / f"records-{day}.jsonl"
        self._records_in_file = self._count_lines(path)
        self._records_fh = open(path, "a", encoding="utf-8")
        self._index_fh = open(self.dir / f"records-{day}.idx", "a", encoding="utf-8")
        self._open_day = day

    def append_record(self, record: dict) -> None:
        day = _day_of(record["received_at"])
        if day != self._open_day:
            self._roll(day)
        if self._records_in_file % INDEX_EVERY == 0:
            offset = self._records_fh.tell()
            self._index_fh.write(f"{record['received_at']} {offset}\n")
            self._index_fh.flush()
        self._records_fh.write(json.dumps(record, separators=(",", ":")) + "\n")
        self._records_fh.flush()
        self._records_in_file += 1

    def _record_files(self) -> list[Path]:
        return sorted(self.dir.glob("records-*.jsonl"))

    def _parse(self, line: str) -> dict | None:
        # A crash can leave one partial trailing line; skip it, count it.
        line = line.strip()
        if not line:
            return None
        try:
            return json.loads(line)
        except json.JSONDecodeError:
            self.malformed_lines += 1
            return None

    def _count_lines(self, path: Path) -> int:
        if not path.exists():
            return 0
        with open(path, "r", encoding="utf-8") as fh:
            return sum(1 for line in fh if self._parse(line) is not None)

    def record_count(self) -> int:
        return sum(self._count_lines(p) for p in self._record_files())

    def last_record(self) -> dict | None:
        for path in reversed(self._record_files()):
            last = None
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    parsed = self._parse(line)
                    if parsed is not None:
                        last = parsed
            if last is not None:
                return last
        return None

    def _index_seek(self, path: Path, from_ms: int) -> int:
        """Byte offset of the last indexed record at or before from_ms."""
        idx = path.with_suffix(".idx")
        offset = 0
        if idx.exists():
            with open(idx, "r", encoding="utf-8") as fh:
                for line in fh:
                    try:
                        ts, off = line.split()
                    except ValueError:
                        continue
                    if int(ts) <= from_ms:
                        offset = int(off)
                    else:
                        break
        return offset

    def iter_records(self, from_ms: int | None = None, to_ms: int | None = None) -> Iterator[dict]:
        """Records with from_ms <= received_at < to_ms, in arrival order."""
        for path in self._record_files():
            day = path.stem.split("-", 1)[1]
            if to_ms is not None and day > _day_of(to_ms):
                break
            if from_ms is not None and day < _day_of(from_ms):
                continue
            with open(path, "r", encoding="utf-8") as fh:
                if from_ms is not None:
                    fh.seek(self._index_seek(path, from_ms))
                for line in fh:
                    record = self._parse(line)
                    if record is None:
                        continue
                    ts = record["received_at"]
                    if from_ms is not None and ts < from_ms:
                        continue
                    if to_ms is not None and ts >= to_ms:
                        return
                    yield record

    def iter_records_reversed(self) -> Iterator[dict]:
        """Newest-first scan (recovery helper; loads one day file at a time)."""
        for path in reversed(self._record_files()):
            with open(path, "r", encoding="utf-8") as fh:
                records = [r for r in (self._parse(ln) for ln in fh) if r is not None]
            yield from reversed(records)

    # -- profiles ----------------------------------------------------------

    def append_profile(self, version: int, profile_doc: dict, updated_at: int) -> None:
        path = self.dir / "profiles.jsonl"
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(
                json.dumps(
                    {"version": version, "updated_at": updated_at, "profile": profile_doc},
                    separators=(",", ":"),
                )
                + "\n"
            )
            fh.flush()

    def profile_history(self) -> list[dict]:
        path = self.dir / "profiles.jsonl"
        if not path.exists():
            return []
        with open(path, "r", encoding="utf-8") as fh:
            return [json.loads(ln) for ln in fh if ln.strip()]

    def current_profile(self) -> dict | None:
        history = self.profile_history()
        return history[-1] if history else None

    def profile_at_version(self, version: int) -> dict | None:
        for entry in self.profile_history():
            if entry["version"] == version:
                return entry
        return None

    # -- alerts ------------------------------------------------------------

    def append_alert_event(self, event: dict) -> None:
        path = self.dir / "alerts.jsonl"
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, separators=(",", ":")) + "\n")
            fh.flush()

    def alert_events(self) -> list[dict]:
        path = self.dir / "alerts.jsonl"
        if not path.exists():
            return []
        with open(path, "r", encoding="utf-8") as fh:
            return [json.loads(ln) for ln in fh if ln.strip()]

    def close(self) -> None:
        for fh in (self._records_fh, self._index_fh):
            if fh is not None:
                fh.close()
        self._records_fh = self._index_fh = None
        self._open_day = None


class Store:
    """Root of the gateway's on-disk state."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._nodes: dict[int, NodeStore] = {}

    def node(self, node_id: int) -> NodeStore:
        if node_id not in self._nodes:
            self._nodes[node_id] = NodeStore(self.root, node_id)
        return self._nodes[node_id]

    def node_ids(self) -> list[int]:
        nodes_dir = self.root / "nodes"
        if not nodes_dir.exists():
            return []
        out = []
        for child in nodes_dir.iterdir():
            if child.is_dir():
                try:
                    out.append(int(child.name))
                except ValueError:
                    continue
        return sorted(out)

    def close(self) -> None:
        for node in self._nodes.values():
            node.close()

    def fsync_all(self) -> None:
        """Best-effort directory sync (used by clean shutdown)."""
        for node in self._nodes.values():
            node.close()
        try:
            fd = os.open(self.root, os.O_RDONLY)
            try:
                os.fsync(fd)
            finally:
                os.close(fd)
        except OSError:
            pass
