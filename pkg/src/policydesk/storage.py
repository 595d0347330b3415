"""Embedded transactional record store.

Records are (kind, id, payload, parent_refs, revision) tuples.  The store
guarantees:

* serializable transactions — a store-wide mutex is held from the first
  write-capable operation to commit, and nested ``transaction()`` calls on
  the same thread join the open transaction (commit happens only at the
  outermost exit, any exception aborts the whole thing);
* a referential delete guard — a record cannot be deleted while any other
  record lists it in ``parent_refs``, and a record cannot be written with a
  parent_ref that does not resolve;
* durable monotonic counters (request ids and friends) that commit
  atomically with the records that use them.

Two implementations: an in-memory store for fast tests and demos, and a
sqlite-backed store whose commit is atomic across crash/restart.
"""

from __future__ import annotations

import json
import sqlite3
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field

from .errors import HasChildRecords, StorageUnavailable, UnknownEntity

# Entity kinds (closed set; shared vocabulary across modules).
KIND_PRODUCT = "product"
KIND_POLICY = "policy"
KIND_TEMPLATE = "template"
KIND_TEMPLATE_VERSION = "template_version"
KIND_SCHEMA = "schema"
KIND_CUSTOMER = "customer"
KIND_SUBSCRIPTION = "subscription"
KIND_CUSTOMER_POLICY = "customer_policy"
KIND_OBJECT = "object"
KIND_PACKAGE = "package"
KIND_PEP = "pep"
KIND_USER = "user"
KIND_GRANT = "grant"
KIND_REQUEST = "request"
KIND_NOTIFICATION = "notification"
KIND_FILE = "file"

Ref = tuple[str, str]


@dataclass(frozen=True)
class StoredRecord:
    kind: str
    entity_id: str
    payload: dict
    parent_refs: tuple[Ref, ...] = ()
    revision: int = 1


@dataclass
class _TxnState:
    # staged writes: key -> record (put) or None (delete)
    writes: dict[Ref, StoredRecord | None] = field(default_factory=dict)
    counters: dict[str, int] = field(default_factory=dict)
    depth: int = 0


class Transaction:
    """View over committed state plus this transaction's staged writes."""

    def __init__(self, store: "MemoryStore", state: _TxnState):
        self._store = store
        self._state = state

    def get(self, kind: str, entity_id: str) -> StoredRecord | None:
        key = (kind, entity_id)
        if key in self._state.writes:
            return self._state.writes[key]
        return self._store._records.get(key)

    def require(self, kind: str, entity_id: str) -> StoredRecord:
        record = self.get(kind, entity_id)
        if record is None:
            raise UnknownEntity(f"no {kind} {entity_id!r}", kind=kind, entity_id=entity_id)
        return record

    def exists(self, kind: str, entity_id: str) -> bool:
        return self.get(kind, entity_id) is not None

    def list(self, kind: str) -> list[StoredRecord]:
        seen: dict[Ref, StoredRecord] = {
            key: rec for key, rec in self._store._records.items() if key[0] == kind
        }
        for key, rec in self._state.writes.items():
            if key[0] != kind:
                continue
            if rec is None:
                seen.pop(key, None)
            else:
                seen[key] = rec
        return sorted(seen.values(), key=lambda r: r.entity_id)

    def put(self, kind: str, entity_id: str, payload: dict, parent_refs: tuple[Ref, ...] = ()) -> StoredRecord:
        parent_refs = tuple(parent_refs)
        for ref in parent_refs:
            if (ref[0], ref[1]) == (kind, entity_id):
                continue
            if self.get(ref[0], ref[1]) is None:
                raise UnknownEntity(
                    f"parent ref {ref[0]}:{ref[1]} does not resolve", kind=ref[0], entity_id=ref[1]
                )
        previous = self.get(kind, entity_id)
        revision = (previous.revision + 1) if previous else 1
        record = StoredRecord(kind, entity_id, payload, parent_refs, revision)
        self._state.writes[(kind, entity_id)] = record
        return record

    def delete(self, kind: str, entity_id: str) -> None:
        key = (kind, entity_id)
        if self.get(kind, entity_id) is None:
            raise UnknownEntity(f"no {kind} {entity_id!r}", kind=kind, entity_id=entity_id)
        children = self._children_of(key)
        if children:
            raise HasChildRecords(
                f"{kind} {entity_id!r} still referenced",
                kind=kind,
                entity_id=entity_id,
                children=sorted(f"{k}:{i}" for k, i in children),
            )
        self._state.writes[key] = None

    def children_of(self, kind: str, entity_id: str) -> list[Ref]:
        return sorted(self._children_of((kind, entity_id)))

    def _children_of(self, key: Ref) -> set[Ref]:
        children: set[Ref] = set()
        for child_key in self._store._children.get(key, ()):
            if child_key in self._state.writes:
                staged = self._state.writes[child_key]
                if staged is not None and key in staged.parent_refs:
                    children.add(child_key)
            else:
                children.add(child_key)
        for child_key, staged in self._state.writes.items():
            if staged is not None and key in staged.parent_refs:
                children.add(child_key)
        return children

    def next_value(self, counter: str) -> int:
        current = self._state.counters.get(counter)
        if current is None:
            current = self._store._counters.get(counter, 0)
        value = current + 1
        self._state.counters[counter] = value
        return value

    def peek_counter(self, counter: str) -> int:
        if counter in self._state.counters:
            return self._state.counters[counter]
        return self._store._counters.get(counter, 0)


class MemoryStore:
    """In-memory implementation; no durability, full transaction semantics."""

    def __init__(self):
        self._records: dict[Ref, StoredRecord] = {}
        self._children: dict[Ref, set[Ref]] = {}
        self._counters: dict[str, int] = {}
        self._lock = threading.Lock()
        self._local = threading.local()

    @contextmanager
    def transaction(self):
        state: _TxnState | None = getattr(self._local, "txn", None)
        if state is not None:
            state.depth += 1
            try:
                yield Transaction(self, state)
            finally:
                state.depth -= 1
            return
        self._lock.acquire()
        state = _TxnState()
        self._local.txn = state
        try:
            yield Transaction(self, state)
            self._commit(state)
        finally:
            self._local.txn = None
            self._lock.release()

    def _commit(self, state: _TxnState) -> None:
        for key, record in state.writes.items():
            old = self._records.get(key)
            if old is not None:
                for ref in old.parent_refs:
                    self._children.get(ref, set()).discard(key)
            if record is None:
                self._records.pop(key, None)
            else:
                self._records[key] = record
                for ref in record.parent_refs:
                    self._children.setdefault(ref, set()).add(key)
        self._counters.update(state.counters)

    def close(self) -> None:
        pass


class SqliteStore(MemoryStore):
    """Durable store on stdlib sqlite3.

    The in-memory maps act as a cache loaded at open; sqlite is the source
    of truth and commits atomically, so a crash between ``BEGIN`` and
    ``COMMIT`` leaves no partial transaction after restart.
    """

    def __init__(self, path: str):
        super().__init__()
        self.path = str(path)
        try:
            self._conn = sqlite3.connect(self.path, check_same_thread=False, isolation_level=None)
            self._conn.execute("PRAGMA journal_mode=WAL")
            self._conn.execute("PRAGMA synchronous=FULL")
            self._init_schema()
            self._load()
        except sqlite3.Error as exc:
            raise StorageUnavailable(f"cannot open store at {self.path}: {exc}") from exc

    def _init_schema(self) -> None:
        self._conn.executescript(
            """
            CREATE TABLE IF NOT EXISTS records (
                kind TEXT NOT NULL, id TEXT NOT NULL, payload TEXT NOT NULL,
                refs TEXT NOT NULL, revision INTEGER NOT NULL,
                PRIMARY KEY (kind, id)
            );
            CREATE TABLE IF NOT EXISTS counters (
                name TEXT PRIMARY KEY, value INTEGER NOT NULL
            );
            """
        )

    def _load(self) -> None:
        for kind, entity_id, payload, refs, revision in self._conn.execute(
            "SELECT kind, id, payload, refs, revision FROM records"
        ):
            record = StoredRecord(
                kind,
                entity_id,
                json.loads(payload),
                tuple((k, i) for k, i in json.loads(refs)),
                revision,
            )
            key = (kind, entity_id)
            self._records[key] = record
            for ref in record.parent_refs:
                self._children.setdefault(ref, set()).add(key)
        for name, value in self._conn.execute("SELECT name, value FROM counters"):
            self._counters[name] = value

    def _commit(self, state: _TxnState) -> None:
        if self._conn is None:
            raise StorageUnavailable("store is closed")
        try:
            self._conn.execute("BEGIN IMMEDIATE")
            for (kind, entity_id), record in state.writes.items():
                if record is None:
                    self._conn.execute(
                        "DELETE FROM records WHERE kind=? AND id=?", (kind, entity_id)
                    )
                else:
                    self._conn.execute(
                        "INSERT OR REPLACE INTO records (kind, id, payload, refs, revision)"
                        " VALUES (?, ?, ?, ?, ?)",
                        (
                            kind,
                            entity_id,
                            json.dumps(record.payload, sort_keys=True),
                            json.dumps([list(r) for r in record.parent_refs]),
                            record.revision,
                        ),
                    )
            for name, value in state.counters.items():
                self._conn.execute(
                    "INSERT OR REPLACE INTO counters (name, value) VALUES (?, ?)", (name, value)
                )
            self._sync_to_disk()
        except Exception:
            self._conn.execute("ROLLBACK")
            raise
        super()._commit(state)

    def _sync_to_disk(self) -> None:
        # Overridable fault-injection point in tests; the default is the real commit.
        self._conn.execute("COMMIT")

    def close(self) -> None:
        if self._conn is not None:
            self._conn.close()
            self._conn = None  # type: ignore[assignment]
