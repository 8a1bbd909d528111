"""Annotation sessions: queue, budget, idempotent labeling, recovery.

A session is persisted as an append-only event log (create, label,
close) replayed on startup, so an acked label is never lost across a
crash.  The oracle sink drives the very same session machinery,
answering from the hidden oracle labels, so automated and human
annotation share one code path.
"""

from __future__ import annotations

import json
import os
import time
import uuid
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .errors import AnnotationRefusedError, CfaugError, ContractError
from .perturb import Counterfactual

OPEN = "open"
EXHAUSTED = "exhausted"
CLOSED = "closed"


class UnknownSessionError(CfaugError):
    pass


class UnknownItemError(CfaugError):
    pass


class BudgetExhaustedError(CfaugError):
    pass


class LabelValidationError(CfaugError):
    pass


@dataclass(frozen=True)
class SessionItem:
    id: str
    origin_id: str
    type: str
    text: str
    tokens: list
    original_text: str
    origin_label: int

    def payload(self) -> dict:
        """What an annotator may see; oracle labels are never included."""
        return {
            "item_id": self.id,
            "original_text": self.original_text,
            "counterfactual_text": self.text,
            "type": self.type,
            "origin_label": self.origin_label,
        }


def session_item_from_counterfactual(
    cf: Counterfactual, origin_text: str, origin_label: int
) -> SessionItem:
    return SessionItem(
        id=cf.id,
        origin_id=cf.origin_id,
        type=cf.type,
        text=cf.text,
        tokens=[{"surface": t.surface, "tags": sorted(t.tags)} for t in cf.tokens],
        original_text=origin_text,
        origin_label=origin_label,
    )


@dataclass
class Session:
    session_id: str
    items: dict[str, SessionItem]
    queue: list[str]
    budget: int
    export_source: str
    labeled: dict[str, dict] = field(default_factory=dict)
    closed: bool = False

    @property
    def state(self) -> str:
        if self.closed:
            return CLOSED
        return EXHAUSTED if len(self.labeled) >= self.budget else OPEN

    def pending(self) -> list[str]:
        return [i for i in self.queue if i not in self.labeled]


class SessionStore:
    """Sessions backed by per-session append-only event logs.

    ``directory=None`` keeps everything in memory (used by the oracle
    sink inside experiment runs); the HTTP service always runs with a
    directory so acked labels survive restarts.
    """

    def __init__(self, directory: str | os.PathLike | None = None):
        self.directory = str(directory) if directory is not None else None
        self.sessions: dict[str, Session] = {}
        if self.directory is not None:
            os.makedirs(self.directory, exist_ok=True)
            self._replay()

    # -- persistence ------------------------------------------------------

    def _log_path(self, session_id: str) -> str:
        return os.path.join(self.directory, f"{session_id}.events.jsonl")

    def _append(self, session_id: str, event: dict) -> None:
        if self.directory is None:
            return
        with open(self._log_path(session_id), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, ensure_ascii=False, separators=(",", ":")) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _replay(self) -> None:
        for name in sorted(os.listdir(self.directory)):
            if not name.endswith(".events.jsonl"):
                continue
            with open(os.path.join(self.directory, name), encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        self._apply(json.loads(line))

    def _apply(self, event: dict) -> None:
        kind = event["event"]
        if kind == "create":
            items = {d["id"]: SessionItem(**d) for d in event["items"]}
            self.sessions[event["session_id"]] = Session(
                session_id=event["session_id"],
                items=items,
                queue=list(event["selection"]),
                budget=event["budget"],
                export_source=event.get("export_source", "human"),
            )
        elif kind == "label":
            session = self.sessions[event["session_id"]]
            session.labeled[event["item_id"]] = {
                "label": event["label"],
                "timestamp": event["timestamp"],
            }
        elif kind == "close":
            self.sessions[event["session_id"]].closed = True

    # -- operations -------------------------------------------------------

    def create_session(
        self,
        items: Sequence[SessionItem],
        selection: Sequence[str],
        budget: int,
        export_source: str = "human",
    ) -> Session:
        if budget < 1:
            raise LabelValidationError("budget must be >= 1")
        by_id = {it.id: it for it in items}
        unknown = [i for i in selection if i not in by_id]
        if unknown:
            raise UnknownItemError(f"selection ids not in pool: {unknown[:3]}")
        if len(set(selection)) != len(selection):
            raise LabelValidationError("selection contains duplicate ids")
        session_id = uuid.uuid4().hex
        event = {
            "event": "create",
            "session_id": session_id,
            "items": [vars(by_id[i]) for i in selection],
            "selection": list(selection),
            "budget": budget,
            "export_source": export_source,
            "timestamp": time.time(),
        }
        self._apply(event)
        self._append(session_id, event)
        return self.sessions[session_id]

    def _get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise UnknownSessionError(f"no session {session_id!r}")
        return session

    def next_item(self, session_id: str) -> dict:
        """Head of the pending queue, idempotent until that item is labeled."""
        session = self._get(session_id)
        if session.state != OPEN:
            return {"status": session.state}
        pending = session.pending()
        if not pending:
            return {"status": "empty"}
        return {"status": "ok", "item": session.items[pending[0]].payload()}

    def submit_label(self, session_id: str, item_id: str, label: int) -> dict:
        session = self._get(session_id)
        if label not in (0, 1):
            raise LabelValidationError(f"label must be 0 or 1, got {label!r}")
        if item_id not in session.items:
            raise UnknownItemError(f"item {item_id!r} not in session queue")
        if item_id not in session.labeled:
            if session.state != OPEN:
                raise BudgetExhaustedError(f"session state is {session.state}")
            event = {
                "event": "label",
                "session_id": session_id,
                "item_id": item_id,
                "label": label,
                "timestamp": time.time(),
            }
            self._append(session_id, event)  # durable before any ack
            self._apply(event)
        return {
            "remaining_budget": session.budget - len(session.labeled),
            "next_available": bool(session.state == OPEN and session.pending()),
        }

    def progress(self, session_id: str) -> dict:
        session = self._get(session_id)
        return {
            "labeled": len(session.labeled),
            "budget": session.budget,
            "state": session.state,
        }

    def close_session(self, session_id: str) -> None:
        session = self._get(session_id)
        if not session.closed:
            event = {"event": "close", "session_id": session_id, "timestamp": time.time()}
            self._append(session_id, event)
            self._apply(event)

    def export(self, session_id: str) -> str:
        """Labeled items as JSON lines in the labeled-pool format."""
        session = self._get(session_id)
        lines = []
        for item_id in session.queue:
            if item_id not in session.labeled:
                continue
            item = session.items[item_id]
            lines.append(
                json.dumps(
                    {
                        "id": item.id,
                        "origin_id": item.origin_id,
                        "type": item.type,
                        "text": item.text,
                        "tokens": item.tokens,
                        "label": session.labeled[item_id]["label"],
                        "label_source": session.export_source,
                    },
                    ensure_ascii=False,
                    separators=(",", ":"),
                )
            )
        return "\n".join(lines) + "\n" if lines else ""


def drive_session(
    store: SessionStore,
    session_id: str,
    answer: Callable[[dict], int],
) -> dict[str, int]:
    """Label a session to exhaustion by answering each next_item payload."""
    labels: dict[str, int] = {}
    while True:
        nxt = store.next_item(session_id)
        if nxt["status"] != "ok":
            return labels
        payload = nxt["item"]
        label = answer(payload)
        store.submit_label(session_id, payload["item_id"], label)
        labels[payload["item_id"]] = label


@dataclass
class OracleSink:
    """Annotation sink answering from the hidden oracle labels.

    Runs every request through a real session so the simulated path and
    the human path exercise identical machinery.  The budget is a hard
    cap across calls.
    """

    origins: object  # grammar.Dataset; by_id lookup only
    budget: int
    store: SessionStore = field(default_factory=SessionStore)
    queries: int = 0

    def annotate(self, items: Sequence[Counterfactual]) -> dict[str, int]:
        if not items:
            return {}
        if self.queries + len(items) > self.budget:
            raise AnnotationRefusedError(
                f"budget {self.budget} cannot cover {self.queries} + {len(items)} labels"
            )
        oracle = {cf.id: cf.oracle_label for cf in items}
        session_items = []
        for cf in items:
            origin = self.origins.by_id(cf.origin_id)
            session_items.append(
                session_item_from_counterfactual(cf, origin.text, origin.label)
            )
        session = self.store.create_session(
            session_items,
            [cf.id for cf in items],
            budget=len(items),
            export_source="oracle",
        )
        labels = drive_session(
            self.store, session.session_id, lambda payload: oracle[payload["item_id"]]
        )
        if len(labels) != len(items):
            raise ContractError("oracle session did not label every item")
        self.queries += len(labels)
        return labels
