"""Blind human-evaluation sessions and their on-disk store.

A session samples up to ``sample_size`` source sentences (each at most
``max_tokens`` tokens long), pairs every sampled sentence with the
translation from every system under judgment, and presents the resulting
items in a seeded random order so an annotator never knows which system
produced what. System identities live only in the server-side manifest;
annotator-facing payloads carry an opaque item id, the source, the
translation, and progress.

Persistence is a JSON manifest plus an append-only judgment log per
session: every accepted judgment is flushed and fsynced before it is
acknowledged, and a restart replays the log, so the store is the single
source of truth.
"""

from __future__ import annotations

import json
import os
import secrets
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCORE_RANGE = range(0, 6)
DEFAULT_SAMPLE_SIZE = 50
DEFAULT_MAX_TOKENS = 50


class SessionError(Exception):
    pass


class UnknownItemError(SessionError):
    pass


class DuplicateJudgmentError(SessionError):
    pass


@dataclass(frozen=True)
class EvalItem:
    item_id: str
    sentence_index: int
    system: str           # never serialized toward the annotator
    source_text: str
    translation_text: str


@dataclass
class EvalSession:
    session_id: str
    token: str
    annotator: str
    seed: int
    display_mode: str                   # "single" or "grouped"
    items: list[EvalItem]               # presentation order
    judgments: dict[str, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return len(self.items)

    @property
    def judged(self) -> int:
        return len(self.judgments)

    @property
    def complete(self) -> bool:
        return self.judged == self.total

    def next_unjudged(self) -> EvalItem | None:
        for item in self.items:
            if item.item_id not in self.judgments:
                return item
        return None

    def annotator_view(self, item: EvalItem) -> dict:
        """The only shape an annotator ever sees for an item."""
        return {
            "item_id": item.item_id,
            "source_text": item.source_text,
            "translation_text": item.translation_text,
            "progress": {"judged": self.judged, "total": self.total},
        }


def create_session(sources: list[str], systems: dict[str, list[str]], seed: int,
                   sample_size: int = DEFAULT_SAMPLE_SIZE,
                   max_tokens: int = DEFAULT_MAX_TOKENS,
                   annotator: str = "default",
                   display_mode: str = "single",
                   session_id: str | None = None,
                   token: str | None = None) -> EvalSession:
    """Sample sentences and lay out the blind presentation order.

    The order is a pure function of ``seed``. Raises SessionError on
    empty inputs or when any system does not cover every source.
    """
    if not sources:
        raise SessionError("no source sentences")
    if not systems:
        raise SessionError("no systems to judge")
    if display_mode not in ("single", "grouped"):
        raise SessionError(f"unknown display mode {display_mode!r}")
    for name, translations in systems.items():
        if len(translations) != len(sources):
            raise SessionError(
                f"system {name!r} covers {len(translations)} of {len(sources)} sentences")

    eligible = [i for i, s in enumerate(sources) if len(s.split()) <= max_tokens]
    if len(eligible) < sample_size:
        raise SessionError(
            f"only {len(eligible)} sentences of at most {max_tokens} tokens, "
            f"need {sample_size}")
    rng = np.random.default_rng(seed)
    sampled = sorted(int(i) for i in rng.choice(eligible, size=sample_size, replace=False))

    flat = [(idx, name) for idx in sampled for name in sorted(systems)]
    order = rng.permutation(len(flat))
    items = []
    for position, flat_idx in enumerate(order):
        sent_idx, system = flat[int(flat_idx)]
        items.append(EvalItem(
            item_id=f"item-{position:04d}",
            sentence_index=sent_idx,
            system=system,
            source_text=sources[sent_idx],
            translation_text=systems[system][sent_idx],
        ))
    return EvalSession(
        session_id=session_id or secrets.token_hex(8),
        token=token or secrets.token_hex(16),
        annotator=annotator,
        seed=seed,
        display_mode=display_mode,
        items=items,
    )


@dataclass
class SystemTally:
    counts: list[int]                    # c_0..c_5

    @property
    def judged(self) -> int:
        return sum(self.counts)

    @property
    def score_sum(self) -> int:
        return sum(k * c for k, c in enumerate(self.counts))

    @property
    def average(self) -> float:
        # integer arithmetic first, one float division at the end
        return self.score_sum / self.judged


@dataclass
class AggregateReport:
    annotator: str
    complete: bool
    systems: dict[str, SystemTally]


def aggregate(session: EvalSession, partial: bool = False) -> AggregateReport:
    """Per-system score histogram and average; reveals system labels."""
    if not session.judgments:
        raise SessionError("no judgments recorded")
    if not session.complete and not partial:
        raise SessionError(
            f"session has {session.judged}/{session.total} judgments; "
            "pass partial=True for an interim report")
    tallies: dict[str, SystemTally] = {}
    for item in session.items:
        score = session.judgments.get(item.item_id)
        if score is None:
            continue
        tally = tallies.setdefault(item.system, SystemTally(counts=[0] * 6))
        tally.counts[score] += 1
    return AggregateReport(annotator=session.annotator, complete=session.complete,
                           systems=tallies)


class SessionStore:
    """Disk-backed session registry; safe for concurrent per-session writes."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, EvalSession] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        for manifest in sorted(self.root.glob("*/manifest.json")):
            session = self._load(manifest.parent)
            self._sessions[session.session_id] = session
            self._locks[session.session_id] = threading.Lock()

    def _dir(self, session_id: str) -> Path:
        return self.root / session_id

    def create(self, *args, **kwargs) -> EvalSession:
        session = create_session(*args, **kwargs)
        sdir = self._dir(session.session_id)
        sdir.mkdir(parents=True, exist_ok=False)
        manifest = {
            "session_id": session.session_id,
            "token": session.token,
            "annotator": session.annotator,
            "seed": session.seed,
            "display_mode": session.display_mode,
            "items": [{
                "item_id": it.item_id,
                "sentence_index": it.sentence_index,
                "system": it.system,
                "source_text": it.source_text,
                "translation_text": it.translation_text,
            } for it in session.items],
        }
        tmp = sdir / "manifest.json.tmp"
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(manifest, f, ensure_ascii=False, indent=1)
            f.flush()
            os.fsync(f.fileno())
        tmp.rename(sdir / "manifest.json")
        (sdir / "judgments.log").touch()
        with self._registry_lock:
            self._sessions[session.session_id] = session
            self._locks[session.session_id] = threading.Lock()
        return session

    def _load(self, sdir: Path) -> EvalSession:
        manifest = json.loads((sdir / "manifest.json").read_text(encoding="utf-8"))
        items = [EvalItem(item_id=d["item_id"], sentence_index=d["sentence_index"],
                          system=d["system"], source_text=d["source_text"],
                          translation_text=d["translation_text"])
                 for d in manifest["items"]]
        session = EvalSession(
            session_id=manifest["session_id"], token=manifest["token"],
            annotator=manifest["annotator"], seed=manifest["seed"],
            display_mode=manifest.get("display_mode", "single"), items=items)
        log = sdir / "judgments.log"
        if log.exists():
            known = {it.item_id for it in items}
            for line in log.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                entry = json.loads(line)
                if entry["item_id"] in known:
                    session.judgments[entry["item_id"]] = entry["score"]
        return session

    def get(self, session_id: str) -> EvalSession:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise SessionError(f"unknown session {session_id!r}") from None

    def ids(self) -> list[str]:
        return sorted(self._sessions)

    def record_judgment(self, session_id: str, item_id: str, score: int,
                        overwrite: bool = False) -> dict:
        """Persist one judgment durably, then acknowledge.

        Re-submitting the identical score is an idempotent no-op; changing
        a score requires ``overwrite``.
        """
        session = self.get(session_id)
        if not isinstance(score, int) or score not in SCORE_RANGE:
            raise SessionError(f"score must be an integer 0..5, got {score!r}")
        with self._locks[session_id]:
            if all(it.item_id != item_id for it in session.items):
                raise UnknownItemError(f"unknown item {item_id!r}")
            previous = session.judgments.get(item_id)
            duplicate = previous == score
            if previous is not None and previous != score and not overwrite:
                raise DuplicateJudgmentError(
                    f"{item_id} already scored {previous}; overwrite required")
            if not duplicate:
                log = self._dir(session_id) / "judgments.log"
                with open(log, "a", encoding="utf-8") as f:
                    f.write(json.dumps({"item_id": item_id, "score": score}) + "\n")
                    f.flush()
                    os.fsync(f.fileno())
                session.judgments[item_id] = score
        return {"ok": True, "duplicate": duplicate,
                "progress": {"judged": session.judged, "total": session.total}}
