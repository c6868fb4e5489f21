"""Action-label verification and human review sessions.

Automated verification asks a vision model a deterministic yes/no question
over evenly sampled frames. Human review sessions assign sampled items to
annotators and keep an append-only verdict log; the effective verdict per
item is a pure projection of that log (latest wins).
"""
from __future__ import annotations

import json
import random
import string
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus import FrameManifest, SegmentAnnotation
from .errors import AuthorizationError, NotFoundError, ProviderError, ValidationError
from .prompts import ACTION_VERIFICATION_PROMPT
from .providers import VisionProvider

VERDICTS = ("confirmed", "rejected", "unsure")


@dataclass(frozen=True)
class VerificationRecord:
    segment_ref: str
    action: str
    status: str  # Correct | Incorrect | Error
    raw_response: str
    biryani_type: str = ""

    def to_dict(self) -> dict:
        return {
            "segment": self.segment_ref,
            "action": self.action,
            "status": self.status,
            "response": self.raw_response,
            "biryani": self.biryani_type,
        }


def sample_frame_indices(frame_count: int, max_frames: int = 20) -> list[int]:
    """Up to ``max_frames`` evenly spaced indices over ``frame_count`` frames.

    Always includes the first and last frame when subsampling; indices are
    strictly increasing.
    """
    if max_frames < 1:
        raise ValidationError("max_frames must be >= 1")
    if frame_count < 1:
        raise ValidationError("frame_count must be >= 1")
    if frame_count <= max_frames:
        return list(range(frame_count))
    if max_frames == 1:
        return [0]
    span = frame_count - 1
    raw = [int(i * span / (max_frames - 1) + 0.5) for i in range(max_frames)]
    out = []
    for idx in raw:
        if not out or idx > out[-1]:
            out.append(idx)
    return out


def parse_yes_no(response: str) -> str:
    """Map a raw model response to Correct/Incorrect/Error.

    Only a single word equal to yes or no (after stripping surrounding
    whitespace, quotes, and punctuation) counts; everything else is an
    ambiguous Error.
    """
    word = response.strip().strip(string.punctuation + "“”‘’ ").lower()
    if word == "yes":
        return "Correct"
    if word == "no":
        return "Incorrect"
    return "Error"


def auto_verify(
    segment: SegmentAnnotation,
    action: str,
    vision_provider: VisionProvider,
    manifest: FrameManifest,
    max_frames: int = 20,
) -> VerificationRecord:
    """Check one action label against sampled frames of its segment."""
    if not action:
        raise ValidationError("action must be nonempty")
    frames = manifest.frames_for_interval(segment.start_s, segment.end_s)
    if not frames:
        raise ValidationError(
            f"segment {segment.video_id}:{segment.timestamp} has no frames in its manifest"
        )
    indices = sample_frame_indices(len(frames), max_frames)
    prompt = ACTION_VERIFICATION_PROMPT.format(action=action)
    segment_ref = f"{segment.video_id}:{segment.timestamp}"
    try:
        response = vision_provider.vision_analyze([frames[i] for i in indices], prompt)
    except ProviderError as exc:
        return VerificationRecord(segment_ref, action, "Error", f"provider failure: {exc}")
    return VerificationRecord(segment_ref, action, parse_yes_no(response), response)


def verification_statistics(records: Sequence[VerificationRecord]) -> dict:
    """Counts and percentages by status, overall and per biryani type.

    Percentages use the Correct+Incorrect base (two decimals); Error
    records are counted separately.
    """

    def bucket(rs: Sequence[VerificationRecord]) -> dict:
        correct = sum(1 for r in rs if r.status == "Correct")
        incorrect = sum(1 for r in rs if r.status == "Incorrect")
        errors = sum(1 for r in rs if r.status == "Error")
        base = correct + incorrect
        return {
            "correct": correct,
            "incorrect": incorrect,
            "errors": errors,
            "correct_pct": round(100 * correct / base, 2) if base else 0.0,
            "incorrect_pct": round(100 * incorrect / base, 2) if base else 0.0,
        }

    by_type: dict[str, list[VerificationRecord]] = {}
    for r in records:
        if r.biryani_type:
            by_type.setdefault(r.biryani_type, []).append(r)
    out = bucket(records)
    out["by_type"] = {t: bucket(rs) for t, rs in sorted(by_type.items())}
    return out


@dataclass
class ReviewItem:
    """One model outcome queued for human confirmation."""

    item_id: str
    category: str  # "detected" | "no_difference"
    payload: dict = field(default_factory=dict)


@dataclass
class ReviewSession:
    session_id: str
    seed: int
    item_ids: list[str]
    assignments: dict[str, str]  # item id -> annotator id
    annotators: list[str]
    categories: dict[str, str]  # item id -> category
    verdict_log: list[dict] = field(default_factory=list)

    def effective_verdicts(self) -> dict[str, str]:
        out: dict[str, str] = {}
        for entry in self.verdict_log:
            out[entry["item_id"]] = entry["verdict"]
        return out

    def progress(self) -> dict:
        done = self.effective_verdicts()
        per_annotator = {}
        for annotator in self.annotators:
            assigned = [i for i in self.item_ids if self.assignments[i] == annotator]
            per_annotator[annotator] = {
                "assigned": len(assigned),
                "done": sum(1 for i in assigned if i in done),
            }
        return {"total": len(self.item_ids), "done": len(done), "annotators": per_annotator}

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "seed": self.seed,
            "item_ids": list(self.item_ids),
            "assignments": dict(self.assignments),
            "annotators": list(self.annotators),
            "categories": dict(self.categories),
        }


def create_review_session(
    pool: Sequence[ReviewItem],
    sample_size: int,
    annotators: Sequence[str],
    seed: int,
    session_id: str | None = None,
) -> ReviewSession:
    """Seeded sample without replacement, round-robin assigned to annotators."""
    if not annotators:
        raise ValidationError("at least one annotator required")
    if sample_size < 1 or sample_size > len(pool):
        raise ValidationError(f"sample_size must be in [1, {len(pool)}], got {sample_size}")
    rng = random.Random(seed)
    chosen = sorted(rng.sample(range(len(pool)), sample_size))
    items = [pool[i] for i in chosen]
    assignments = {
        item.item_id: annotators[idx % len(annotators)] for idx, item in enumerate(items)
    }
    return ReviewSession(
        session_id=session_id or f"session-{seed}-{sample_size}",
        seed=seed,
        item_ids=[item.item_id for item in items],
        assignments=assignments,
        annotators=list(annotators),
        categories={item.item_id: item.category for item in items},
    )


def record_verdict(
    session: ReviewSession, item_id: str, annotator_id: str, verdict: str
) -> dict:
    """Append one verdict to the session log; re-submission overwrites logically."""
    if item_id not in session.assignments:
        raise NotFoundError(f"item {item_id!r} is not part of session {session.session_id}")
    if session.assignments[item_id] != annotator_id:
        raise AuthorizationError(
            f"item {item_id!r} is assigned to {session.assignments[item_id]!r}, not {annotator_id!r}"
        )
    if verdict not in VERDICTS:
        raise ValidationError(f"verdict must be one of {VERDICTS}, got {verdict!r}")
    entry = {
        "item_id": item_id,
        "annotator_id": annotator_id,
        "verdict": verdict,
        "ts": time.time(),
    }
    session.verdict_log.append(entry)
    return {"item_id": item_id, "effective": verdict, "progress": session.progress()}


def session_accuracy(session: ReviewSession) -> dict:
    """Confirmed/rejected accuracy per model-outcome category.

    Unsure verdicts stay out of the accuracy base and are reported
    separately.
    """
    effective = session.effective_verdicts()
    table: dict[str, dict] = {}
    for category in ("detected", "no_difference"):
        ids = [i for i in session.item_ids if session.categories.get(i) == category]
        verdicts = [effective[i] for i in ids if i in effective]
        confirmed = sum(1 for v in verdicts if v == "confirmed")
        rejected = sum(1 for v in verdicts if v == "rejected")
        unsure = sum(1 for v in verdicts if v == "unsure")
        base = confirmed + rejected
        table[category] = {
            "confirmed": confirmed,
            "rejected": rejected,
            "unsure": unsure,
            "correct_pct": round(100 * confirmed / base, 1) if base else None,
            "incorrect_pct": round(100 * rejected / base, 1) if base else None,
        }
    return table


class SessionStore:
    """Disk persistence: session JSON plus an append-only verdict log.

    Verdict writes are serialized through one lock; readers see a
    consistent snapshot because the log is append-only.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()

    def _dir(self, session_id: str) -> Path:
        return self.root / session_id

    def save(self, session: ReviewSession) -> None:
        d = self._dir(session.session_id)
        d.mkdir(parents=True, exist_ok=True)
        (d / "session.json").write_text(
            json.dumps(session.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    def list_sessions(self) -> list[str]:
        return sorted(p.name for p in self.root.iterdir() if (p / "session.json").exists())

    def load(self, session_id: str) -> ReviewSession:
        path = self._dir(session_id) / "session.json"
        if not path.exists():
            raise NotFoundError(f"unknown session {session_id!r}")
        data = json.loads(path.read_text(encoding="utf-8"))
        session = ReviewSession(
            session_id=data["session_id"],
            seed=data["seed"],
            item_ids=data["item_ids"],
            assignments=data["assignments"],
            annotators=data["annotators"],
            categories=data["categories"],
        )
        log_path = self._dir(session_id) / "verdicts.jsonl"
        if log_path.exists():
            with log_path.open(encoding="utf-8") as fh:
                session.verdict_log = [json.loads(line) for line in fh if line.strip()]
        return session

    def append_verdict(self, session: ReviewSession, entry: dict) -> None:
        log_path = self._dir(session.session_id) / "verdicts.jsonl"
        with log_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")

    def record(self, session_id: str, item_id: str, annotator_id: str, verdict: str) -> dict:
        """Load-validate-append-persist one verdict under the writer lock."""
        with self._write_lock:
            session = self.load(session_id)
            ack = record_verdict(session, item_id, annotator_id, verdict)
            self.append_verdict(session, session.verdict_log[-1])
            return ack
