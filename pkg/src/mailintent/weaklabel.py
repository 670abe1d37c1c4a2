"""Interaction-derived weak labeling rules and the labeling-quality audit.

Three deterministic rules, one per intent:

* ``reply_with_attachment`` — a message is a request for information if some
  reply to it carries a non-trivial attachment;
* ``subject_matched_schedule`` — a message proposes a meeting if a later
  message shares its normalized subject and that subject matches a calendar
  entry (the earlier message takes the label);
* ``reply_to_flagged`` — a message promises an action if it replies to a
  message that had a follow-up flag set.

Every rule is total: messages it does not fire on receive an explicit negative
assignment with provenance "discarded".
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from mailintent.corpus import (
    Attachment,
    Corpus,
    INTENT_PROMISE_ACTION,
    INTENT_REQUEST_INFO,
    INTENT_SCHEDULE_MEETING,
)

RULE_REPLY_WITH_ATTACHMENT = "reply_with_attachment"
RULE_SUBJECT_MATCHED_SCHEDULE = "subject_matched_schedule"
RULE_REPLY_TO_FLAGGED = "reply_to_flagged"
DISCARDED = "discarded"

TRIVIAL_ATTACHMENT_KINDS = frozenset({"image", "signature", "contact"})

_REPLY_PREFIX = re.compile(r"^(re|fw|fwd)\s*:\s*", re.IGNORECASE)


class GoldCoverageError(LookupError):
    """An evaluated assignment has no gold label."""


@dataclass(frozen=True, slots=True)
class WeakLabelAssignment:
    message_id: str
    intent: str
    label: int  # 1 positive, 0 negative
    provenance: str


@dataclass(frozen=True)
class QualityReport:
    """2x2 confusion of weak labels against gold, positives first."""

    intent: str
    true_positive: int
    false_positive: int
    false_negative: int
    true_negative: int

    @property
    def total(self) -> int:
        return self.true_positive + self.false_positive + self.false_negative + self.true_negative

    @property
    def accuracy(self) -> float:
        return (self.true_positive + self.true_negative) / self.total

    def to_record(self) -> dict:
        return {
            "intent": self.intent,
            "true_positive": self.true_positive,
            "false_positive": self.false_positive,
            "false_negative": self.false_negative,
            "true_negative": self.true_negative,
            "accuracy": self.accuracy,
        }


def is_trivial_attachment(attachment: Attachment) -> bool:
    """Attachments unlikely to carry requested content: images, signatures,
    contact cards. Anything else (documents, "other") counts as substantive."""
    return attachment.kind in TRIVIAL_ATTACHMENT_KINDS


def normalize_subject(subject: str) -> str:
    """Casefold, trim, and strip reply/forward prefixes repeatedly."""
    out = subject.strip()
    while True:
        stripped = _REPLY_PREFIX.sub("", out, count=1)
        if stripped == out:
            break
        out = stripped
    return out.strip().casefold()


def _assignments(corpus: Corpus, intent: str, positives: set[str], rule: str) -> list[WeakLabelAssignment]:
    return [
        WeakLabelAssignment(
            message_id=m.id,
            intent=intent,
            label=1 if m.id in positives else 0,
            provenance=rule if m.id in positives else DISCARDED,
        )
        for m in corpus.messages
    ]


def label_request_information(corpus: Corpus) -> list[WeakLabelAssignment]:
    """A message is positive iff some reply to it carries an attachment that is
    not trivial."""
    positives: set[str] = set()
    for msg in corpus.messages:
        if msg.in_reply_to is None:
            continue
        if any(not is_trivial_attachment(att) for att in msg.attachments):
            positives.add(msg.in_reply_to)
    return _assignments(corpus, INTENT_REQUEST_INFO, positives, RULE_REPLY_WITH_ATTACHMENT)


def label_schedule_meeting(corpus: Corpus) -> list[WeakLabelAssignment]:
    """A message is positive iff its normalized subject matches a calendar
    entry and a strictly later message shares that subject (the later one is
    the confirmation; the earlier one proposed the meeting)."""
    scheduled = {normalize_subject(e.subject) for e in corpus.calendar}
    latest: dict[str, int] = {}
    for msg in corpus.messages:
        subject = normalize_subject(msg.subject)
        if subject in scheduled:
            latest[subject] = max(latest.get(subject, msg.timestamp), msg.timestamp)
    positives = {
        msg.id
        for msg in corpus.messages
        if normalize_subject(msg.subject) in latest
        and msg.timestamp < latest[normalize_subject(msg.subject)]
    }
    return _assignments(corpus, INTENT_SCHEDULE_MEETING, positives, RULE_SUBJECT_MATCHED_SCHEDULE)


def label_promise_action(corpus: Corpus) -> list[WeakLabelAssignment]:
    """A message is positive iff it replies to a message whose follow-up flag
    was set."""
    positives = {
        msg.id
        for msg in corpus.messages
        if msg.in_reply_to is not None and corpus.by_id[msg.in_reply_to].follow_up_flag
    }
    return _assignments(corpus, INTENT_PROMISE_ACTION, positives, RULE_REPLY_TO_FLAGGED)


LABELING_FUNCTIONS = {
    INTENT_REQUEST_INFO: label_request_information,
    INTENT_SCHEDULE_MEETING: label_schedule_meeting,
    INTENT_PROMISE_ACTION: label_promise_action,
}


def label_all_intents(corpus: Corpus) -> list[WeakLabelAssignment]:
    out: list[WeakLabelAssignment] = []
    for intent in LABELING_FUNCTIONS:
        out.extend(LABELING_FUNCTIONS[intent](corpus))
    return out


def evaluate_labeling(assignments, gold) -> QualityReport:
    """Confusion counts of the given assignments against gold labels.

    ``gold`` maps message id -> bool, or (message id, intent) -> bool as stored
    on a corpus. All assignments must share one intent and every evaluated id
    must be covered by gold."""
    assignments = list(assignments)
    if not assignments:
        raise ValueError("no assignments to evaluate")
    intents = {a.intent for a in assignments}
    if len(intents) != 1:
        raise ValueError(f"assignments mix intents: {sorted(intents)}")
    intent = intents.pop()
    if gold and isinstance(next(iter(gold)), tuple):
        gold = {mid: val for (mid, it), val in gold.items() if it == intent}
    counts = {(1, 1): 0, (1, 0): 0, (0, 1): 0, (0, 0): 0}
    for a in assignments:
        if a.message_id not in gold:
            raise GoldCoverageError(f"no gold label for message {a.message_id!r}")
        counts[(a.label, int(gold[a.message_id]))] += 1
    return QualityReport(
        intent=intent,
        true_positive=counts[(1, 1)],
        false_positive=counts[(1, 0)],
        false_negative=counts[(0, 1)],
        true_negative=counts[(0, 0)],
    )


def balanced_audit_sample(assignments, gold, size: int, seed: int = 0) -> list[WeakLabelAssignment]:
    """Draw an equal number of weak-positive and weak-negative assignments
    (size // 2 each) restricted to gold-covered ids, mirroring a manual audit
    over a balanced sample."""
    intents = {a.intent for a in assignments}
    if len(intents) != 1:
        raise ValueError(f"assignments mix intents: {sorted(intents)}")
    intent = intents.pop()
    if gold and isinstance(next(iter(gold)), tuple):
        gold = {mid: val for (mid, it), val in gold.items() if it == intent}
    covered = [a for a in assignments if a.message_id in gold]
    positives = [a for a in covered if a.label == 1]
    negatives = [a for a in covered if a.label == 0]
    half = size // 2
    if len(positives) < half or len(negatives) < half:
        raise ValueError(
            f"audit sample of {size} needs {half} per side, have "
            f"{len(positives)} positives / {len(negatives)} negatives"
        )
    rng = np.random.default_rng(seed)
    pos_idx = rng.choice(len(positives), size=half, replace=False)
    neg_idx = rng.choice(len(negatives), size=half, replace=False)
    return [positives[i] for i in pos_idx] + [negatives[i] for i in neg_idx]


def save_assignments(assignments, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in assignments:
            fh.write(
                json.dumps(
                    {
                        "message_id": a.message_id,
                        "intent": a.intent,
                        "label": a.label,
                        "provenance": a.provenance,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def load_assignments(path: str | Path) -> list[WeakLabelAssignment]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            out.append(
                WeakLabelAssignment(
                    message_id=rec["message_id"],
                    intent=rec["intent"],
                    label=int(rec["label"]),
                    provenance=rec["provenance"],
                )
            )
    return out
