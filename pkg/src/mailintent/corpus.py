"""Email data model, corpus I/O, thread resolution, dataset construction, and a
synthetic corpus generator with controllable interaction noise.

The generator plants concrete user interactions (replies with attachments,
calendar-confirmed subjects, replies to flagged messages) so that the labeling
rules recover a per-intent signal whose agreement with the known gold intents
is controlled exactly by false-positive/false-negative rates. Message content
is a bag of template chunks: evidence tokens tied to each positive intent mixed
with background tokens, so text carries a learnable but imperfect signal that
is independent of the interaction noise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from mailintent.validation import check_positive_int, check_rate

INTENT_REQUEST_INFO = "request_info"
INTENT_SCHEDULE_MEETING = "schedule_meeting"
INTENT_PROMISE_ACTION = "promise_action"
INTENTS = (INTENT_REQUEST_INFO, INTENT_SCHEDULE_MEETING, INTENT_PROMISE_ACTION)

ATTACHMENT_KINDS = ("document", "image", "signature", "contact", "other")


class ParseError(ValueError):
    """A malformed record in a corpus file; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class IntegrityError(ValueError):
    """A reference inside a corpus does not resolve or violates ordering."""


class SizingError(ValueError):
    """A requested split size cannot be satisfied; carries the feasible maximum."""

    def __init__(self, message: str, feasible_max: int):
        super().__init__(f"{message} (feasible maximum: {feasible_max})")
        self.feasible_max = feasible_max


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Attachment:
    filename: str
    kind: str

    def __post_init__(self):
        if self.kind not in ATTACHMENT_KINDS:
            raise ValueError(f"unknown attachment kind {self.kind!r}")


@dataclass(frozen=True, slots=True)
class EmailMessage:
    id: str
    thread_id: str
    sender: str
    recipients: tuple[str, ...]
    subject: str
    body: str
    timestamp: int
    in_reply_to: str | None = None
    attachments: tuple[Attachment, ...] = ()
    follow_up_flag: bool = False


@dataclass(frozen=True, slots=True)
class CalendarEntry:
    subject: str
    start_time: int
    location: str
    attendees: tuple[str, ...]
    organizer: str

    def __post_init__(self):
        if not self.attendees:
            raise ValueError("calendar entry must have at least one attendee")


class Corpus:
    """Messages plus calendar entries and optional gold intent labels.

    Threads are resolved as the connected components of the reply graph;
    within each thread messages are ordered by (timestamp, id). Construction
    validates that every in_reply_to resolves to an earlier message declared
    in the same thread.
    """

    def __init__(self, messages, calendar=(), gold=None):
        self.messages: list[EmailMessage] = list(messages)
        self.calendar: list[CalendarEntry] = list(calendar)
        self.gold: dict[tuple[str, str], bool] = dict(gold) if gold else {}
        self.by_id: dict[str, EmailMessage] = {}
        for msg in self.messages:
            if msg.id in self.by_id:
                raise IntegrityError(f"duplicate message id {msg.id!r}")
            self.by_id[msg.id] = msg
        self._validate_replies()
        self._threads = self._resolve_threads()

    def _validate_replies(self) -> None:
        for msg in self.messages:
            if msg.in_reply_to is None:
                continue
            parent = self.by_id.get(msg.in_reply_to)
            if parent is None:
                raise IntegrityError(
                    f"message {msg.id!r} replies to unknown message {msg.in_reply_to!r}"
                )
            if parent.timestamp >= msg.timestamp:
                raise IntegrityError(
                    f"message {msg.id!r} replies to {parent.id!r} which is not earlier"
                )
            if parent.thread_id != msg.thread_id:
                raise IntegrityError(
                    f"message {msg.id!r} replies across threads "
                    f"({msg.thread_id!r} -> {parent.thread_id!r})"
                )

    def _resolve_threads(self) -> list[list[EmailMessage]]:
        parent_of: dict[str, str] = {m.id: m.id for m in self.messages}

        def find(x: str) -> str:
            while parent_of[x] != x:
                parent_of[x] = parent_of[parent_of[x]]
                x = parent_of[x]
            return x

        for msg in self.messages:
            if msg.in_reply_to is not None:
                ra, rb = find(msg.id), find(msg.in_reply_to)
                if ra != rb:
                    parent_of[ra] = rb
        groups: dict[str, list[EmailMessage]] = {}
        for msg in self.messages:
            groups.setdefault(find(msg.id), []).append(msg)
        threads = []
        for members in groups.values():
            members.sort(key=lambda m: (m.timestamp, m.id))
            threads.append(members)
        threads.sort(key=lambda ms: (ms[0].timestamp, ms[0].id))
        return threads

    def threads(self) -> list[list[EmailMessage]]:
        return self._threads

    def thread_partition(self) -> list[frozenset[str]]:
        return [frozenset(m.id for m in t) for t in self._threads]

    def replies_to(self, message_id: str) -> list[EmailMessage]:
        return [m for m in self.messages if m.in_reply_to == message_id]

    def gold_for(self, intent: str) -> dict[str, bool]:
        return {mid: val for (mid, it), val in self.gold.items() if it == intent}

    def gold_ids(self) -> list[str]:
        return sorted({mid for (mid, _intent) in self.gold})

    def __len__(self) -> int:
        return len(self.messages)


# ---------------------------------------------------------------------------
# corpus files: line-delimited JSON records
# ---------------------------------------------------------------------------


def _message_to_record(msg: EmailMessage) -> dict:
    return {
        "id": msg.id,
        "thread_id": msg.thread_id,
        "sender": msg.sender,
        "recipients": list(msg.recipients),
        "subject": msg.subject,
        "body": msg.body,
        "timestamp": msg.timestamp,
        "in_reply_to": msg.in_reply_to,
        "attachments": [{"filename": a.filename, "kind": a.kind} for a in msg.attachments],
        "follow_up_flag": msg.follow_up_flag,
    }


def _message_from_record(rec: dict) -> EmailMessage:
    return EmailMessage(
        id=rec["id"],
        thread_id=rec["thread_id"],
        sender=rec["sender"],
        recipients=tuple(rec["recipients"]),
        subject=rec["subject"],
        body=rec["body"],
        timestamp=int(rec["timestamp"]),
        in_reply_to=rec.get("in_reply_to"),
        attachments=tuple(Attachment(a["filename"], a["kind"]) for a in rec.get("attachments", [])),
        follow_up_flag=bool(rec.get("follow_up_flag", False)),
    )


def _iter_records(path: str | Path):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, f"invalid record: {exc.msg}") from exc


def load_corpus(
    messages_path: str | Path,
    calendar_path: str | Path | None = None,
    gold_path: str | Path | None = None,
) -> Corpus:
    """Load a corpus from line-delimited JSON files (messages, optionally
    calendar entries and gold labels)."""
    messages = []
    for lineno, rec in _iter_records(messages_path):
        try:
            messages.append(_message_from_record(rec))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(lineno, f"bad message record: {exc}") from exc
    calendar = []
    if calendar_path is not None:
        for lineno, rec in _iter_records(calendar_path):
            try:
                calendar.append(
                    CalendarEntry(
                        subject=rec["subject"],
                        start_time=int(rec["start_time"]),
                        location=rec.get("location", ""),
                        attendees=tuple(rec["attendees"]),
                        organizer=rec["organizer"],
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(lineno, f"bad calendar record: {exc}") from exc
    gold = {}
    if gold_path is not None:
        for lineno, rec in _iter_records(gold_path):
            try:
                gold[(rec["message_id"], rec["intent"])] = bool(rec["label"])
            except (KeyError, TypeError) as exc:
                raise ParseError(lineno, f"bad gold record: {exc}") from exc
    return Corpus(messages, calendar, gold)


def save_corpus(
    corpus: Corpus,
    messages_path: str | Path,
    calendar_path: str | Path | None = None,
    gold_path: str | Path | None = None,
) -> None:
    with open(messages_path, "w", encoding="utf-8") as fh:
        for msg in corpus.messages:
            fh.write(json.dumps(_message_to_record(msg), sort_keys=True) + "\n")
    if calendar_path is not None:
        with open(calendar_path, "w", encoding="utf-8") as fh:
            for entry in corpus.calendar:
                fh.write(
                    json.dumps(
                        {
                            "subject": entry.subject,
                            "start_time": entry.start_time,
                            "location": entry.location,
                            "attendees": list(entry.attendees),
                            "organizer": entry.organizer,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )
    if gold_path is not None:
        with open(gold_path, "w", encoding="utf-8") as fh:
            for (mid, intent), label in sorted(corpus.gold.items()):
                fh.write(
                    json.dumps(
                        {"message_id": mid, "intent": intent, "label": int(label)},
                        sort_keys=True,
                    )
                    + "\n"
                )


# ---------------------------------------------------------------------------
# synthetic generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntentNoise:
    """Noise of the planted interaction signal relative to the gold intent."""

    false_positive: float  # P(signal fires | intent absent)
    false_negative: float  # P(signal missing | intent present)

    def __post_init__(self):
        check_rate(self.false_positive, "false_positive")
        check_rate(self.false_negative, "false_negative")


@dataclass(frozen=True)
class SyntheticSpec:
    """Everything the generator needs; identical specs produce identical corpora.

    ``num_threads`` is the number of anchor messages (one per thread); each
    anchor optionally gets a parent, an attachment reply, and a schedule
    confirmation depending on the planted signals. Content knobs control how
    much evidence about the gold intents leaks into the message body.
    """

    num_threads: int
    priors: dict[str, float]
    noise: dict[str, IntentNoise] = field(default_factory=dict)
    vocab_size: int = 1000
    body_chunks: tuple[int, int] = (4, 8)
    seed: int = 0
    intent_pool_size: int = 60
    evidence_rate: float = 0.3
    distractor_rate: float = 0.05
    trivial_reply_rate: float = 0.1
    id_prefix: str = "t"

    def __post_init__(self):
        check_positive_int(self.num_threads, "num_threads")
        check_positive_int(self.vocab_size, "vocab_size")
        check_positive_int(self.intent_pool_size, "intent_pool_size")
        for intent, prior in self.priors.items():
            if intent not in INTENTS:
                raise ValueError(f"unknown intent {intent!r}")
            check_rate(prior, f"prior[{intent}]")
        for intent in self.noise:
            if intent not in INTENTS:
                raise ValueError(f"unknown intent {intent!r}")
        check_rate(self.evidence_rate, "evidence_rate")
        check_rate(self.distractor_rate, "distractor_rate")
        check_rate(self.trivial_reply_rate, "trivial_reply_rate")
        active = sum(1 for p in self.priors.values() if p > 0)
        if active * max(self.evidence_rate, self.distractor_rate) > 1.0:
            raise ValueError("evidence/distractor rates sum above 1 across active intents")
        lo, hi = self.body_chunks
        if not (1 <= lo <= hi):
            raise ValueError(f"invalid body_chunks range {self.body_chunks}")

    def active_intents(self) -> list[str]:
        return [i for i in INTENTS if self.priors.get(i, 0.0) > 0.0]


def calibrate_interaction_noise(
    pos_precision: float, neg_precision: float, positive_rate: float = 0.5
) -> tuple[float, float, float]:
    """Solve for (prior, false_positive, false_negative) such that, in
    expectation, P(intent | signal fired) = pos_precision, P(no intent |
    signal absent) = neg_precision, and the signal fires on ``positive_rate``
    of all messages. The audit accuracy on a sample balanced by signal is then
    (pos_precision + neg_precision) / 2."""
    a = check_rate(pos_precision, "pos_precision")
    b = check_rate(neg_precision, "neg_precision")
    q = check_rate(positive_rate, "positive_rate")
    prior = q * a + (1.0 - q) * (1.0 - b)
    if not 0.0 < prior < 1.0:
        raise ValueError("targets imply a degenerate intent prior")
    fn = 1.0 - q * a / prior
    fp = q * (1.0 - a) / (1.0 - prior)
    for name, rate in (("false_negative", fn), ("false_positive", fp)):
        if not 0.0 <= rate <= 1.0:
            raise ValueError(f"targets imply {name}={rate:.4f} outside [0, 1]")
    return prior, fp, fn


#: Default audit calibration targets per intent: (precision of rule positives,
#: precision of rule negatives). Balanced audit accuracy is their mean.
DEFAULT_AUDIT_TARGETS: dict[str, tuple[float, float]] = {
    INTENT_REQUEST_INFO: (0.36, 0.99),
    INTENT_SCHEDULE_MEETING: (0.46, 0.96),
    INTENT_PROMISE_ACTION: (0.31, 0.95),
}


def audit_calibrated_spec(
    num_threads: int,
    seed: int = 0,
    targets: dict[str, tuple[float, float]] | None = None,
    positive_rate: float = 0.5,
    **overrides,
) -> SyntheticSpec:
    """A spec whose labeling-rule audit accuracies match the given per-intent
    precision targets in expectation."""
    targets = DEFAULT_AUDIT_TARGETS if targets is None else targets
    priors = {}
    noise = {}
    for intent, (a, b) in targets.items():
        prior, fp, fn = calibrate_interaction_noise(a, b, positive_rate)
        priors[intent] = prior
        noise[intent] = IntentNoise(false_positive=fp, false_negative=fn)
    defaults = dict(evidence_rate=0.2, distractor_rate=0.03)
    defaults.update(overrides)
    return SyntheticSpec(num_threads=num_threads, priors=priors, noise=noise, seed=seed, **defaults)


_EVIDENCE_PREFIX = {
    INTENT_REQUEST_INFO: "req",
    INTENT_SCHEDULE_MEETING: "mtg",
    INTENT_PROMISE_ACTION: "act",
}

_TRIVIAL_ATTACHMENTS = (
    ("logo.png", "image"),
    ("signature.htm", "signature"),
    ("card.vcf", "contact"),
)


def _make_bodies(spec: SyntheticSpec, rng: np.random.Generator, gold: dict[str, np.ndarray]) -> list[str]:
    n = spec.num_threads
    lo, hi = spec.body_chunks
    active = spec.active_intents()
    chunk_counts = rng.integers(lo, hi + 1, n)
    pick = rng.random((n, hi))
    background = np.array([f"w{i:04d}" for i in range(spec.vocab_size)])
    pools = {
        intent: np.array(
            [f"{_EVIDENCE_PREFIX[intent]}{i:03d}" for i in range(spec.intent_pool_size)]
        )
        for intent in active
    }
    # chunk source: walk per-intent probability bands, background catches the rest
    source = np.full((n, hi), -1, dtype=np.int64)
    lower = np.zeros((n, 1))
    for k, intent in enumerate(active):
        width = np.where(gold[intent], spec.evidence_rate, spec.distractor_rate)[:, None]
        hit = (pick >= lower) & (pick < lower + width) & (source < 0)
        source[hit] = k
        lower = lower + width
    ev_idx = rng.integers(0, spec.intent_pool_size, (n, hi, 2))
    bg_idx = rng.integers(0, spec.vocab_size, (n, hi, 2))
    bodies = []
    for row in range(n):
        words = []
        for chunk in range(chunk_counts[row]):
            k = source[row, chunk]
            if k >= 0:
                pool = pools[active[k]]
                words.append(pool[ev_idx[row, chunk, 0]])
                words.append(pool[ev_idx[row, chunk, 1]])
            else:
                words.append(background[bg_idx[row, chunk, 0]])
                words.append(background[bg_idx[row, chunk, 1]])
        bodies.append(" ".join(words))
    return bodies


def generate_synthetic(spec: SyntheticSpec) -> Corpus:
    """Generate a corpus with known gold intents and planted interactions.

    For every anchor and every active intent, an interaction signal is drawn
    from the gold label through the spec's noise rates, and the corresponding
    concrete interaction is planted if and only if the signal fired:

    * request_info: a reply to the anchor carrying a document attachment;
    * schedule_meeting: a later reply sharing the anchor's subject plus a
      calendar entry for that subject;
    * promise_action: the anchor is made a reply to a flagged parent message.

    Gold labels are recorded for anchors only; helper messages carry no gold
    and never enter datasets built from this corpus.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.num_threads
    active = spec.active_intents()

    gold: dict[str, np.ndarray] = {}
    signal: dict[str, np.ndarray] = {}
    for intent in active:
        noise = spec.noise.get(intent, IntentNoise(0.0, 0.0))
        g = rng.random(n) < spec.priors[intent]
        fire_neg = rng.random(n) < noise.false_positive
        drop_pos = rng.random(n) < noise.false_negative
        gold[intent] = g
        signal[intent] = np.where(g, ~drop_pos, fire_neg)

    bodies = _make_bodies(spec, rng, gold)
    zeros = np.zeros(n, dtype=bool)
    s_ri = signal.get(INTENT_REQUEST_INFO, zeros)
    s_sm = signal.get(INTENT_SCHEDULE_MEETING, zeros)
    s_pa = signal.get(INTENT_PROMISE_ACTION, zeros)
    trivial_reply = (~s_ri) & (rng.random(n) < spec.trivial_reply_rate)
    trivial_kind = rng.integers(0, len(_TRIVIAL_ATTACHMENTS), n)
    num_users = max(4, min(500, n // 20 + 4))
    user_a = rng.integers(0, num_users, n)
    user_b = (user_a + 1 + rng.integers(0, num_users - 1, n)) % num_users

    messages: list[EmailMessage] = []
    calendar: list[CalendarEntry] = []
    gold_map: dict[tuple[str, str], bool] = {}

    for i in range(n):
        thread = f"{spec.id_prefix}{i:06d}"
        subject = f"{spec.id_prefix} topic {i}"
        base = 1_600_000_000 + i * 1_000
        sender = f"user{user_a[i]:03d}@example.com"
        peer = f"user{user_b[i]:03d}@example.com"
        parent_id = None
        if s_pa[i]:
            parent_id = f"{thread}.p"
            messages.append(
                EmailMessage(
                    id=parent_id,
                    thread_id=thread,
                    sender=peer,
                    recipients=(sender,),
                    subject=subject,
                    body="could you take care of this",
                    timestamp=base,
                    follow_up_flag=True,
                )
            )
        anchor_id = f"{thread}.m"
        messages.append(
            EmailMessage(
                id=anchor_id,
                thread_id=thread,
                sender=sender,
                recipients=(peer,),
                subject=subject if parent_id is None else f"RE: {subject}",
                body=bodies[i],
                timestamp=base + 60,
                in_reply_to=parent_id,
            )
        )
        if s_ri[i] or trivial_reply[i]:
            if s_ri[i]:
                attachment = Attachment(f"report{i}.docx", "document")
            else:
                filename, kind = _TRIVIAL_ATTACHMENTS[trivial_kind[i]]
                attachment = Attachment(filename, kind)
            messages.append(
                EmailMessage(
                    id=f"{thread}.r",
                    thread_id=thread,
                    sender=peer,
                    recipients=(sender,),
                    subject=f"RE: {subject}",
                    body="please find it attached",
                    timestamp=base + 120,
                    in_reply_to=anchor_id,
                    attachments=(attachment,),
                )
            )
        if s_sm[i]:
            messages.append(
                EmailMessage(
                    id=f"{thread}.c",
                    thread_id=thread,
                    sender=peer,
                    recipients=(sender,),
                    subject=f"RE: {subject}",
                    body="confirmed see you there",
                    timestamp=base + 180,
                    in_reply_to=anchor_id,
                )
            )
            calendar.append(
                CalendarEntry(
                    subject=subject,
                    start_time=base + 86_400,
                    location=f"room {i % 40}",
                    attendees=(sender, peer),
                    organizer=sender,
                )
            )
        for intent in active:
            gold_map[(anchor_id, intent)] = bool(gold[intent][i])

    return Corpus(messages, calendar, gold_map)


# ---------------------------------------------------------------------------
# examples and datasets
# ---------------------------------------------------------------------------

SOURCE_CLEAN = "clean"
SOURCE_WEAK = "weak"
SOURCE_CORRECTED = "corrected"


@dataclass(frozen=True)
class Example:
    """One training/evaluation instance: text plus a hard label or a soft
    target distribution, tagged with its supervision source."""

    id: str
    text: str
    label: int | None
    soft: tuple[float, ...] | None = None
    source: str = SOURCE_CLEAN

    def __post_init__(self):
        if self.label is None and self.soft is None:
            raise ValueError(f"example {self.id!r} has neither a label nor a soft target")
        if self.soft is not None and abs(sum(self.soft) - 1.0) > 1e-6:
            raise ValueError(f"soft target of example {self.id!r} does not sum to 1")

    def target(self, num_classes: int) -> np.ndarray:
        if self.soft is not None:
            return np.asarray(self.soft, dtype=np.float64)
        out = np.zeros(num_classes)
        out[self.label] = 1.0
        return out

    def hard_label(self) -> int:
        if self.label is not None:
            return self.label
        return int(np.argmax(self.soft))


@dataclass
class Dataset:
    clean: list[Example]
    weak: list[Example]
    dev: list[Example]
    test: list[Example]
    num_classes: int = 2
    intent: str | None = None

    def splits(self) -> dict[str, list[Example]]:
        return {"clean": self.clean, "weak": self.weak, "dev": self.dev, "test": self.test}

    def validate(self) -> None:
        seen: dict[str, str] = {}
        for name, examples in self.splits().items():
            for ex in examples:
                if ex.id in seen:
                    raise IntegrityError(
                        f"example {ex.id!r} appears in both {seen[ex.id]!r} and {name!r}"
                    )
                seen[ex.id] = name

    def clean_ratio(self) -> float:
        total = len(self.clean) + len(self.weak)
        return len(self.clean) / total if total else 1.0


def texts_and_labels(examples) -> tuple[list[str], np.ndarray]:
    return [e.text for e in examples], np.array([e.hard_label() for e in examples], dtype=np.int64)


def texts_and_targets(examples, num_classes: int) -> tuple[list[str], np.ndarray]:
    texts = [e.text for e in examples]
    targets = np.stack([e.target(num_classes) for e in examples]) if examples else np.zeros((0, num_classes))
    return texts, targets


def _balanced_take(ordered_ids, labels: dict[str, int], size: int, what: str) -> list[str]:
    """First ``size`` ids from ``ordered_ids`` with per-class quotas differing
    by at most one; an odd size gives the extra slot to the class with more
    candidates available (ties to the positive class)."""
    if size == 0:
        return []
    avail = {0: 0, 1: 0}
    for mid in ordered_ids:
        avail[labels[mid]] += 1
    want = {0: size // 2, 1: size // 2}
    if size % 2:
        want[1 if avail[1] >= avail[0] else 0] += 1
    have = {0: 0, 1: 0}
    picked = []
    for mid in ordered_ids:
        lab = labels[mid]
        if have[lab] < want[lab]:
            picked.append(mid)
            have[lab] += 1
            if len(picked) == size:
                return picked
    feasible = 2 * min(avail[0], avail[1]) + (1 if avail[0] != avail[1] else 0)
    raise SizingError(f"cannot draw {size} balanced {what} examples", feasible)


def _balanced_capacity(ids, labels: dict[str, int]) -> int:
    pos = sum(1 for i in ids if labels[i] == 1)
    neg = len(ids) - pos
    return 2 * min(pos, neg)


def _natural_take(ordered_ids, size: int, what: str) -> list[str]:
    if len(ordered_ids) < size:
        raise SizingError(f"cannot draw {size} {what} examples", len(ordered_ids))
    return list(ordered_ids[:size])


def build_dataset(
    corpus: Corpus,
    weak_labels,
    intent: str,
    clean_ratio: float | None = 0.1,
    seed: int = 0,
    *,
    clean_size: int | None = None,
    weak_size: int | None = None,
    dev_size: int | None = None,
    test_size: int | None = None,
    balance_eval: bool = True,
    weak_pool: str = "gold",
) -> Dataset:
    """Carve balanced clean/weak/dev/test splits out of a labeled corpus.

    ``weak_labels`` is a mapping message id -> {0, 1} or a list of weak label
    assignments (filtered to ``intent``). Gold-labeled ids supply the clean,
    dev, and test splits (balanced by gold label; negatives are down-sampled);
    the weak split is balanced by weak label and shares no ids with the other
    splits. When only one of ``clean_size``/``weak_size`` is given the other is
    derived from ``clean_ratio``; when neither is given the weak split takes
    the whole remaining pool and the clean size follows from the ratio.

    ``weak_pool`` selects which ids may enter the weak split: "gold" restricts
    to gold-covered ids (synthetic corpora mark the realistic message pool this
    way), "all" admits any weakly labeled id.
    """
    if intent not in INTENTS:
        raise ValueError(f"unknown intent {intent!r}")
    if clean_ratio is not None and not 0.0 < clean_ratio <= 1.0:
        raise ValueError(f"clean_ratio must be in (0, 1], got {clean_ratio}")
    if weak_pool not in ("gold", "all"):
        raise ValueError(f"weak_pool must be 'gold' or 'all', got {weak_pool!r}")

    weak_map = _normalize_weak_labels(weak_labels, intent)
    gold_map = {mid: int(val) for mid, val in corpus.gold_for(intent).items()}
    if not gold_map:
        raise ValueError(f"corpus has no gold labels for intent {intent!r}")

    rng = np.random.default_rng(seed)
    gold_order = [gold_map_id for gold_map_id in sorted(gold_map)]
    gold_order = [gold_order[i] for i in rng.permutation(len(gold_order))]

    capacity = _balanced_capacity(gold_order, gold_map)
    if dev_size is None:
        dev_size = max(2, capacity // 8)
    if test_size is None:
        test_size = max(2, capacity // 8)

    if balance_eval:
        dev_ids = _balanced_take(gold_order, gold_map, dev_size, "dev")
        rest = [i for i in gold_order if i not in set(dev_ids)]
        test_ids = _balanced_take(rest, gold_map, test_size, "test")
    else:
        dev_ids = _natural_take(gold_order, dev_size, "dev")
        rest = [i for i in gold_order if i not in set(dev_ids)]
        test_ids = _natural_take(rest, test_size, "test")
    used = set(dev_ids) | set(test_ids)
    clean_pool = [i for i in gold_order if i not in used]

    if weak_pool == "gold":
        weak_candidates = [i for i in clean_pool if i in weak_map]
    else:
        weak_order = sorted(weak_map)
        weak_order = [weak_order[i] for i in rng.permutation(len(weak_order))]
        weak_candidates = [i for i in weak_order if i not in used]

    clean_ids, clean_derived = _solve_split_sizes(
        clean_pool, weak_candidates, gold_map, weak_map, clean_ratio, clean_size, weak_size
    )
    taken = set(clean_ids)
    weak_final_pool = [i for i in weak_candidates if i not in taken]
    n_weak = _resolve_weak_count(
        len(clean_ids), clean_ratio, weak_size, weak_final_pool, weak_map, clean_derived
    )
    weak_ids = _balanced_take(weak_final_pool, weak_map, n_weak, "weak") if n_weak else []

    def gold_examples(ids):
        return [
            Example(id=i, text=corpus.by_id[i].body, label=gold_map[i], source=SOURCE_CLEAN)
            for i in ids
        ]

    dataset = Dataset(
        clean=gold_examples(clean_ids),
        weak=[
            Example(id=i, text=corpus.by_id[i].body, label=weak_map[i], source=SOURCE_WEAK)
            for i in weak_ids
        ],
        dev=gold_examples(dev_ids),
        test=gold_examples(test_ids),
        num_classes=2,
        intent=intent,
    )
    dataset.validate()
    return dataset


def _normalize_weak_labels(weak_labels, intent: str) -> dict[str, int]:
    if hasattr(weak_labels, "items"):
        return {mid: int(v) for mid, v in weak_labels.items()}
    out = {}
    for item in weak_labels:
        if item.intent == intent:
            out[item.message_id] = int(item.label)
    return out


def _resolve_weak_count(n_clean, clean_ratio, weak_size, pool, weak_map, clean_derived) -> int:
    cap = _balanced_capacity(pool, weak_map)
    if weak_size is not None:
        if weak_size > cap:
            raise SizingError(f"cannot draw {weak_size} balanced weak examples", cap)
        return weak_size
    if clean_ratio is None:
        raise ValueError("either weak_size or clean_ratio is required")
    if clean_ratio == 1.0:
        return 0
    n_weak = round(n_clean / clean_ratio) - n_clean
    if n_weak > cap:
        # when the clean size itself was derived from this capacity, clamping
        # to the pool keeps the achieved ratio within 1/(n_clean + n_weak)
        if clean_derived and abs(n_clean - clean_ratio * (n_clean + cap)) <= 1.0:
            return cap
        raise SizingError(f"cannot draw {n_weak} balanced weak examples", cap)
    return n_weak


def _solve_split_sizes(
    clean_pool, weak_candidates, gold_map, weak_map, clean_ratio, clean_size, weak_size
):
    """Resolve the clean id list; the weak split is drawn afterwards from
    whatever remains. When clean and weak compete for the same pool and both
    sizes are derived, iterate the ratio equation to a fixed point. Returns
    (clean ids, whether the clean size was derived rather than requested)."""
    if clean_size is not None:
        return _balanced_take(clean_pool, gold_map, clean_size, "clean"), False
    if weak_size is not None:
        if clean_ratio is None:
            raise ValueError("clean_size or clean_ratio is required alongside weak_size")
        if clean_ratio == 1.0:
            raise ValueError("clean_ratio 1.0 is incompatible with an explicit weak_size")
        weak_ids = _balanced_take(weak_candidates, weak_map, weak_size, "weak")
        taken = set(weak_ids)
        n_clean = round(weak_size * clean_ratio / (1.0 - clean_ratio))
        pool = [i for i in clean_pool if i not in taken]
        return _balanced_take(pool, gold_map, max(n_clean, 1), "clean"), False
    if clean_ratio is None:
        raise ValueError("clean_ratio is required when no explicit sizes are given")
    if clean_ratio == 1.0:
        cap = _balanced_capacity(clean_pool, gold_map)
        return _balanced_take(clean_pool, gold_map, cap, "clean"), False
    n_clean = 0
    for _ in range(20):
        clean_ids = _balanced_take(clean_pool, gold_map, n_clean, "clean") if n_clean else []
        taken = set(clean_ids)
        cap = _balanced_capacity([i for i in weak_candidates if i not in taken], weak_map)
        n_new = max(1, round(cap * clean_ratio / (1.0 - clean_ratio)))
        if n_new == n_clean:
            break
        n_clean = n_new
    return _balanced_take(clean_pool, gold_map, n_clean, "clean"), True


# ---------------------------------------------------------------------------
# dataset files
# ---------------------------------------------------------------------------


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "kind": "dataset",
            "num_classes": dataset.num_classes,
            "intent": dataset.intent,
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for split, examples in dataset.splits().items():
            for ex in examples:
                rec = {
                    "split": split,
                    "id": ex.id,
                    "text": ex.text,
                    "label": ex.label,
                    "soft": list(ex.soft) if ex.soft is not None else None,
                    "source": ex.source,
                }
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_dataset(path: str | Path) -> Dataset:
    splits: dict[str, list[Example]] = {"clean": [], "weak": [], "dev": [], "test": []}
    num_classes = 2
    intent = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, f"invalid record: {exc.msg}") from exc
            if rec.get("kind") == "dataset":
                num_classes = int(rec["num_classes"])
                intent = rec.get("intent")
                continue
            try:
                splits[rec["split"]].append(
                    Example(
                        id=rec["id"],
                        text=rec["text"],
                        label=rec["label"],
                        soft=tuple(rec["soft"]) if rec.get("soft") else None,
                        source=rec.get("source", SOURCE_CLEAN),
                    )
                )
            except (KeyError, TypeError) as exc:
                raise ParseError(lineno, f"bad dataset record: {exc}") from exc
    return Dataset(num_classes=num_classes, intent=intent, **splits)
