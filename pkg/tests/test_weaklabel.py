"""Weak labeling rules against exhaustive brute-force oracles, plus the audit."""

import numpy as np
import pytest

from mailintent.corpus import (
    Attachment,
    CalendarEntry,
    Corpus,
    EmailMessage,
    INTENT_PROMISE_ACTION,
    INTENT_REQUEST_INFO,
    INTENT_SCHEDULE_MEETING,
)
from mailintent.weaklabel import (
    DISCARDED,
    GoldCoverageError,
    QualityReport,
    RULE_REPLY_WITH_ATTACHMENT,
    WeakLabelAssignment,
    balanced_audit_sample,
    evaluate_labeling,
    is_trivial_attachment,
    label_promise_action,
    label_request_information,
    label_schedule_meeting,
    load_assignments,
    normalize_subject,
    save_assignments,
)


def msg(mid, thread="t0", ts=0, reply=None, subject=None, attachments=(), flag=False):
    return EmailMessage(
        id=mid,
        thread_id=thread,
        sender="a@x",
        recipients=("b@x",),
        subject=subject if subject is not None else f"subject {thread}",
        body="body",
        timestamp=ts,
        in_reply_to=reply,
        attachments=tuple(attachments),
        follow_up_flag=flag,
    )


def positives(assignments):
    return {a.message_id for a in assignments if a.label == 1}


class TestTrivialAttachments:
    def test_signature_is_trivial(self):
        assert is_trivial_attachment(Attachment("sig.htm", "signature"))

    def test_image_and_contact_are_trivial(self):
        assert is_trivial_attachment(Attachment("logo.png", "image"))
        assert is_trivial_attachment(Attachment("card.vcf", "contact"))

    def test_document_is_substantive(self):
        assert not is_trivial_attachment(Attachment("draft.docx", "document"))

    def test_other_is_substantive(self):
        assert not is_trivial_attachment(Attachment("data.bin", "other"))


class TestRequestInformation:
    def test_reply_with_document_marks_the_request(self):
        request = msg("b", ts=0, subject="Please forward me the final version for the slides")
        reply = msg("a", ts=1, reply="b", attachments=[Attachment("final.pptx", "document")])
        got = label_request_information(Corpus([request, reply]))
        assert positives(got) == {"b"}
        by_id = {a.message_id: a for a in got}
        assert by_id["b"].provenance == RULE_REPLY_WITH_ATTACHMENT
        assert by_id["a"].provenance == DISCARDED

    def test_single_message_is_negative(self):
        got = label_request_information(Corpus([msg("only")]))
        assert positives(got) == set()
        assert {a.message_id for a in got} == {"only"}

    def test_trivial_attachment_does_not_fire(self):
        request = msg("b", ts=0)
        reply = msg("a", ts=1, reply="b", attachments=[Attachment("sig.png", "image")])
        assert positives(label_request_information(Corpus([request, reply]))) == set()

    def test_monotone_under_new_qualifying_reply(self):
        corpus = _random_corpus(seed=21, n=120)
        before = positives(label_request_information(corpus))
        target = corpus.messages[10]
        extra = msg(
            "extra",
            thread=target.thread_id,
            ts=10_000_000,
            reply=target.id,
            attachments=[Attachment("doc.pdf", "document")],
        )
        after = positives(label_request_information(Corpus(corpus.messages + [extra], corpus.calendar)))
        assert before <= after
        assert target.id in after


class TestScheduleMeeting:
    def _calendar(self, subject):
        return CalendarEntry(subject, 1_000, "room", ("a@x",), "a@x")

    def test_earlier_message_takes_the_label(self):
        a = msg("a", ts=0, subject="sync on accounts")
        b = msg("b", ts=5, subject="RE: sync on accounts", thread="t1")
        corpus = Corpus([a, b], [self._calendar("sync on accounts")])
        assert positives(label_schedule_meeting(corpus)) == {"a"}

    def test_timestamp_guard_blocks_reversed_order(self):
        confirmation = msg("c", ts=0, subject="RE: sync on accounts")
        later = msg("a", ts=5, subject="sync on accounts", thread="t1")
        corpus = Corpus([confirmation, later], [self._calendar("sync on accounts")])
        # the latest matching message has nothing later to confirm it
        assert "a" not in positives(label_schedule_meeting(corpus))
        assert positives(label_schedule_meeting(corpus)) == {"c"}

    def test_no_calendar_entry_no_positive(self):
        a = msg("a", ts=0, subject="sync")
        b = msg("b", ts=5, subject="RE: sync", thread="t1")
        assert positives(label_schedule_meeting(Corpus([a, b]))) == set()

    def test_normalization_strips_stacked_prefixes(self):
        assert normalize_subject(" RE: Fwd: re: Budget  ") == "budget"
        assert normalize_subject("fw:fw: x") == "x"


class TestPromiseAction:
    def test_reply_to_flagged_is_positive(self):
        flagged = msg("b", ts=0, flag=True, subject="present next week?")
        answer = msg("a", ts=1, reply="b", subject="RE: present next week?")
        assert positives(label_promise_action(Corpus([flagged, answer]))) == {"a"}

    def test_flag_without_reply_is_negative(self):
        assert positives(label_promise_action(Corpus([msg("b", flag=True)]))) == set()


def _random_corpus(seed: int, n: int) -> Corpus:
    """Random reply forests with random attachments, flags, subjects, calendar."""
    rng = np.random.default_rng(seed)
    kinds = ("document", "image", "signature", "contact", "other")
    subjects = [f"topic {k}" for k in range(max(3, n // 8))]
    messages = []
    for i in range(n):
        thread = f"t{i % max(2, n // 6)}"
        same_thread = [m for m in messages if m.thread_id == thread]
        reply = None
        if same_thread and rng.random() < 0.6:
            reply = same_thread[rng.integers(0, len(same_thread))].id
        attachments = []
        for _ in range(rng.integers(0, 3)):
            attachments.append(Attachment(f"f{i}", kinds[rng.integers(0, len(kinds))]))
        subject = subjects[rng.integers(0, len(subjects))]
        if rng.random() < 0.4:
            subject = "RE: " + subject
        messages.append(
            msg(
                f"m{i:03d}",
                thread=thread,
                ts=i,
                reply=reply,
                subject=subject,
                attachments=attachments,
                flag=bool(rng.random() < 0.3),
            )
        )
    calendar = [
        CalendarEntry(subjects[k], 10 * k, "room", ("a@x",), "a@x")
        for k in range(len(subjects))
        if rng.random() < 0.5
    ]
    return Corpus(messages, calendar)


def _oracle_request_information(corpus):
    substantive = ("document", "other")
    return {
        b.id
        for b in corpus.messages
        for a in corpus.messages
        if a.in_reply_to == b.id and any(att.kind in substantive for att in a.attachments)
    }


def _oracle_schedule_meeting(corpus):
    return {
        a.id
        for a in corpus.messages
        for b in corpus.messages
        for entry in corpus.calendar
        if a.id != b.id
        and normalize_subject(a.subject) == normalize_subject(entry.subject)
        and normalize_subject(b.subject) == normalize_subject(entry.subject)
        and a.timestamp < b.timestamp
    }


def _oracle_promise_action(corpus):
    return {
        a.id
        for a in corpus.messages
        for b in corpus.messages
        if a.in_reply_to == b.id and b.follow_up_flag
    }


class TestOracleEquivalence:
    @pytest.mark.parametrize("seed", range(8))
    def test_all_rules_match_brute_force(self, seed):
        corpus = _random_corpus(seed=seed, n=int(np.random.default_rng(seed).integers(50, 500)))
        assert positives(label_request_information(corpus)) == _oracle_request_information(corpus)
        assert positives(label_schedule_meeting(corpus)) == _oracle_schedule_meeting(corpus)
        assert positives(label_promise_action(corpus)) == _oracle_promise_action(corpus)

    def test_rules_are_deterministic(self):
        corpus = _random_corpus(seed=3, n=200)
        assert label_promise_action(corpus) == label_promise_action(corpus)

    def test_every_message_receives_an_assignment(self):
        corpus = _random_corpus(seed=5, n=120)
        for rule in (label_request_information, label_schedule_meeting, label_promise_action):
            got = rule(corpus)
            assert {a.message_id for a in got} == {m.id for m in corpus.messages}


class TestEvaluateLabeling:
    def _assignments(self, labels, intent=INTENT_REQUEST_INFO):
        return [
            WeakLabelAssignment(f"m{i}", intent, lab, "rule" if lab else DISCARDED)
            for i, lab in enumerate(labels)
        ]

    def test_audit_style_confusion(self):
        # 100 weak positives of which 36 correct, 100 weak negatives of which 99 correct
        assignments = self._assignments([1] * 100 + [0] * 100)
        gold = {f"m{i}": (i < 36) for i in range(100)}
        gold.update({f"m{i}": (i - 100 >= 99) for i in range(100, 200)})
        report = evaluate_labeling(assignments, gold)
        assert report.true_positive == 36
        assert report.false_positive == 64
        assert report.true_negative == 99
        assert report.false_negative == 1
        assert report.accuracy == pytest.approx(0.675)

    def test_perfect_labels(self):
        assignments = self._assignments([1, 0, 1, 0])
        gold = {"m0": True, "m1": False, "m2": True, "m3": False}
        report = evaluate_labeling(assignments, gold)
        assert report.accuracy == 1.0
        assert report.false_positive == report.false_negative == 0

    def test_hand_tally(self):
        labels = [1, 1, 0, 0, 1, 0, 0, 1, 1, 0]
        truth = [True, False, False, True, True, False, False, False, True, True]
        assignments = self._assignments(labels)
        gold = {f"m{i}": truth[i] for i in range(10)}
        tp = sum(1 for l, t in zip(labels, truth) if l and t)
        fp = sum(1 for l, t in zip(labels, truth) if l and not t)
        fn = sum(1 for l, t in zip(labels, truth) if not l and t)
        tn = sum(1 for l, t in zip(labels, truth) if not l and not t)
        report = evaluate_labeling(assignments, gold)
        assert (report.true_positive, report.false_positive, report.false_negative, report.true_negative) == (tp, fp, fn, tn)
        assert report.accuracy == pytest.approx((tp + tn) / 10)

    def test_missing_gold_is_coverage_error(self):
        assignments = self._assignments([1, 0])
        with pytest.raises(GoldCoverageError, match="m1"):
            evaluate_labeling(assignments, {"m0": True})

    def test_mixed_intents_rejected(self):
        mixed = [
            WeakLabelAssignment("a", INTENT_REQUEST_INFO, 1, "r"),
            WeakLabelAssignment("b", INTENT_PROMISE_ACTION, 0, DISCARDED),
        ]
        with pytest.raises(ValueError, match="mix"):
            evaluate_labeling(mixed, {"a": True, "b": False})

    def test_tuple_keyed_gold_is_sliced_by_intent(self):
        assignments = self._assignments([1], intent=INTENT_SCHEDULE_MEETING)
        gold = {("m0", INTENT_SCHEDULE_MEETING): True, ("m0", INTENT_REQUEST_INFO): False}
        assert evaluate_labeling(assignments, gold).accuracy == 1.0


class TestAuditSample:
    def test_balanced_by_weak_label(self):
        assignments = [
            WeakLabelAssignment(f"m{i}", INTENT_REQUEST_INFO, int(i < 40), "r") for i in range(100)
        ]
        gold = {f"m{i}": True for i in range(100)}
        sample = balanced_audit_sample(assignments, gold, 60, seed=0)
        labels = [a.label for a in sample]
        assert labels.count(1) == labels.count(0) == 30

    def test_insufficient_side_rejected(self):
        assignments = [WeakLabelAssignment("m0", INTENT_REQUEST_INFO, 1, "r")]
        with pytest.raises(ValueError, match="needs"):
            balanced_audit_sample(assignments, {"m0": True}, 10, seed=0)


class TestAssignmentFiles:
    def test_roundtrip(self, tmp_path):
        corpus = _random_corpus(seed=1, n=60)
        assignments = label_request_information(corpus)
        path = tmp_path / "weak.jsonl"
        save_assignments(assignments, path)
        assert load_assignments(path) == assignments
