"""Email intent detection from a small clean set plus interaction-derived weak labels.

The package covers the full pipeline: synthetic corpora with controllable
interaction noise, weak labeling rules over email/calendar interactions,
corruption-matrix label correction, a dual-headed classifier with self-paced
selection of weak examples, the standard comparison baselines, and an
experiment CLI (``mailintent --help``).
"""

from mailintent.corpus import (
    Attachment,
    CalendarEntry,
    Corpus,
    Dataset,
    EmailMessage,
    Example,
    INTENTS,
    IntentNoise,
    SyntheticSpec,
    audit_calibrated_spec,
    build_dataset,
    calibrate_interaction_noise,
    generate_synthetic,
    load_corpus,
    load_dataset,
    save_corpus,
    save_dataset,
)
from mailintent.dualhead import DualHeadClassifier, dual_loss, select_weak, train_self_paced
from mailintent.estimators import IntentClassifier
from mailintent.label_correction import (
    CorruptionMatrix,
    correct_labels,
    estimate_corruption_matrix,
    train_corrected_model,
    train_weak_model,
)
from mailintent.weaklabel import (
    QualityReport,
    WeakLabelAssignment,
    evaluate_labeling,
    is_trivial_attachment,
    label_promise_action,
    label_request_information,
    label_schedule_meeting,
)

__version__ = "0.1.0"

__all__ = [
    "Attachment",
    "CalendarEntry",
    "Corpus",
    "CorruptionMatrix",
    "Dataset",
    "DualHeadClassifier",
    "EmailMessage",
    "Example",
    "INTENTS",
    "IntentClassifier",
    "IntentNoise",
    "QualityReport",
    "SyntheticSpec",
    "WeakLabelAssignment",
    "audit_calibrated_spec",
    "build_dataset",
    "calibrate_interaction_noise",
    "correct_labels",
    "dual_loss",
    "estimate_corruption_matrix",
    "evaluate_labeling",
    "generate_synthetic",
    "is_trivial_attachment",
    "label_promise_action",
    "label_request_information",
    "label_schedule_meeting",
    "load_corpus",
    "load_dataset",
    "save_corpus",
    "save_dataset",
    "select_weak",
    "train_corrected_model",
    "train_self_paced",
    "train_weak_model",
    "__version__",
]
