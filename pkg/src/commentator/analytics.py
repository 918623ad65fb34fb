"""Post-annotation measures: pairwise Cohen's kappa, the code-mixing
index (CMI), corpus-level aggregation, and the filtering predicates used
by CSV export.

All computations run over immutable snapshots of the latest annotation
versions and are safe to call concurrently.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from commentator.domain import (
    LID_UNIDENTIFIED,
    TASK_LID,
    TASK_MLI,
    TokenAnnotation,
    utc_now_rfc3339,
)

HISTOGRAM_BINS = 10


class EmptyInputError(ValueError):
    """Agreement or aggregation requested over zero items."""


class LengthMismatchError(ValueError):
    """Paired label sequences of different lengths."""


class InvalidFilterError(ValueError):
    """Malformed export filter (e.g. min above max)."""


@dataclass(frozen=True)
class KappaReport:
    """Chance-corrected agreement between one annotator pair.

    kappa = (p_o - p_e) / (1 - p_e), where p_o is the relative observed
    agreement and p_e the hypothetical chance agreement from the two
    annotators' label marginals.  When p_e == 1 (only reachable when both
    annotators used a single identical label throughout, so p_o == 1 too)
    the quotient is 0/0 and kappa is defined as 1.0.
    """

    annotator_pair: tuple
    item_count: int
    p_o: float
    p_e: float
    kappa: float

    def as_dict(self) -> dict:
        return {
            "annotator_pair": list(self.annotator_pair),
            "item_count": self.item_count,
            "p_o": self.p_o,
            "p_e": self.p_e,
            "kappa": self.kappa,
        }


@dataclass(frozen=True)
class CmiReport:
    """Code-mixing index of one sentence's LID annotation.

    n is the token count, u the count of language-independent (un-tagged)
    tokens, counts the per-language word counts w_i.  CMI is 0 when n == u,
    otherwise 100 * (1 - max_i(w_i) / (n - u)).
    """

    sentence_id: int
    n: int
    u: int
    counts: dict
    cmi: float

    def as_dict(self) -> dict:
        return {
            "sentence_id": self.sentence_id,
            "n": self.n,
            "u": self.u,
            "counts": dict(self.counts),
            "cmi": self.cmi,
        }


@dataclass(frozen=True)
class PairwiseKappa:
    """Symmetric kappa matrix over all annotator pairs for one task.

    ``matrix`` is ordered like ``annotators`` with a unit diagonal; cells
    for pairs with no shared sentences are None and those pairs are listed
    in ``insufficient_pairs`` and excluded from ``mean``.
    """

    task: str
    annotators: tuple[int, ...]
    matrix: tuple
    reports: dict = field(default_factory=dict)
    insufficient_pairs: tuple = ()
    mean: float | None = None

    def as_dict(self) -> dict:
        return {
            "task": self.task,
            "annotators": list(self.annotators),
            "matrix": [list(row) for row in self.matrix],
            "pairs": [r.as_dict() for r in self.reports.values()],
            "insufficient_pairs": [list(p) for p in self.insufficient_pairs],
            "mean": self.mean,
        }


@dataclass(frozen=True)
class CorpusCmi:
    """Mean CMI plus a 10-bin histogram over [0, 100]."""

    mean_cmi: float
    cmi_histogram: tuple[int, ...]
    reports: tuple = ()

    def as_dict(self) -> dict:
        return {"mean_cmi": self.mean_cmi, "cmi_histogram": list(self.cmi_histogram)}


@dataclass(frozen=True)
class CorpusAnalytics:
    """Everything the admin metrics view shows for one task."""

    task: str
    corpus_size: int
    mean_cmi: float | None
    cmi_histogram: tuple[int, ...]
    kappa: PairwiseKappa | None
    completion_counts: dict
    computed_at: str

    def as_dict(self) -> dict:
        return {
            "task": self.task,
            "corpus_size": self.corpus_size,
            "mean_cmi": self.mean_cmi,
            "cmi_histogram": list(self.cmi_histogram),
            "kappa": self.kappa.as_dict() if self.kappa is not None else None,
            "completion_counts": {str(k): v for k, v in self.completion_counts.items()},
            "computed_at": self.computed_at,
        }


@dataclass(frozen=True)
class ExportFilters:
    """Predicates for filtered export; absent predicates are no-ops."""

    task: str
    min_cmi: float | None = None
    max_cmi: float | None = None
    min_kappa: float | None = None
    annotator_ids: frozenset | None = None

    def __post_init__(self):
        if (self.min_cmi is not None and self.max_cmi is not None
                and self.min_cmi > self.max_cmi):
            raise InvalidFilterError("min_cmi must not exceed max_cmi")
        for name in ("min_cmi", "max_cmi"):
            value = getattr(self, name)
            if value is not None and not 0 <= value <= 100:
                raise InvalidFilterError(f"{name} must be within [0, 100]")
        if self.min_kappa is not None and not -1 <= self.min_kappa <= 1:
            raise InvalidFilterError("min_kappa must be within [-1, 1]")

    @property
    def has_cmi_predicate(self) -> bool:
        return self.min_cmi is not None or self.max_cmi is not None


def cohens_kappa(labels_a, labels_b, pair=("a", "b")) -> KappaReport:
    """Cohen's kappa between two equal-length label sequences.

    p_o is the fraction of positions where the labels agree; p_e sums
    p_a(c) * p_b(c) over every category c seen in either sequence.
    """
    if len(labels_a) != len(labels_b):
        raise LengthMismatchError(
            f"label sequences differ in length: {len(labels_a)} vs {len(labels_b)}")
    n = len(labels_a)
    if n == 0:
        raise EmptyInputError("cannot compute kappa over zero items")

    agreements = sum(1 for a, b in zip(labels_a, labels_b) if a == b)
    counts_a = Counter(labels_a)
    counts_b = Counter(labels_b)
    p_o = agreements / n
    p_e = sum(counts_a[c] * counts_b[c] for c in counts_a) / (n * n)
    if p_e >= 1.0:
        # Both marginals are the same point mass, which forces p_o == 1;
        # the 0/0 quotient is defined as perfect agreement.
        kappa = 1.0
    else:
        kappa = (p_o - p_e) / (1.0 - p_e)
    return KappaReport(annotator_pair=tuple(pair), item_count=n,
                       p_o=p_o, p_e=p_e, kappa=kappa)


def _pooled_labels(task, by_annotator, annotator, shared_ids):
    """Labels one annotator contributed over the shared sentences, pooled
    token-by-token for lid/pos and sentence-by-sentence for mli."""
    pooled = []
    for sid in shared_ids:
        record = by_annotator[annotator][sid]
        if task == TASK_MLI:
            pooled.append(record.matrix_language)
        else:
            pooled.extend(record.tags)
    return pooled


def pairwise_kappa(task, annotations) -> PairwiseKappa:
    """Kappa matrix + mean over all annotator pairs for one task.

    ``annotations`` holds the latest annotation per (annotator, sentence).
    For each pair the labels of the sentences both completed are pooled
    (micro-pooling) and run through :func:`cohens_kappa`; pairs with no
    shared sentences are marked insufficient rather than failing.  The
    mean excludes the unit diagonal and insufficient pairs.
    """
    by_annotator: dict[int, dict] = {}
    for record in annotations:
        by_annotator.setdefault(record.annotator_id, {})[record.sentence_id] = record

    annotators = tuple(sorted(by_annotator))
    size = len(annotators)
    matrix = [[None] * size for _ in range(size)]
    reports: dict[tuple, KappaReport] = {}
    insufficient = []
    for i, a in enumerate(annotators):
        matrix[i][i] = 1.0
        for j in range(i + 1, size):
            b = annotators[j]
            shared = sorted(set(by_annotator[a]) & set(by_annotator[b]))
            if not shared:
                insufficient.append((a, b))
                continue
            report = cohens_kappa(
                _pooled_labels(task, by_annotator, a, shared),
                _pooled_labels(task, by_annotator, b, shared),
                pair=(a, b),
            )
            reports[(a, b)] = report
            matrix[i][j] = matrix[j][i] = report.kappa

    mean = None
    if reports:
        mean = sum(r.kappa for r in reports.values()) / len(reports)
    return PairwiseKappa(
        task=task,
        annotators=annotators,
        matrix=tuple(tuple(row) for row in matrix),
        reports=reports,
        insufficient_pairs=tuple(insufficient),
        mean=mean,
    )


def cmi(annotation: TokenAnnotation) -> CmiReport:
    """Code-mixing index of one LID annotation.

    u counts the language-independent tokens (the un tag, which is where
    mentions, hashtags, numerals and unidentifiable words land); the
    remaining tags are per-language word counts w_i.
    """
    return cmi_from_tags(annotation.sentence_id, annotation.tags)


def cmi_from_tags(sentence_id: int, tags) -> CmiReport:
    n = len(tags)
    u = sum(1 for t in tags if t == LID_UNIDENTIFIED)
    counts = Counter(t for t in tags if t != LID_UNIDENTIFIED)
    if n == u:
        value = 0.0
    else:
        value = 100.0 * (1.0 - max(counts.values()) / (n - u))
    return CmiReport(sentence_id=sentence_id, n=n, u=u,
                     counts=dict(counts), cmi=value)


def histogram_bin(value: float) -> int:
    """Bin index for a CMI value: [0,10), ..., [80,90), [90,100]."""
    return min(int(value // (100 // HISTOGRAM_BINS)), HISTOGRAM_BINS - 1)


def corpus_cmi(annotations, aggregation: str = "per-annotator") -> CorpusCmi:
    """Mean CMI and 10-bin histogram over the latest LID annotations.

    ``per-annotator`` scores every (sentence, annotator) record, so a
    sentence annotated by three people contributes three values;
    ``consensus-first-annotator`` keeps one record per sentence, the one
    from the lowest-numbered annotator.
    """
    records = list(annotations)
    if aggregation == "consensus-first-annotator":
        first: dict[int, TokenAnnotation] = {}
        for record in records:
            kept = first.get(record.sentence_id)
            if kept is None or record.annotator_id < kept.annotator_id:
                first[record.sentence_id] = record
        records = [first[sid] for sid in sorted(first)]
    elif aggregation != "per-annotator":
        raise ValueError(f"unknown aggregation: {aggregation!r}")
    if not records:
        raise EmptyInputError("no LID annotations to aggregate")

    reports = [cmi(record) for record in records]
    histogram = [0] * HISTOGRAM_BINS
    for report in reports:
        histogram[histogram_bin(report.cmi)] += 1
    mean = sum(r.cmi for r in reports) / len(reports)
    return CorpusCmi(mean_cmi=mean, cmi_histogram=tuple(histogram),
                     reports=tuple(reports))


def build_corpus_analytics(task, task_annotations, lid_annotations,
                           completion_counts, corpus_size) -> CorpusAnalytics:
    """Assemble the admin metrics document for one task.

    Kappa is computed per task over ``task_annotations``; the CMI
    aggregates always derive from the LID annotations since CMI is a
    language-tag measure.  Empty stores yield null aggregates instead of
    errors so the metrics endpoint stays total.
    """
    kappa = pairwise_kappa(task, task_annotations) if task_annotations else None
    mean_cmi = None
    histogram = (0,) * HISTOGRAM_BINS
    if lid_annotations:
        aggregate = corpus_cmi(lid_annotations)
        mean_cmi = aggregate.mean_cmi
        histogram = aggregate.cmi_histogram
    return CorpusAnalytics(
        task=task,
        corpus_size=corpus_size,
        mean_cmi=mean_cmi,
        cmi_histogram=histogram,
        kappa=kappa,
        completion_counts=dict(completion_counts),
        computed_at=utc_now_rfc3339(),
    )


def filter_records(records, filters: ExportFilters, lid_tags=None):
    """Keep exactly the records satisfying every supplied predicate.

    CMI predicates apply per sentence: for LID records from the record's
    own tags, otherwise from the same annotator's latest LID annotation
    (``lid_tags`` maps (annotator_id, sentence_id) to a tag list); records
    with no LID tags available fail any CMI predicate.

    The kappa predicate keeps a record only when at least one other
    annotator annotated the same sentence and every such contributing
    pair's pooled pairwise kappa meets the threshold; quality filters are
    conservative, so sentences whose agreement cannot be established are
    dropped.  CMI and kappa are computed over the full record set before
    the annotator_ids predicate narrows the output.
    """
    records = list(records)
    kept = records

    if filters.has_cmi_predicate:
        def record_cmi(record):
            if isinstance(record, TokenAnnotation) and record.task == TASK_LID:
                return cmi(record).cmi
            if lid_tags is None:
                return None
            tags = lid_tags.get((record.annotator_id, record.sentence_id))
            if tags is None:
                return None
            return cmi_from_tags(record.sentence_id, tags).cmi

        def cmi_ok(record):
            value = record_cmi(record)
            if value is None:
                return False
            if filters.min_cmi is not None and value < filters.min_cmi:
                return False
            if filters.max_cmi is not None and value > filters.max_cmi:
                return False
            return True

        kept = [r for r in kept if cmi_ok(r)]

    if filters.min_kappa is not None:
        pairwise = pairwise_kappa(filters.task, records)
        by_sentence: dict[int, set] = {}
        for record in records:
            by_sentence.setdefault(record.sentence_id, set()).add(record.annotator_id)

        def kappa_ok(record):
            others = by_sentence[record.sentence_id] - {record.annotator_id}
            if not others:
                return False
            for other in others:
                pair = tuple(sorted((record.annotator_id, other)))
                report = pairwise.reports.get(pair)
                if report is None or report.kappa < filters.min_kappa:
                    return False
            return True

        kept = [r for r in kept if kappa_ok(r)]

    if filters.annotator_ids is not None:
        kept = [r for r in kept if r.annotator_id in filters.annotator_ids]
    return kept
