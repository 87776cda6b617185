"""Curriculum corpus: parse, validate, index, search, and export indicator records.

Every generated response in the service cites a strand → sub-strand →
learning-indicator path, so this module is the grounding layer everything
else resolves against. Records arrive as a JSON interchange document (an
array of objects carrying exactly the six schema field names, plus optional
``exemplar_activities``, ``assessment_templates``, and ``item_id``), are
whitespace-normalized, indexed, and can be exported back out losslessly.

Ranking is deliberately lexical and reproducible: case-folded,
punctuation-stripped token match weighted by TF×IDF with
``idf(t) = ln(1 + N/df(t))`` over the concatenation of subject, strand,
sub_strand, core_competency, and learning_indicator. IDF uses the full
corpus regardless of filters; filters only restrict the candidate set.
Ties order by item_id ascending. An embedding-based ranker can be plugged
in via :class:`Ranker` but is not part of the verified surface.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Protocol

from .textnorm import normalize, squash_ws, tokenize


class CurriculumError(Exception):
    """Base class for curriculum failures."""


class MalformedDocument(CurriculumError):
    """The interchange container itself could not be parsed."""


class EmptyQuery(CurriculumError):
    """Search query was empty after normalization."""


class UnknownRef(CurriculumError):
    """No item matches the given strand/sub-strand/indicator path."""


class UnknownId(CurriculumError):
    """No item with the given item_id."""


class GradeLevel(str, Enum):
    EARLY_GRADE = "EarlyGrade"
    UPPER_PRIMARY = "UpperPrimary"
    JHS = "JHS"

    @classmethod
    def parse(cls, raw: str) -> "GradeLevel":
        """Accept canonical names plus human-spaced aliases, case-insensitively."""
        key = normalize(str(raw)).replace(" ", "")
        aliases = {
            "earlygrade": cls.EARLY_GRADE,
            "kgp3": cls.EARLY_GRADE,
            "upperprimary": cls.UPPER_PRIMARY,
            "p4p6": cls.UPPER_PRIMARY,
            "jhs": cls.JHS,
            "juniorhighschool": cls.JHS,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"invalid grade_level: {raw!r}") from None


REQUIRED_FIELDS = (
    "subject",
    "grade_level",
    "strand",
    "sub_strand",
    "core_competency",
    "learning_indicator",
)
OPTIONAL_FIELDS = ("exemplar_activities", "assessment_templates", "item_id")

# Indicator path separator used everywhere a ref is rendered into text.
REF_ARROW = " → "


@dataclass(frozen=True)
class CurriculumRef:
    """Strand → sub-strand → learning-indicator path identifying one item."""

    strand: str
    sub_strand: str
    learning_indicator: str

    def path(self) -> str:
        return REF_ARROW.join((self.strand, self.sub_strand, self.learning_indicator))

    def match_key(self) -> tuple[str, str, str]:
        return (
            normalize(self.strand),
            normalize(self.sub_strand),
            normalize(self.learning_indicator),
        )


@dataclass(frozen=True)
class CurriculumItem:
    """One indicator record; the grounding unit for retrieval."""

    item_id: str
    subject: str
    grade_level: GradeLevel
    strand: str
    sub_strand: str
    core_competency: str
    learning_indicator: str
    exemplar_activities: tuple[str, ...] = ()
    assessment_templates: tuple[str, ...] = ()

    def ref(self) -> CurriculumRef:
        return CurriculumRef(self.strand, self.sub_strand, self.learning_indicator)

    def search_text(self) -> str:
        return " ".join(
            (
                self.subject,
                self.strand,
                self.sub_strand,
                self.core_competency,
                self.learning_indicator,
            )
        )

    def to_record(self) -> dict:
        return {
            "item_id": self.item_id,
            "subject": self.subject,
            "grade_level": self.grade_level.value,
            "strand": self.strand,
            "sub_strand": self.sub_strand,
            "core_competency": self.core_competency,
            "learning_indicator": self.learning_indicator,
            "exemplar_activities": list(self.exemplar_activities),
            "assessment_templates": list(self.assessment_templates),
        }


@dataclass(frozen=True)
class SearchHit:
    item_id: str
    score: float
    matched_terms: tuple[str, ...]


@dataclass
class IngestSummary:
    item_count: int
    rejected_count: int
    rejection_reasons: list[str] = field(default_factory=list)


def content_hash(record: dict) -> str:
    """Stable item_id for records that arrive without one."""
    basis = {k: record[k] for k in REQUIRED_FIELDS}
    basis["exemplar_activities"] = record.get("exemplar_activities", [])
    basis["assessment_templates"] = record.get("assessment_templates", [])
    blob = json.dumps(basis, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _normalize_record(raw: object, index: int) -> dict | str:
    """Validate one raw record; return the normalized dict or a rejection reason."""
    where = f"record {index}"
    if not isinstance(raw, dict):
        return f"{where}: record is not an object"
    allowed = set(REQUIRED_FIELDS) | set(OPTIONAL_FIELDS)
    for key in raw:
        if key not in allowed:
            return f"{where}: unexpected field: {key}"
    rec: dict = {}
    for name in REQUIRED_FIELDS:
        if name not in raw:
            return f"{where}: missing required field: {name}"
        value = raw[name]
        if not isinstance(value, str):
            return f"{where}: field must be a string: {name}"
        if name == "grade_level":
            try:
                rec[name] = GradeLevel.parse(value).value
            except ValueError:
                return f"{where}: invalid grade_level: {value}"
            continue
        cleaned = squash_ws(value)
        if not cleaned:
            return f"{where}: empty field: {name}"
        rec[name] = cleaned
    for name in ("exemplar_activities", "assessment_templates"):
        value = raw.get(name, [])
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            return f"{where}: field must be a list of strings: {name}"
        rec[name] = [squash_ws(v) for v in value]
    item_id = raw.get("item_id")
    if item_id is not None:
        if not isinstance(item_id, str) or not squash_ws(item_id):
            return f"{where}: field must be a non-empty string: item_id"
        rec["item_id"] = squash_ws(item_id)
    else:
        rec["item_id"] = content_hash(rec)
    return rec


def parse_document(text: str) -> tuple[list[CurriculumItem], list[str]]:
    """Parse an interchange document into items plus per-record rejections.

    Individual bad records never abort the batch; only an unparseable
    container raises :class:`MalformedDocument`.
    """
    try:
        payload = json.loads(text)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedDocument(f"unparseable document: {exc}") from exc
    if not isinstance(payload, list):
        raise MalformedDocument("document must be a JSON array of records")

    items: list[CurriculumItem] = []
    rejections: list[str] = []
    seen_ids: set[str] = set()
    seen_refs: set[tuple[str, str, str]] = set()
    for index, raw in enumerate(payload):
        rec = _normalize_record(raw, index)
        if isinstance(rec, str):
            rejections.append(rec)
            continue
        item = CurriculumItem(
            item_id=rec["item_id"],
            subject=rec["subject"],
            grade_level=GradeLevel(rec["grade_level"]),
            strand=rec["strand"],
            sub_strand=rec["sub_strand"],
            core_competency=rec["core_competency"],
            learning_indicator=rec["learning_indicator"],
            exemplar_activities=tuple(rec["exemplar_activities"]),
            assessment_templates=tuple(rec["assessment_templates"]),
        )
        if item.item_id in seen_ids:
            rejections.append(f"record {index}: duplicate item_id: {item.item_id}")
            continue
        ref_key = item.ref().match_key()
        if ref_key in seen_refs:
            rejections.append(
                f"record {index}: duplicate curriculum ref: {item.ref().path()}"
            )
            continue
        seen_ids.add(item.item_id)
        seen_refs.add(ref_key)
        items.append(item)
    return items, rejections


class Ranker(Protocol):
    """Pluggable ranking hook. The default TF×IDF ranker is the verified one."""

    def __call__(self, query: str, candidates: list[CurriculumItem]) -> list[SearchHit]:
        ...


class CurriculumIndex:
    """Immutable index over one ingested corpus snapshot."""

    def __init__(self, items: Iterable[CurriculumItem]):
        self._by_id: dict[str, CurriculumItem] = {}
        self._by_ref: dict[tuple[str, str, str], CurriculumItem] = {}
        self._doc_tf: dict[str, Counter] = {}
        for item in items:
            self._by_id[item.item_id] = item
            self._by_ref[item.ref().match_key()] = item
            self._doc_tf[item.item_id] = Counter(tokenize(item.search_text()))
        self._df: Counter = Counter()
        for tf in self._doc_tf.values():
            self._df.update(tf.keys())

    def __len__(self) -> int:
        return len(self._by_id)

    def items(self) -> list[CurriculumItem]:
        return list(self._by_id.values())

    def get(self, item_id: str) -> CurriculumItem:
        try:
            return self._by_id[item_id]
        except KeyError:
            raise UnknownId(f"unknown item_id: {item_id}") from None

    def resolve(self, ref: CurriculumRef) -> CurriculumItem:
        try:
            return self._by_ref[ref.match_key()]
        except KeyError:
            raise UnknownRef(f"unknown curriculum ref: {ref.path()}") from None

    def idf(self, term: str) -> float:
        df = self._df.get(term, 0)
        if df == 0:
            return 0.0
        return math.log(1.0 + len(self._by_id) / df)

    def search(
        self,
        query: str,
        subject: Optional[str] = None,
        grade_level: Optional[GradeLevel] = None,
    ) -> list[SearchHit]:
        if not normalize(query):
            raise EmptyQuery("query is empty after normalization")
        terms = sorted(set(tokenize(query)))
        subject_key = normalize(subject) if subject is not None else None
        hits: list[SearchHit] = []
        for item in self._by_id.values():
            if subject_key is not None and normalize(item.subject) != subject_key:
                continue
            if grade_level is not None and item.grade_level is not grade_level:
                continue
            tf = self._doc_tf[item.item_id]
            score = 0.0
            matched = []
            for term in terms:
                count = tf.get(term, 0)
                if count:
                    score += count * self.idf(term)
                    matched.append(term)
            if score > 0.0:
                hits.append(SearchHit(item.item_id, score, tuple(matched)))
        hits.sort(key=lambda h: (-h.score, h.item_id))
        return hits

    def export(self, item_ids: Iterable[str]) -> str:
        """Emit an interchange document for the given ids; round-trips losslessly."""
        records = [self.get(item_id).to_record() for item_id in item_ids]
        return json.dumps(records, ensure_ascii=False, indent=2) + "\n"

    def export_all(self) -> str:
        return self.export(sorted(self._by_id))


class CurriculumService:
    """Holds the current corpus snapshot; re-ingest swaps it atomically.

    The index itself is immutable, so concurrent readers may keep using the
    snapshot they grabbed while a writer replaces it.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._index = CurriculumIndex([])

    @property
    def index(self) -> CurriculumIndex:
        return self._index

    def ingest(self, document_text: str) -> IngestSummary:
        items, rejections = parse_document(document_text)
        new_index = CurriculumIndex(items)
        with self._lock:
            self._index = new_index
        return IngestSummary(
            item_count=len(items),
            rejected_count=len(rejections),
            rejection_reasons=rejections,
        )

    def search(self, query: str, **filters) -> list[SearchHit]:
        return self._index.search(query, **filters)

    def resolve(self, ref: CurriculumRef) -> CurriculumItem:
        return self._index.resolve(ref)

    def get(self, item_id: str) -> CurriculumItem:
        return self._index.get(item_id)

    def export(self, item_ids: Iterable[str]) -> str:
        return self._index.export(item_ids)
