"""Platform label schemas and privacy-label instances.

A LabelSchema describes one platform format: its sections, each section's
attributes with value domains and omnibus flags, the mapping from sections to
data-practice categories, and the question template used when prompting.
Schemas are data files so new platforms need no code change.

A PrivacyLabel is one label instance (generated, declared, or ground truth):
a Present/Absent value for every (section, attribute) pair of its schema,
optionally with provenance.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, NamedTuple

from .categories import DataPracticeCategory, category_from_name
from .documents import Segment
from .errors import SchemaInvalid, SchemaMismatch

GOOGLE_SCHEMA = "google-data-safety"
APPLE_SCHEMA = "apple-app-privacy"

_OMNIBUS_WORD_RE = re.compile(r"\bothers?\b", re.IGNORECASE)


class ValueDomain(enum.Enum):
    PRESENCE = "Presence"
    YES_NO = "YesNo"


class Presence(enum.Enum):
    PRESENT = "Present"
    ABSENT = "Absent"


class LabelOrigin(enum.Enum):
    GENERATED = "Generated"
    DECLARED = "Declared"
    GROUND_TRUTH = "GroundTruth"


def default_omnibus(name: str, description: str) -> bool:
    """True iff the name or description contains the word "other" ("others")."""
    return bool(_OMNIBUS_WORD_RE.search(name)) or bool(_OMNIBUS_WORD_RE.search(description))


@dataclass(frozen=True)
class Attribute:
    name: str
    description: str
    value_domain: ValueDomain
    omnibus: bool


@dataclass(frozen=True)
class Section:
    name: str
    mapped_categories: frozenset[DataPracticeCategory]
    question_template: str
    attributes: tuple[Attribute, ...]

    def attribute(self, name: str) -> Attribute:
        for attr in self.attributes:
            if attr.name == name:
                return attr
        raise KeyError(name)


@dataclass(frozen=True)
class LabelSchema:
    platform_id: str
    version: str
    sections: tuple[Section, ...]

    @property
    def ref(self) -> str:
        return f"{self.platform_id}@{self.version}"

    def pairs(self) -> list[tuple[str, str]]:
        """All (section name, attribute name) pairs in schema order."""
        return [(s.name, a.name) for s in self.sections for a in s.attributes]

    def section(self, name: str) -> Section:
        for section in self.sections:
            if section.name == name:
                return section
        raise KeyError(name)

    def omnibus_pairs(self) -> set[tuple[str, str]]:
        return {
            (s.name, a.name) for s in self.sections for a in s.attributes if a.omnibus
        }


def is_omnibus(attr: Attribute) -> bool:
    """The attribute's omnibus (catch-all) flag."""
    return attr.omnibus


def _require(condition: bool, reason: str) -> None:
    if not condition:
        raise SchemaInvalid(reason)


def _parse_attribute(raw: dict, where: str) -> Attribute:
    _require(isinstance(raw, dict), f"{where}: attribute must be an object")
    name = raw.get("name")
    description = raw.get("description")
    _require(isinstance(name, str) and name != "", f"{where}: attribute name required")
    _require(
        isinstance(description, str) and description != "",
        f"{where}: attribute {name!r} needs a non-empty description",
    )
    _require("/" not in name, f"{where}: attribute name {name!r} must not contain '/'")
    domain_raw = raw.get("value_domain", "Presence")
    try:
        value_domain = ValueDomain(domain_raw)
    except ValueError:
        raise SchemaInvalid(
            f"{where}: attribute {name!r} has unknown value_domain {domain_raw!r}"
        ) from None
    omnibus = raw.get("omnibus")
    if omnibus is None:
        omnibus = default_omnibus(name, description)
    _require(isinstance(omnibus, bool), f"{where}: omnibus must be a boolean")
    return Attribute(
        name=name, description=description, value_domain=value_domain, omnibus=omnibus
    )


def _parse_section(raw: dict) -> Section:
    _require(isinstance(raw, dict), "section must be an object")
    name = raw.get("name")
    _require(isinstance(name, str) and name != "", "section name required")
    _require("/" not in name, f"section name {name!r} must not contain '/'")
    where = f"section {name!r}"
    categories_raw = raw.get("mapped_categories")
    _require(
        isinstance(categories_raw, list) and len(categories_raw) > 0,
        f"{where}: mapped_categories must be a non-empty list",
    )
    try:
        mapped = frozenset(category_from_name(c) for c in categories_raw)
    except ValueError as exc:
        raise SchemaInvalid(f"{where}: {exc}") from None
    template = raw.get("question_template")
    _require(
        isinstance(template, str) and template != "",
        f"{where}: question_template required",
    )
    attributes_raw = raw.get("attributes")
    _require(
        isinstance(attributes_raw, list) and len(attributes_raw) > 0,
        f"{where}: attributes must be a non-empty list",
    )
    attributes = tuple(_parse_attribute(a, where) for a in attributes_raw)
    names = [a.name for a in attributes]
    _require(
        len(names) == len(set(names)), f"{where}: duplicate attribute names"
    )
    return Section(
        name=name,
        mapped_categories=mapped,
        question_template=template,
        attributes=attributes,
    )


def schema_from_dict(raw: dict) -> LabelSchema:
    _require(isinstance(raw, dict), "schema must be a JSON object")
    platform_id = raw.get("platform_id")
    version = raw.get("version")
    _require(isinstance(platform_id, str) and platform_id != "", "platform_id required")
    _require(isinstance(version, str) and version != "", "version required")
    sections_raw = raw.get("sections")
    _require(
        isinstance(sections_raw, list) and len(sections_raw) > 0,
        "sections must be a non-empty list",
    )
    sections = tuple(_parse_section(s) for s in sections_raw)
    names = [s.name for s in sections]
    _require(len(names) == len(set(names)), "duplicate section names")
    return LabelSchema(platform_id=platform_id, version=version, sections=sections)


def load_schema(path: str | Path) -> LabelSchema:
    """Parse and validate a schema file; SchemaInvalid explains any problem."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaInvalid(f"malformed JSON in {path}: {exc}") from exc
    return schema_from_dict(raw)


def schema_to_dict(schema: LabelSchema) -> dict:
    sections = []
    for section in schema.sections:
        attributes = []
        for attr in section.attributes:
            entry: dict = {
                "name": attr.name,
                "description": attr.description,
                "value_domain": attr.value_domain.value,
            }
            # Canonical form states the flag only where it overrides the
            # default word-"other" rule, so dump(load(x)) is a fixpoint.
            if attr.omnibus != default_omnibus(attr.name, attr.description):
                entry["omnibus"] = attr.omnibus
            attributes.append(entry)
        sections.append(
            {
                "name": section.name,
                "mapped_categories": sorted(c.value for c in section.mapped_categories),
                "question_template": section.question_template,
                "attributes": attributes,
            }
        )
    return {
        "platform_id": schema.platform_id,
        "version": schema.version,
        "sections": sections,
    }


def schema_to_json(schema: LabelSchema) -> str:
    """Canonical serialization: 2-space indent, unescaped unicode, newline EOF."""
    return json.dumps(schema_to_dict(schema), indent=2, ensure_ascii=False) + "\n"


def save_schema(schema: LabelSchema, path: str | Path) -> None:
    Path(path).write_text(schema_to_json(schema), encoding="utf-8")


def bundled_schema_path(name: str) -> Path:
    """Filesystem path of a bundled schema (google-data-safety, apple-app-privacy)."""
    candidate = resources.files("policy2label.data") / f"{name}.json"
    path = Path(str(candidate))
    if not path.exists():
        raise FileNotFoundError(f"no bundled schema named {name!r}")
    return path


class ProvenanceEntry(NamedTuple):
    """One question/answer trace line behind a label value.

    group_specific marks segments containing group-scoped markers (children,
    region clauses); advisory only, never affects the value.
    """

    segment_id: int
    answer: str
    group_specific: bool = False


@dataclass
class PrivacyLabel:
    """One label instance whose values cover exactly its schema's pairs."""

    schema_ref: str
    origin: LabelOrigin
    values: dict[tuple[str, str], Presence]
    provenance: dict[tuple[str, str], list[ProvenanceEntry]] | None = None


def new_label(
    schema: LabelSchema,
    origin: LabelOrigin,
    default: Presence = Presence.ABSENT,
) -> PrivacyLabel:
    return PrivacyLabel(
        schema_ref=schema.ref,
        origin=origin,
        values={pair: default for pair in schema.pairs()},
    )


def validate_label(label: PrivacyLabel, schema: LabelSchema) -> None:
    """Raise SchemaMismatch unless the label covers the schema pairs exactly."""
    if label.schema_ref != schema.ref:
        raise SchemaMismatch(
            f"label references {label.schema_ref!r}, expected {schema.ref!r}"
        )
    expected = set(schema.pairs())
    actual = set(label.values)
    if actual != expected:
        missing = sorted(expected - actual)
        extra = sorted(actual - expected)
        raise SchemaMismatch(
            f"label values mismatch schema: missing {missing[:3]}, extra {extra[:3]}"
        )
    if label.provenance:
        stray = set(label.provenance) - expected
        if stray:
            raise SchemaMismatch(f"provenance for unknown pairs: {sorted(stray)[:3]}")


def _pair_key(section: str, attribute: str) -> str:
    return f"{section}/{attribute}"


def _split_pair_key(key: str) -> tuple[str, str]:
    if "/" not in key:
        raise SchemaMismatch(f"label key {key!r} is not '<section>/<attribute>'")
    section, attribute = key.split("/", 1)
    return section, attribute


def label_to_dict(label: PrivacyLabel) -> dict:
    payload: dict = {
        "schema_ref": label.schema_ref,
        "origin": label.origin.value,
        "values": {
            _pair_key(s, a): presence.value for (s, a), presence in label.values.items()
        },
    }
    if label.provenance is not None:
        payload["provenance"] = {
            _pair_key(s, a): [
                {
                    "segment_id": e.segment_id,
                    "answer": e.answer,
                    "group_specific": e.group_specific,
                }
                for e in entries
            ]
            for (s, a), entries in label.provenance.items()
        }
    return payload


def label_from_dict(raw: dict) -> PrivacyLabel:
    try:
        origin = LabelOrigin(raw["origin"])
        values = {
            _split_pair_key(k): Presence(v) for k, v in raw["values"].items()
        }
        provenance = None
        if "provenance" in raw and raw["provenance"] is not None:
            provenance = {
                _split_pair_key(k): [
                    ProvenanceEntry(
                        segment_id=int(e["segment_id"]),
                        answer=str(e["answer"]),
                        group_specific=bool(e.get("group_specific", False)),
                    )
                    for e in entries
                ]
                for k, entries in raw["provenance"].items()
            }
        return PrivacyLabel(
            schema_ref=str(raw["schema_ref"]),
            origin=origin,
            values=values,
            provenance=provenance,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaMismatch(f"malformed label payload: {exc}") from exc


def save_label(label: PrivacyLabel, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(label_to_dict(label), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def load_label(path: str | Path) -> PrivacyLabel:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"malformed JSON in {path}: {exc}") from exc
    return label_from_dict(raw)


def select_segments(
    schema: LabelSchema, section: Section, segments: Iterable[Segment]
) -> list[Segment]:
    """Segments whose categories intersect the section's mapped categories.

    Document order and multiplicity are preserved; the result is a
    subsequence of the input and may be empty.
    """
    return [s for s in segments if s.categories & section.mapped_categories]
