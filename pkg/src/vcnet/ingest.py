"""Detection result parsing, vocabularies and synset hierarchy mapping.

Detection files are JSON-lines: one object per image with parallel arrays
``names``, ``boxes`` (``[x_min, y_min, x_max, y_max]``) and ``scores``.
"""

from __future__ import annotations

import json
import logging
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

logger = logging.getLogger(__name__)

VOCABULARY_NAMES = ("coco", "objects365", "openimages", "lvis", "custom")


class ValidationError(ValueError):
    """Malformed user input (files, configs, arguments)."""


class DetectionFormatError(ValidationError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise ValidationError(f"non-finite box coordinates {coords}")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValidationError(f"inverted box coordinates {coords}")

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


@dataclass(frozen=True)
class Detection:
    concept: str
    box: BoundingBox
    score: float

    def __post_init__(self):
        if not isinstance(self.concept, str) or not self.concept:
            raise ValidationError("detection concept must be a non-empty string")
        if not (0.0 <= self.score <= 1.0):
            raise ValidationError(f"detection score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class ImageDetections:
    image_path: str
    detections: tuple[Detection, ...] = ()

    def to_json(self) -> str:
        return json.dumps(
            {
                "image_path": self.image_path,
                "names": [d.concept for d in self.detections],
                "boxes": [d.box.as_list() for d in self.detections],
                "scores": [d.score for d in self.detections],
            }
        )


@dataclass(frozen=True)
class Vocabulary:
    name: str
    concepts: tuple[str, ...]
    index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.name not in VOCABULARY_NAMES:
            raise ValidationError(
                f"unknown vocabulary name {self.name!r}; expected one of {VOCABULARY_NAMES}"
            )
        if not self.concepts:
            raise ValidationError("empty vocabulary")
        index: dict[str, int] = {}
        for i, concept in enumerate(self.concepts):
            if concept in index:
                raise ValidationError(f"duplicate concept {concept!r} at position {i}")
            index[concept] = i
        object.__setattr__(self, "index", index)

    def __len__(self) -> int:
        return len(self.concepts)

    def __contains__(self, concept: str) -> bool:
        return concept in self.index


@dataclass(frozen=True)
class SynsetMap:
    entries: Mapping[str, str]

    def __getitem__(self, wnid: str) -> str:
        return self.entries[wnid]

    def __contains__(self, wnid: str) -> bool:
        return wnid in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def load_vocabulary(path: str | Path, name: str = "custom") -> Vocabulary:
    """Read a plain-text vocabulary, one concept per line; blank lines are skipped."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"vocabulary file not found: {path}")
    concepts: list[str] = []
    seen: dict[str, int] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            concept = raw.strip()
            if not concept:
                continue
            if concept in seen:
                raise ValidationError(
                    f"{path}: line {lineno}: duplicate concept {concept!r} "
                    f"(first seen on line {seen[concept]})"
                )
            seen[concept] = lineno
            concepts.append(concept)
    if not concepts:
        raise ValidationError(f"{path}: empty vocabulary")
    return Vocabulary(name, tuple(concepts))


def builtin_vocabulary(name: str = "coco") -> Vocabulary:
    """Vocabularies shipped with the package (currently only COCO's 80 classes)."""
    ref = resources.files("vcnet") / "data" / f"{name}.txt"
    if not ref.is_file():
        raise ValidationError(f"no bundled vocabulary named {name!r}; pass a file path")
    with resources.as_file(ref) as p:
        return load_vocabulary(p, name)


def _parse_record(obj, lineno: int) -> ImageDetections:
    if not isinstance(obj, dict):
        raise DetectionFormatError("expected a JSON object", lineno)
    missing = [k for k in ("image_path", "names", "boxes", "scores") if k not in obj]
    if missing:
        raise DetectionFormatError(f"missing keys {missing}", lineno)
    names, boxes, scores = obj["names"], obj["boxes"], obj["scores"]
    if not (isinstance(names, list) and isinstance(boxes, list) and isinstance(scores, list)):
        raise DetectionFormatError("names, boxes and scores must be arrays", lineno)
    if not (len(names) == len(boxes) == len(scores)):
        raise DetectionFormatError(
            f"array length mismatch: names={len(names)} boxes={len(boxes)} scores={len(scores)}",
            lineno,
        )
    detections = []
    for name, box, score in zip(names, boxes, scores):
        if not isinstance(box, list) or len(box) != 4:
            raise DetectionFormatError(f"box must have 4 coordinates, got {box!r}", lineno)
        try:
            bb = BoundingBox(*(float(c) for c in box))
            detections.append(Detection(name, bb, float(score)))
        except (TypeError, ValueError) as exc:
            raise DetectionFormatError(str(exc), lineno) from None
    return ImageDetections(str(obj["image_path"]), tuple(detections))


def parse_detection_lines(lines: Iterable[str]) -> list[ImageDetections]:
    records = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DetectionFormatError(f"malformed JSON ({exc.msg})", lineno) from None
        records.append(_parse_record(obj, lineno))
    return records


def parse_detection_file(path: str | Path) -> list[ImageDetections]:
    """Parse a JSON-lines detection file, preserving line order."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"detection file not found: {path}")
    with path.open(encoding="utf-8") as fh:
        try:
            return parse_detection_lines(fh)
        except DetectionFormatError as exc:
            raise DetectionFormatError(f"{path}: {exc}") from None


def write_detection_file(path: str | Path, records: Iterable[ImageDetections]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json())
            fh.write("\n")


def filter_detections(d: ImageDetections, threshold: float) -> ImageDetections:
    """Keep detections whose score is at least ``threshold``."""
    kept = tuple(det for det in d.detections if det.score >= threshold)
    return ImageDetections(d.image_path, kept)


def restrict_to_vocabulary(d: ImageDetections, vocab: Vocabulary) -> ImageDetections:
    """Drop detections whose concept is not in ``vocab`` (logged, not raised)."""
    kept = []
    for det in d.detections:
        if det.concept in vocab:
            kept.append(det)
        else:
            logger.warning(
                "%s: dropping detection of %r (not in %s vocabulary)",
                d.image_path, det.concept, vocab.name,
            )
    return ImageDetections(d.image_path, tuple(kept))


def build_synset_map(xml_path: str | Path) -> SynsetMap:
    """Map every ``<synset>`` to its third-from-root ancestor.

    Ancestors are listed nearest-first (parent, grandparent, ..., document
    root), so ``ancestors[-3]`` is the element two levels below the root.
    Synsets with fewer than three ancestors map to themselves.
    """
    try:
        tree = ET.parse(xml_path)
    except (ET.ParseError, OSError) as exc:
        raise ValidationError(f"cannot parse synset XML {xml_path}: {exc}") from None
    root = tree.getroot()
    parent = {child: elem for elem in root.iter() for child in elem}

    entries: dict[str, str] = {}
    for synset in root.iter("synset"):
        wnid = synset.attrib.get("wnid")
        if not wnid:
            raise ValidationError(f"{xml_path}: synset element without a wnid attribute")
        ancestors = []
        node = synset
        while node in parent:
            node = parent[node]
            ancestors.append(node)
        if len(ancestors) >= 3:
            top = ancestors[-3].attrib.get("wnid")
            if not top:
                raise ValidationError(
                    f"{xml_path}: ancestor <{ancestors[-3].tag}> of {wnid} has no wnid attribute"
                )
            entries[wnid] = top
        else:
            entries[wnid] = wnid
    return SynsetMap(entries)
