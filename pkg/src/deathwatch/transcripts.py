"""Parse scene-structured transcripts and resolve character-name aliases.

Normalized scene format (UTF-8 text)::

    ## SCENE <episode_id> <scene_index>
    SPEAKER: dialogue ...
    OTHER SPEAKER: dialogue ...

A ``## SCENE`` header opens a scene; subsequent non-empty lines are
``<SPEAKER>: <dialogue>`` pairs (the dialogue is ignored by this pipeline);
a blank line or the next header closes the scene. Alias tables are CSVs with
header ``raw_name,canonical_id`` and unify name variants (titles, nicknames)
onto one id per character.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, TextIO


class TranscriptError(ValueError):
    """Base class for transcript and alias-table failures."""


class ParseError(TranscriptError):
    """Malformed transcript input; carries the offending 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnknownNameError(TranscriptError):
    """Raised in strict mode when a name has no alias-table entry."""


class TranscriptFormat(enum.Enum):
    """Supported transcript encodings (only the normalized scene format)."""

    SCENES = "scenes"


SCENE_HEADER_PREFIX = "## SCENE"


@dataclass(frozen=True)
class RawScene:
    """One scene block as parsed, speaker names verbatim (trimmed)."""

    episode_id: str
    scene_index: int
    speaker_names: tuple[str, ...]


@dataclass(frozen=True)
class SceneRecord:
    """One scene after alias resolution: a set of canonical participants."""

    episode_id: str
    scene_index: int
    participants: frozenset[str]


@dataclass(frozen=True)
class AliasTable:
    """Case-folded raw name -> canonical id. Every canonical id maps to itself."""

    entries: dict[str, str] = field(default_factory=dict)

    @staticmethod
    def from_pairs(pairs: Iterable[tuple[str, str]]) -> "AliasTable":
        entries: dict[str, str] = {}
        for raw, canon in pairs:
            key = raw.strip().lower()
            canon = canon.strip().lower()
            if not key:
                raise TranscriptError("alias raw_name is empty")
            if not canon:
                raise TranscriptError(f"alias for {key!r} has empty canonical id")
            if ":" in canon or "\n" in canon:
                raise TranscriptError(f"canonical id {canon!r} contains a reserved character")
            if key in entries and entries[key] != canon:
                raise TranscriptError(
                    f"alias table maps {key!r} to both {entries[key]!r} and {canon!r}"
                )
            entries[key] = canon
        # Canonical ids must resolve to themselves.
        for canon in list(entries.values()):
            existing = entries.get(canon)
            if existing is not None and existing != canon:
                raise TranscriptError(
                    f"canonical id {canon!r} is itself aliased to {existing!r}"
                )
            entries[canon] = canon
        return AliasTable(entries)

    @staticmethod
    def from_csv(path: str | Path) -> "AliasTable":
        """Load a CSV with header ``raw_name,canonical_id``."""
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != [
                "raw_name",
                "canonical_id",
            ]:
                raise TranscriptError(
                    f"{path}: expected header 'raw_name,canonical_id', got {reader.fieldnames}"
                )
            return AliasTable.from_pairs(
                (row["raw_name"], row["canonical_id"]) for row in reader
            )


EMPTY_ALIASES = AliasTable()


def canonicalize(raw_name: str, aliases: AliasTable, strict: bool = False) -> str:
    """Resolve a raw speaker name to its canonical character id.

    Lookup is by trimmed, lowercased name. Unknown names fall back to the
    folded name itself unless ``strict`` is set.
    """
    key = raw_name.strip().lower()
    if not key:
        raise TranscriptError(f"empty or whitespace-only name: {raw_name!r}")
    hit = aliases.entries.get(key)
    if hit is not None:
        return hit
    if strict:
        raise UnknownNameError(f"no alias entry for {key!r}")
    return key


def _line_iter(source: TextIO | str) -> Iterator[str]:
    if isinstance(source, str):
        return iter(io.StringIO(source))
    return iter(source)


def _parse_header(line: str, lineno: int) -> tuple[str, int]:
    parts = line[len(SCENE_HEADER_PREFIX):].split()
    if len(parts) != 2:
        raise ParseError(
            f"scene header needs '<episode_id> <scene_index>', got {line.strip()!r}", lineno
        )
    episode_id, index_text = parts
    try:
        scene_index = int(index_text)
    except ValueError:
        raise ParseError(f"scene index {index_text!r} is not an integer", lineno) from None
    if scene_index < 0:
        raise ParseError(f"scene index {scene_index} is negative", lineno)
    return episode_id, scene_index


def parse_transcript(
    source: TextIO | str, format: TranscriptFormat = TranscriptFormat.SCENES
) -> list[RawScene]:
    """Parse a transcript stream into RawScenes, in file order.

    An empty file yields an empty list. Speaker lines outside a scene block,
    unparseable headers, blocks without speakers, and duplicate
    (episode, index) pairs are all rejected with the offending line number.
    """
    if format is not TranscriptFormat.SCENES:
        raise TranscriptError(f"unsupported transcript format: {format}")

    scenes: list[RawScene] = []
    seen: set[tuple[str, int]] = set()
    header: tuple[str, int] | None = None
    header_line = 0
    speakers: list[str] = []

    def close_scene() -> None:
        nonlocal header
        if header is None:
            return
        if not speakers:
            raise ParseError(
                f"scene {header[0]} {header[1]} has no speaker lines", header_line
            )
        scenes.append(RawScene(header[0], header[1], tuple(speakers)))
        header = None
        speakers.clear()

    lineno = 0
    for lineno, raw_line in enumerate(_line_iter(source), start=1):
        line = raw_line.rstrip("\n").rstrip("\r")
        if line.startswith(SCENE_HEADER_PREFIX):
            close_scene()
            header = _parse_header(line, lineno)
            header_line = lineno
            if header in seen:
                raise ParseError(
                    f"duplicate scene {header[0]} {header[1]}", lineno
                )
            seen.add(header)
        elif not line.strip():
            close_scene()
        else:
            if header is None:
                raise ParseError("speaker line outside a scene block", lineno)
            speaker, sep, _dialogue = line.partition(":")
            if not sep:
                raise ParseError(f"expected '<SPEAKER>: <dialogue>', got {line!r}", lineno)
            speaker = speaker.strip()
            if not speaker:
                raise ParseError("empty speaker name", lineno)
            speakers.append(speaker)
    close_scene()
    return scenes


def to_scene_records(
    raw: list[RawScene], aliases: AliasTable, strict: bool = False
) -> list[SceneRecord]:
    """Canonicalize speakers and collapse each scene to a participant set.

    Scene order and multiplicity are preserved; scenes whose participant set
    comes out empty are dropped.
    """
    records = []
    for scene in raw:
        participants = frozenset(
            canonicalize(name, aliases, strict) for name in scene.speaker_names
        )
        if participants:
            records.append(SceneRecord(scene.episode_id, scene.scene_index, participants))
    return records


def format_scene_records(records: list[SceneRecord]) -> str:
    """Serialize records back to the normalized scene format.

    Participants are emitted as bare ``name:`` speaker lines in sorted order,
    so parse -> serialize -> parse is a fixpoint.
    """
    blocks = []
    for record in records:
        lines = [f"{SCENE_HEADER_PREFIX} {record.episode_id} {record.scene_index}"]
        lines.extend(f"{participant}:" for participant in sorted(record.participants))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def read_scene_file(
    path: str | Path, aliases: AliasTable = EMPTY_ALIASES, strict: bool = False
) -> list[SceneRecord]:
    """Parse a transcript file straight to SceneRecords."""
    with open(path, encoding="utf-8") as fh:
        return to_scene_records(parse_transcript(fh), aliases, strict)
