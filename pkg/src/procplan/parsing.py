"""Structure recovery from raw chat completions.

Real model output is messy: numbered lists, "Step N:" prefixes, markdown
bold, angle-tagged or label-prefixed text/context/visual triples. The
parsers here try a fixed strategy order and report what they did through
ParseDiagnostics; a failed parse raises with the full raw text attached so
nothing is lost for audit.

Strategy order is fixed (ties resolve to the earlier strategy):
  step lists   -> NumberedList, then StepPrefix
  triples      -> TaggedTriple, then LabeledTriple
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from .model import FusedStep, GroundedStep, VanillaStep


class ParseStrategy(str, Enum):
    NUMBERED_LIST = "NumberedList"
    STEP_PREFIX = "StepPrefix"
    TAGGED_TRIPLE = "TaggedTriple"
    LABELED_TRIPLE = "LabeledTriple"


@dataclass
class ParseDiagnostics:
    strategy_used: ParseStrategy
    dropped_lines: int = 0
    warnings: list[str] = field(default_factory=list)


class ParseError(Exception):
    """Base parse failure; ``raw`` preserves the complete input text."""

    def __init__(self, message: str, raw: str):
        self.raw = raw
        super().__init__(message)


class UnparsablePlan(ParseError):
    def __init__(self, raw: str, detail: str = "no strategy yielded any step"):
        super().__init__(detail, raw)


class MissingField(ParseError):
    def __init__(self, raw: str, missing: list[str]):
        self.missing = missing
        super().__init__(f"labels never appeared: {', '.join(missing)}", raw)


# "1. ", "2) ", "(3) " at line start; separator required so "3.14" stays intact
_NUMBERED_RE = re.compile(r"^\s*(?:\((\d{1,3})\)|(\d{1,3})[.)])(?:[ \t]+(?P<body>.*))?$")
_STEP_PREFIX_RE = re.compile(r"^\s*step\s+(\d{1,3})\s*[:.\-]?\s*(?P<body>.*)$", re.IGNORECASE)
_HEADING_RE = re.compile(r"^\s*#{1,6}\s+")
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")
_TAG_RE = re.compile(r"<\s*/?\s*(text|context|visual)\s*>", re.IGNORECASE)
_LABEL_RE = re.compile(r"^\s*(text|context|visual)\s*:\s*(.*)$", re.IGNORECASE)

_FOC_SUBJECT_PREFIXES = (
    "a person", "the person", "someone", "a man", "the man", "a woman",
    "the woman", "a chef", "the chef", "a cook", "the cook",
)


def _strip_markdown(raw: str) -> str:
    """Drop bold markers and heading hashes; the strategies see plain text."""
    lines = []
    for line in raw.splitlines():
        line = _HEADING_RE.sub("", line)
        line = line.replace("**", "").replace("__", "")
        lines.append(line)
    return "\n".join(lines)


def _collapse(text: str) -> str:
    return " ".join(text.split())


def _split_text_context(body: str) -> tuple[str, str]:
    """First sentence (or pre-colon heading) is the step text, rest is context."""
    body = _collapse(body)
    sentence_match = _SENTENCE_SPLIT_RE.search(body)
    sentence_end = sentence_match.start() + 1 if sentence_match else None
    colon = body.find(": ")
    if colon == -1 and body.endswith(":"):
        colon = len(body) - 1
    if colon != -1 and (sentence_end is None or colon < sentence_end):
        text = body[:colon].strip()
        context = body[colon + 1:].strip()
    elif sentence_match:
        text = body[: sentence_match.start() + 1].strip()
        context = body[sentence_match.end():].strip()
    else:
        text, context = body, ""
    if not context:
        context = text
    return text, context


def _collect_list_items(raw: str, marker_re: re.Pattern) -> tuple[list[str], int]:
    """Gather item bodies for a line-marker strategy; returns (items, dropped_lines)."""
    items: list[str] = []
    current: list[str] | None = None
    dropped = 0
    for line in raw.splitlines():
        match = marker_re.match(line)
        if match:
            if current is not None:
                items.append(" ".join(current).strip())
            current = [match.group("body") or ""]
        elif current is not None:
            current.append(line.strip())
        elif line.strip():
            dropped += 1
    if current is not None:
        items.append(" ".join(current).strip())
    return [i for i in items if i], dropped


def _parse_step_list(raw: str) -> tuple[list[str], ParseDiagnostics]:
    cleaned = _strip_markdown(raw)
    for strategy, marker in (
        (ParseStrategy.NUMBERED_LIST, _NUMBERED_RE),
        (ParseStrategy.STEP_PREFIX, _STEP_PREFIX_RE),
    ):
        items, dropped = _collect_list_items(cleaned, marker)
        if items:
            diag = ParseDiagnostics(strategy_used=strategy, dropped_lines=dropped)
            return [_collapse(item) for item in items], diag
    raise UnparsablePlan(raw)


def parse_vanilla(raw: str) -> tuple[list[VanillaStep], ParseDiagnostics]:
    """Parse a step-list completion into contiguous 1..n vanilla steps."""
    if not raw or not raw.strip():
        raise UnparsablePlan(raw or "", "empty completion")
    items, diag = _parse_step_list(raw)
    steps = []
    for i, item in enumerate(items):
        text, context = _split_text_context(item)
        steps.append(VanillaStep(index=i + 1, text=text, context=context))
    return steps, diag


def parse_foc(raw: str) -> tuple[list[FusedStep], ParseDiagnostics]:
    """Parse fused-caption sentences; person-verb-action shape is advisory.

    Source attributions stay empty: completions are not required to cite
    the videos a sentence came from, and no citation syntax is assumed.
    """
    if not raw or not raw.strip():
        raise UnparsablePlan(raw or "", "empty completion")
    items, diag = _parse_step_list(raw)
    steps = []
    for i, sentence in enumerate(items):
        if not sentence.lower().startswith(_FOC_SUBJECT_PREFIXES):
            diag.warnings.append(
                f"step {i + 1}: sentence does not open with a person-subject template"
            )
        steps.append(FusedStep(sentence=sentence))
    return steps, diag


def _is_bare_marker(line: str) -> bool:
    for pattern in (_NUMBERED_RE, _STEP_PREFIX_RE):
        match = pattern.match(line)
        if match and not (match.group("body") or "").strip():
            return True
    return False


def _tagged_fields(raw: str) -> tuple[list[tuple[str, str]], int]:
    """(tag, content) pairs in document order; content runs to the next tag."""
    fields_found: list[tuple[str, str]] = []
    matches = list(_TAG_RE.finditer(raw))
    for i, match in enumerate(matches):
        if match.group(0).replace(" ", "").startswith("</"):
            continue
        tag = match.group(1).lower()
        end = matches[i + 1].start() if i + 1 < len(matches) else len(raw)
        span = raw[match.end():end]
        # a step separator line sitting between blocks is not content
        kept = [ln for ln in span.splitlines() if not _is_bare_marker(ln)]
        content = _collapse(" ".join(kept))
        content = re.sub(r"^[:\-]\s*", "", content)
        if content:
            fields_found.append((tag, content))
    return fields_found, len(matches)


def _labeled_fields(raw: str) -> list[tuple[str, str]]:
    """Label-prefixed fields; continuation lines extend the current value."""
    fields_found: list[tuple[str, str]] = []
    current: tuple[str, list[str]] | None = None

    def flush():
        nonlocal current
        if current is not None:
            value = _collapse(" ".join(current[1]))
            if value:
                fields_found.append((current[0], value))
            current = None

    for line in raw.splitlines():
        marker = _NUMBERED_RE.match(line) or _STEP_PREFIX_RE.match(line)
        if marker:
            flush()
            line = marker.group("body") or ""
            if not line.strip():
                continue
        label = _LABEL_RE.match(line)
        if label:
            flush()
            current = (label.group(1).lower(), [label.group(2)])
        elif current is not None and line.strip():
            current[1].append(line.strip())
    flush()
    return fields_found


def _assemble_triples(
    fields_found: list[tuple[str, str]],
) -> tuple[list[dict], int]:
    """Walk (tag, content) pairs into complete text/context/visual triples."""
    triples: list[dict] = []
    pending: dict[str, str] = {}
    dropped = 0
    for tag, content in fields_found:
        if tag in pending:
            # repeated field before the triple completed: drop the fragment
            dropped += len(pending)
            pending = {}
        pending[tag] = content
        if len(pending) == 3:
            triples.append(pending)
            pending = {}
    if pending:
        dropped += len(pending)
    return triples, dropped


def parse_grounded(raw: str) -> tuple[list[GroundedStep], ParseDiagnostics]:
    """Parse text/context/visual triples from tagged or labeled blocks."""
    if not raw or not raw.strip():
        raise UnparsablePlan(raw or "", "empty completion")
    cleaned = _strip_markdown(raw)

    tagged, n_tags = _tagged_fields(cleaned)
    if n_tags:
        strategy = ParseStrategy.TAGGED_TRIPLE
        fields_found = tagged
    else:
        strategy = ParseStrategy.LABELED_TRIPLE
        fields_found = _labeled_fields(cleaned)

    triples, dropped = _assemble_triples(fields_found)
    if not triples:
        seen_labels = {tag for tag, _ in fields_found}
        missing = [name for name in ("text", "context", "visual") if name not in seen_labels]
        if fields_found and missing:
            raise MissingField(raw, missing)
        raise UnparsablePlan(raw, "no complete text/context/visual triple found")

    diag = ParseDiagnostics(strategy_used=strategy, dropped_lines=dropped)
    if dropped:
        diag.warnings.append(f"dropped {dropped} field(s) from incomplete triples")
    steps = [
        GroundedStep(index=i + 1, text=t["text"], context=t["context"], visual=t["visual"])
        for i, t in enumerate(triples)
    ]
    return steps, diag


def serialize_grounded_steps(steps) -> str:
    """Labeled-triple form; parse_grounded of the result yields *steps* again."""
    blocks = [
        f"Text: {s.text}\nContext: {s.context}\nVisual: {s.visual}" for s in steps
    ]
    return "\n\n".join(blocks)
