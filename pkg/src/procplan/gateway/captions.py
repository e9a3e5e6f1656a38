"""Video captioning clients.

File-based ingestion is the reproducible path: a sidecar next to each
video holds its caption track. Sidecar format (bit-exact): UTF-8, one
segment per line, "start_sec,end_sec,text", filename
"{video_uri_basename}.captions.csv". A deterministic stub synthesizes
tracks when no sidecars exist.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from pathlib import Path

from ..model import CaptionSegment, CaptionTrack
from .errors import UnreadableSidecar

SIDECAR_SUFFIX = ".captions.csv"

#: Audio is excluded by default; pass it explicitly to opt in.
DEFAULT_MODALITIES = ("image", "region")


@dataclass(frozen=True)
class CaptionRequest:
    uri: str
    modalities: tuple[str, ...] = DEFAULT_MODALITIES


@dataclass(frozen=True)
class CaptionResult:
    uri: str
    track: CaptionTrack


def parse_sidecar(text: str, video_index: int = 0) -> CaptionTrack:
    """Parse sidecar lines into a track sorted ascending by start time."""
    segments = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split(",", 2)
        if len(parts) != 3:
            raise UnreadableSidecar(f"line {lineno}: expected 'start_sec,end_sec,text'")
        try:
            start = float(parts[0])
            end = float(parts[1])
        except ValueError:
            raise UnreadableSidecar(f"line {lineno}: non-numeric timestamp") from None
        caption = parts[2].strip()
        if not caption:
            raise UnreadableSidecar(f"line {lineno}: empty caption text")
        if not 0 <= start < end:
            raise UnreadableSidecar(f"line {lineno}: need 0 <= start < end, got {start}..{end}")
        segments.append(CaptionSegment(video_index=video_index, start_sec=start, end_sec=end, text=caption))
    segments.sort(key=lambda s: s.start_sec)
    return CaptionTrack(video_index=video_index, segments=tuple(segments))


class FileCaptioner:
    """Reads sidecar caption files; never touches the network."""

    backend_id = "file-captions"

    def __init__(self, sidecar_root: Path | None = None):
        self.sidecar_root = Path(sidecar_root) if sidecar_root else None

    def _candidates(self, uri: str):
        as_path = Path(uri)
        yield as_path.with_name(as_path.name + SIDECAR_SUFFIX)
        if self.sidecar_root is not None:
            yield self.sidecar_root / (uri + SIDECAR_SUFFIX)
            yield self.sidecar_root / (as_path.name + SIDECAR_SUFFIX)

    def caption(self, request: CaptionRequest, video_index: int = 0) -> CaptionResult:
        for candidate in self._candidates(request.uri):
            try:
                text = candidate.read_text(encoding="utf-8")
            except (FileNotFoundError, IsADirectoryError, ValueError):
                continue
            track = parse_sidecar(text, video_index=video_index)
            return CaptionResult(uri=request.uri, track=track)
        raise UnreadableSidecar(f"no sidecar found for {request.uri!r}")


_SCENES = (
    "hands rinsing produce under running water",
    "ingredients laid out on a wooden counter",
    "a knife slicing items on a cutting board",
    "a pot heating on the stove with steam rising",
    "liquid being poured into a container",
    "a person stirring a mixture in a bowl",
    "finished dish being plated and served",
    "tools arranged neatly on a workbench",
)


class StubCaptioner:
    """Synthesizes a deterministic track per uri; used where no sidecars exist."""

    backend_id = "stub-captions"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def caption(self, request: CaptionRequest, video_index: int = 0) -> CaptionResult:
        material = f"{self.seed}\x00{request.uri}".encode("utf-8")
        rng = random.Random(int.from_bytes(hashlib.sha256(material).digest()[:8], "big"))
        segments = []
        clock = 0.0
        for _ in range(3 + rng.randrange(3)):
            start = clock + rng.randrange(1, 5)
            end = start + rng.randrange(4, 12)
            segments.append(
                CaptionSegment(
                    video_index=video_index,
                    start_sec=start,
                    end_sec=end,
                    text=_SCENES[rng.randrange(len(_SCENES))],
                )
            )
            clock = end
        return CaptionResult(
            uri=request.uri,
            track=CaptionTrack(video_index=video_index, segments=tuple(segments)),
        )
