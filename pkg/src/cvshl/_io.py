#
# Copyright Amazon.com Inc. or its affiliates.
# SPDX-License-Identifier: MIT
#
"""
File formats: binary tensors and parameter containers, JSON manifests, plans and ground truth, PNM images and
atomic output writing.

Tensor files are little-endian and row-major::

    offset  size       field
    0       4          magic "CVST"
    4       2 (u16)    format version
    6       1 (u8)     dtype tag, 1 = float32, 2 = float64
    7       1 (u8)     ndim
    8       4 * ndim   dims (u32 each)
    ...                payload, product(dims) * itemsize bytes

Parameter containers start with magic "CVSP", a u16 version, a u8 normalisation flag and a u16 entry count; each
entry is a u16 name length, the UTF-8 name and the tensor record (dtype tag onwards) of the array.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import io
import json
import logging
import math
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import cv2
import numpy as np

from ._decoder import DecoderParams
from ._errors import ManifestError, TensorFormatError
from ._geometry import LATITUDE_TIERS, LONGITUDE_TIERS, Viewpoint
from ._metrics import GroundTruth, HighlightMark
from ._planner import Highlight, Trajectory
from ._ranking import CLASS_TAGS, EpochRecord, Triplet
from ._scoremap import SphereScoreMap
from .cli._parser import __script_name__

_io_logger = logging.getLogger(__script_name__)

TENSOR_MAGIC = b"CVST"
PARAMS_MAGIC = b"CVSP"
FORMAT_VERSION = 1
MANIFEST_VERSION = 1
SEGMENT_SECONDS = 5
DEFAULT_FPS = 5

_DTYPE_TAGS: dict[int, np.dtype] = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_TAG_OF_KIND = {"f4": 1, "f8": 2}


# +------------------------------------------------------------------------------------------------------------------+
# | ATOMIC OUTPUT
# +------------------------------------------------------------------------------------------------------------------+


class AtomicWriter:
    """
    Context manager around replacing an output file:

    * Write to a temporary file next to the output first.
    * Only replace the output if the content changed.
    * Replace with a rename, so readers never see a partial file.

    .. invisible-code-block: python

        from pathlib import Path
        from cvshl._io import AtomicWriter
        import tempfile

    .. code-block:: python

        with tempfile.TemporaryDirectory() as temp_dir:
            output_file = Path(temp_dir) / "plan.json"
            with AtomicWriter(output_file, b"{}") as writer:
                assert writer.will_overwrite is False
                assert writer.swap() is True

            with AtomicWriter(output_file, b"{}") as writer:
                assert writer.swap() is False  # unchanged

            with AtomicWriter(output_file, b"[]") as writer:
                assert writer.will_overwrite is True
                assert writer.swap() is True

            assert not (Path(temp_dir) / "plan.json.tmp").exists()

    :param output_file: The file to write.
    :param data: Its new content.
    """

    def __init__(self, output_file: Path, data: bytes) -> None:
        self._output_file = Path(output_file)
        self._data = data
        self._temp_file = self._output_file.with_name(f"{self._output_file.name}.tmp")

    @functools.cached_property
    def temp_file(self) -> Path:
        self._temp_file.parent.mkdir(parents=True, exist_ok=True)
        self._temp_file.write_bytes(self._data)
        return self._temp_file

    @functools.cached_property
    def will_overwrite(self) -> bool:
        """
        True if the output file exists and differs from the new content.
        """
        if not self._output_file.exists():
            return False
        new_hash = hashlib.sha256(self.temp_file.read_bytes()).hexdigest()
        old_hash = hashlib.sha256(self._output_file.read_bytes()).hexdigest()
        return new_hash != old_hash

    def swap(self) -> bool:
        """
        Move the new content into place.

        :return: False if the output already held the same bytes, otherwise True.
        """
        if self._output_file.exists() and not self.will_overwrite:
            return False
        os.replace(self.temp_file, self._output_file)
        return True

    # +--[CONTEXT MANAGER]----------------------------------------------------+
    def __enter__(self) -> AtomicWriter:
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc_value: BaseException | None,  # pylint: disable=W0613
        traceback: Any,  # pylint: disable=W0613
    ) -> None:
        self._temp_file.unlink(missing_ok=True)
        self.__dict__.pop("temp_file", None)  # reset cached property
        self.__dict__.pop("will_overwrite", None)  # reset cached property


def write_bytes_atomically(path: Path, data: bytes) -> bool:
    with AtomicWriter(path, data) as writer:
        changed = writer.swap()
    _io_logger.debug("%s %s", "Wrote" if changed else "Unchanged", path)
    return changed


def write_json(path: Path, document: Any, indent: int = 2) -> bool:
    return write_bytes_atomically(path, (json.dumps(document, indent=indent) + "\n").encode("utf-8"))


def read_json(path: Path, what: str = "JSON document") -> Any:
    """
    :raises ManifestError: with the byte offset of a syntax error, or if the file cannot be read.
    """
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise ManifestError(f"Cannot read {what}: {e.strerror}", path) from e
    try:
        return json.loads(raw.decode("utf-8"))
    except UnicodeDecodeError as e:
        raise ManifestError(f"{what} is not UTF-8.", path, e.start) from e
    except json.JSONDecodeError as e:
        raise ManifestError(f"{what} is not valid JSON: {e.msg}", path, len(e.doc[: e.pos].encode("utf-8"))) from e


# +------------------------------------------------------------------------------------------------------------------+
# | TENSORS
# +------------------------------------------------------------------------------------------------------------------+


def _encode_array(array: np.ndarray) -> bytes:
    array = np.asarray(array)
    tag = _TAG_OF_KIND.get(f"{array.dtype.kind}{array.dtype.itemsize}")
    if tag is None:
        raise TensorFormatError(f"Unsupported tensor dtype {array.dtype}; only float32 and float64 are stored.")
    if array.ndim > 255:
        raise TensorFormatError(f"Tensor has too many dimensions ({array.ndim}).")
    header = struct.pack(f"<BB{array.ndim}I", tag, array.ndim, *array.shape)
    return header + np.ascontiguousarray(array, dtype=_DTYPE_TAGS[tag]).tobytes(order="C")


def _decode_array(buffer: bytes, offset: int, path: Path | None) -> tuple[np.ndarray, int]:
    if len(buffer) < offset + 2:
        raise TensorFormatError("Truncated tensor header.", path, len(buffer))
    tag, ndim = struct.unpack_from("<BB", buffer, offset)
    if tag not in _DTYPE_TAGS:
        raise TensorFormatError(f"Unknown dtype tag {tag}.", path, offset)
    offset += 2
    if len(buffer) < offset + 4 * ndim:
        raise TensorFormatError(f"Truncated dimensions (expected {ndim}).", path, len(buffer))
    dims = struct.unpack_from(f"<{ndim}I", buffer, offset)
    offset += 4 * ndim
    dtype = _DTYPE_TAGS[tag]
    size = math.prod(dims) * dtype.itemsize
    if len(buffer) < offset + size:
        raise TensorFormatError(
            f"Truncated payload: {len(buffer) - offset} of {size} bytes for dims {tuple(dims)}.", path, len(buffer)
        )
    array = np.frombuffer(buffer, dtype=dtype, count=math.prod(dims), offset=offset).reshape(dims)
    return array.astype(dtype.newbyteorder("="), copy=True), offset + size


def encode_tensor(tensor: np.ndarray) -> bytes:
    return TENSOR_MAGIC + struct.pack("<H", FORMAT_VERSION) + _encode_array(tensor)


def decode_tensor(buffer: bytes, path: Path | None = None, dtype: Any = None) -> np.ndarray:
    """
    Parse a tensor file image.

    :param buffer: The file content.
    :param path: Used in error messages.
    :param dtype: If given, the dtype the tensor must have.
    :raises TensorFormatError: on a bad magic or version, truncation, trailing bytes or dtype mismatch.
    """
    if len(buffer) < 6:
        raise TensorFormatError("Truncated tensor header.", path, len(buffer))
    if buffer[:4] != TENSOR_MAGIC:
        raise TensorFormatError(f"Bad magic {buffer[:4]!r}, expected {TENSOR_MAGIC!r}.", path, 0)
    (version,) = struct.unpack_from("<H", buffer, 4)
    if version != FORMAT_VERSION:
        raise TensorFormatError(f"Unsupported tensor format version {version}.", path, 4)
    array, end = _decode_array(buffer, 6, path)
    if end != len(buffer):
        raise TensorFormatError(f"{len(buffer) - end} unexpected trailing bytes.", path, end)
    if dtype is not None and array.dtype != np.dtype(dtype):
        raise TensorFormatError(f"Tensor is {array.dtype}, expected {np.dtype(dtype)}.", path, 6)
    return array


def write_tensor(tensor: np.ndarray, path: Path) -> bool:
    """
    Store a float32 or float64 tensor.

    :return: True if the file changed.
    """
    return write_bytes_atomically(path, encode_tensor(tensor))


def read_tensor(path: Path, dtype: Any = None) -> np.ndarray:
    """
    Load a tensor file; see :func:`decode_tensor`.
    """
    path = Path(path)
    try:
        buffer = path.read_bytes()
    except OSError as e:
        raise TensorFormatError(f"Cannot read tensor: {e.strerror}", path) from e
    return decode_tensor(buffer, path, dtype)


def encode_params(params: DecoderParams) -> bytes:
    arrays = params.named_arrays()
    chunks = [PARAMS_MAGIC, struct.pack("<HBH", FORMAT_VERSION, int(params.batch_norm), len(arrays))]
    for name, array in arrays.items():
        encoded_name = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded_name)) + encoded_name)
        chunks.append(_encode_array(array))
    return b"".join(chunks)


def decode_params(buffer: bytes, path: Path | None = None) -> DecoderParams:
    """
    Parse a parameter container.

    :raises TensorFormatError: on any structural problem.
    """
    if len(buffer) < 9:
        raise TensorFormatError("Truncated parameter header.", path, len(buffer))
    if buffer[:4] != PARAMS_MAGIC:
        raise TensorFormatError(f"Bad magic {buffer[:4]!r}, expected {PARAMS_MAGIC!r}.", path, 0)
    version, batch_norm, count = struct.unpack_from("<HBH", buffer, 4)
    if version != FORMAT_VERSION:
        raise TensorFormatError(f"Unsupported parameter format version {version}.", path, 4)
    offset = 9
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        if len(buffer) < offset + 2:
            raise TensorFormatError("Truncated entry name.", path, len(buffer))
        (length,) = struct.unpack_from("<H", buffer, offset)
        offset += 2
        if len(buffer) < offset + length:
            raise TensorFormatError("Truncated entry name.", path, len(buffer))
        name = buffer[offset : offset + length].decode("utf-8", errors="replace")
        offset += length
        arrays[name], offset = _decode_array(buffer, offset, path)
    if offset != len(buffer):
        raise TensorFormatError(f"{len(buffer) - offset} unexpected trailing bytes.", path, offset)
    try:
        return DecoderParams.from_named_arrays(arrays, bool(batch_norm))
    except ValueError as e:
        raise TensorFormatError(f"Inconsistent parameters: {e}", path) from e


def write_params(params: DecoderParams, path: Path) -> bool:
    return write_bytes_atomically(path, encode_params(params))


def read_params(path: Path) -> DecoderParams:
    path = Path(path)
    try:
        buffer = path.read_bytes()
    except OSError as e:
        raise TensorFormatError(f"Cannot read parameters: {e.strerror}", path) from e
    return decode_params(buffer, path)


# +------------------------------------------------------------------------------------------------------------------+
# | JSON SCHEMA
# +------------------------------------------------------------------------------------------------------------------+

_NUMBER = {"type": "number"}
_VIEW = {"type": "object", "required": ["theta", "phi"], "properties": {"theta": _NUMBER, "phi": _NUMBER}}

VIDEO_MANIFEST_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["version", "video_id", "segments"],
    "properties": {
        "version": {"const": MANIFEST_VERSION},
        "video_id": {"type": "string"},
        "fps": {"type": "integer", "minimum": 1},
        "segments": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["start_frame", "end_frame", "glimpses"],
                "properties": {
                    "start_frame": {"type": "integer", "minimum": 0},
                    "end_frame": {"type": "integer", "minimum": 0},
                    "glimpses": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["theta", "phi", "features"],
                            "properties": {"theta": _NUMBER, "phi": _NUMBER, "features": {"type": "string"}},
                        },
                    },
                },
            },
        },
    },
}

TRIPLET_MANIFEST_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["version", "triplets"],
    "properties": {
        "version": {"const": MANIFEST_VERSION},
        "triplets": {
            "type": "array",
            "items": {
                "type": "object",
                "required": list(CLASS_TAGS),
                "properties": {tag: {"type": "string"} for tag in CLASS_TAGS},
            },
        },
    },
}

_PLAN_ENTRY = {
    "type": "object",
    "required": ["segment", "theta", "phi", "scale", "score", "rank"],
    "properties": {"segment": {"type": "integer"}, "theta": _NUMBER, "phi": _NUMBER, "scale": _NUMBER},
}

PLAN_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["version", "video_id", "trajectory", "highlights"],
    "properties": {
        "version": {"const": MANIFEST_VERSION},
        "trajectory": {"type": "array", "items": _PLAN_ENTRY},
        "highlights": {"type": "array", "items": _PLAN_ENTRY},
    },
}

GROUND_TRUTH_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["version", "annotators"],
    "properties": {
        "version": {"const": MANIFEST_VERSION},
        "annotators": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["trajectory"],
                "properties": {
                    "trajectory": {"type": "array", "items": _VIEW},
                    "highlights": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["segment", "theta", "phi"],
                            "properties": {"segment": {"type": "integer"}, "theta": _NUMBER, "phi": _NUMBER},
                        },
                    },
                },
            },
        },
    },
}


def validate_json_schema(schema: dict[str, Any], document: Any) -> bool:
    """
    Validate ``document`` against ``schema`` if jsonschema is installed. A missing jsonschema is not an error.
    """
    try:
        import jsonschema  # type: ignore # pylint: disable=import-outside-toplevel, import-error
    except ImportError:
        _io_logger.warning("jsonschema is not installed; skipping schema validation.")
        return True
    try:
        jsonschema.validate(instance=document, schema=schema)
    except jsonschema.ValidationError as e:
        _io_logger.warning("JSON schema validation error: %s", e.message)
        return False
    return True


def validate_json_schema_unless(no_schema_validation: bool, schema: dict[str, Any], document: Any) -> bool:
    if no_schema_validation:
        _io_logger.debug("Skipping schema validation (--no-schema-validation).")
        return True
    return validate_json_schema(schema, document)


def _load_validated(path: Path, schema: dict[str, Any], what: str, no_schema_validation: bool) -> dict[str, Any]:
    document = read_json(path, what)
    if not isinstance(document, dict):
        raise ManifestError(f"{what} must be a JSON object.", path)
    if document.get("version") != MANIFEST_VERSION:
        raise ManifestError(f"Unsupported {what} version {document.get('version')!r}.", path)
    if not validate_json_schema_unless(no_schema_validation, schema, document):
        raise ManifestError(f"{what} does not match its schema.", path)
    return document


# +------------------------------------------------------------------------------------------------------------------+
# | VIDEO MANIFEST
# +------------------------------------------------------------------------------------------------------------------+


@dataclass(frozen=True)
class GlimpseFeatures:
    """
    The feature tensor file of one glimpse of a segment.
    """

    center: Viewpoint
    path: Path


@dataclass
class SegmentEntry:
    start_frame: int
    end_frame: int
    glimpses: list[GlimpseFeatures] = field(default_factory=list)

    def feature_path(self, theta: float, phi: float) -> Path:
        for glimpse in self.glimpses:
            if math.isclose(glimpse.center.theta, theta, abs_tol=1e-9) and math.isclose(
                glimpse.center.phi, phi, abs_tol=1e-9
            ):
                return glimpse.path
        raise KeyError((theta, phi))


@dataclass
class VideoManifest:
    """
    A video split into contiguous five second segments, each with per-glimpse feature tensors. Feature paths are
    absolute after loading.
    """

    video_id: str
    segments: list[SegmentEntry]
    fps: int = DEFAULT_FPS
    version: int = MANIFEST_VERSION

    @property
    def frames_per_segment(self) -> int:
        return self.fps * SEGMENT_SECONDS

    def __len__(self) -> int:
        return len(self.segments)

    def as_json(self, relative_to: Path | None = None) -> dict[str, Any]:
        def rel(path: Path) -> str:
            return (path.relative_to(relative_to) if relative_to is not None else path).as_posix()

        return {
            "version": self.version,
            "video_id": self.video_id,
            "fps": self.fps,
            "segments": [
                {
                    "start_frame": s.start_frame,
                    "end_frame": s.end_frame,
                    "glimpses": [
                        {"theta": g.center.theta, "phi": g.center.phi, "features": rel(g.path)} for g in s.glimpses
                    ],
                }
                for s in self.segments
            ],
        }


def validate_manifest(manifest: VideoManifest, path: Path | None = None, require_grid: bool = True) -> None:
    """
    Check segment contiguity and length, the presence of every grid glimpse and that feature files exist.

    :raises ManifestError: naming the first offending segment, glimpse or file.
    """
    if not manifest.segments:
        raise ManifestError("Manifest has no segments.", path)
    expected = manifest.frames_per_segment
    for index, segment in enumerate(manifest.segments):
        if segment.end_frame - segment.start_frame != expected:
            raise ManifestError(
                f"Segment {index} spans frames [{segment.start_frame}, {segment.end_frame}), expected {expected} "
                f"frames ({SEGMENT_SECONDS} s at {manifest.fps} fps).",
                path,
            )
        if index > 0:
            previous = manifest.segments[index - 1]
            if segment.start_frame > previous.end_frame:
                raise ManifestError(
                    f"Gap between segment {index - 1} (ends {previous.end_frame}) and segment {index} "
                    f"(starts {segment.start_frame}).",
                    path,
                )
            if segment.start_frame < previous.end_frame:
                raise ManifestError(
                    f"Segment {index} (starts {segment.start_frame}) overlaps segment {index - 1} "
                    f"(ends {previous.end_frame}).",
                    path,
                )
        if require_grid:
            for theta in LATITUDE_TIERS:
                for phi in LONGITUDE_TIERS:
                    try:
                        segment.feature_path(theta, phi)
                    except KeyError:
                        raise ManifestError(
                            f"Segment {index} is missing the feature file of glimpse (theta={theta}, phi={phi}).", path
                        ) from None
        for glimpse in segment.glimpses:
            if not glimpse.path.is_file():
                raise ManifestError(f"Segment {index} references missing feature file {glimpse.path}.", path)


def load_manifest(path: Path, require_grid: bool = True, no_schema_validation: bool = False) -> VideoManifest:
    """
    Load and validate a video manifest. Relative feature paths resolve against the manifest's directory.

    :param path: The manifest file.
    :param require_grid: Require all twelve grid glimpses in every segment.
    :param no_schema_validation: Skip JSON schema validation.
    :raises ManifestError: for malformed manifests, gaps, overlaps, missing glimpses or files.
    """
    path = Path(path)
    document = _load_validated(path, VIDEO_MANIFEST_SCHEMA, "video manifest", no_schema_validation)
    base = path.parent
    try:
        manifest = VideoManifest(
            video_id=str(document["video_id"]),
            fps=int(document.get("fps", DEFAULT_FPS)),
            segments=[
                SegmentEntry(
                    int(s["start_frame"]),
                    int(s["end_frame"]),
                    [
                        GlimpseFeatures(Viewpoint(float(g["theta"]), float(g["phi"])), base / str(g["features"]))
                        for g in s["glimpses"]
                    ],
                )
                for s in document["segments"]
            ],
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ManifestError(f"Malformed video manifest: {e}", path) from e
    if manifest.fps < 1:
        raise ManifestError(f"fps must be positive, got {manifest.fps}.", path)
    validate_manifest(manifest, path, require_grid)
    _io_logger.debug("Loaded manifest %s with %d segments.", path, len(manifest))
    return manifest


def save_manifest(manifest: VideoManifest, path: Path) -> bool:
    return write_json(Path(path), manifest.as_json(Path(path).parent))


# +------------------------------------------------------------------------------------------------------------------+
# | TRIPLET MANIFEST
# +------------------------------------------------------------------------------------------------------------------+


def save_triplets(triplets: Sequence[Triplet], path: Path, tensor_dir: str = "triplets") -> bool:
    """
    Write every triplet member as a float64 tensor file under ``tensor_dir`` and index them in a JSON manifest.
    """
    path = Path(path)
    entries = []
    for index, triplet in enumerate(triplets):
        entry: dict[str, Any] = {}
        for tag, member in zip(CLASS_TAGS, triplet.members()):
            relative = f"{tensor_dir}/{index:05d}_{tag}.cvst"
            write_tensor(np.asarray(member, dtype=np.float64), path.parent / relative)
            entry[tag] = relative
        if triplet.quality is not None:
            entry["quality"] = list(triplet.quality)
        entries.append(entry)
    return write_json(path, {"version": MANIFEST_VERSION, "triplets": entries})


def load_triplets(path: Path, no_schema_validation: bool = False) -> list[Triplet]:
    """
    Load a triplet manifest and its tensors.

    :raises ManifestError: for malformed manifests or missing tensor files.
    """
    path = Path(path)
    document = _load_validated(path, TRIPLET_MANIFEST_SCHEMA, "triplet manifest", no_schema_validation)
    triplets = []
    for index, entry in enumerate(document.get("triplets", [])):
        members = []
        for tag in CLASS_TAGS:
            if tag not in entry:
                raise ManifestError(f"Triplet {index} has no '{tag}' member.", path)
            member_path = path.parent / str(entry[tag])
            if not member_path.is_file():
                raise ManifestError(f"Triplet {index} references missing file {member_path}.", path)
            members.append(read_tensor(member_path))
        quality = entry.get("quality")
        try:
            triplets.append(Triplet(*members, quality=None if quality is None else tuple(quality)))
        except ValueError as e:
            raise ManifestError(f"Triplet {index}: {e}", path) from e
    if not triplets:
        raise ManifestError("Triplet manifest is empty.", path)
    return triplets


def history_csv(history: Iterable[EpochRecord]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["epoch", "mean_loss", "lr"])
    for record in history:
        writer.writerow([record.epoch, repr(record.mean_loss), repr(record.lr)])
    return buffer.getvalue()


# +------------------------------------------------------------------------------------------------------------------+
# | PLANS AND GROUND TRUTH
# +------------------------------------------------------------------------------------------------------------------+


def plan_document(video_id: str, trajectory: Trajectory, highlights: Highlight, motion_limit: float | None) -> dict:
    return {
        "version": MANIFEST_VERSION,
        "video_id": video_id,
        "motion_limit": motion_limit,
        "total_score": trajectory.total,
        "trajectory": trajectory.as_json(),
        "highlights": highlights.as_json(),
    }


@dataclass
class LoadedPlan:
    video_id: str
    trajectory: list[Viewpoint]
    highlights: list[HighlightMark]


def load_plan(path: Path, no_schema_validation: bool = False) -> LoadedPlan:
    path = Path(path)
    document = _load_validated(path, PLAN_SCHEMA, "plan", no_schema_validation)
    try:
        trajectory = [Viewpoint(float(e["theta"]), float(e["phi"])) for e in document["trajectory"]]
        ranked = sorted(document["highlights"], key=lambda e: int(e["rank"]))
        highlights = [HighlightMark(int(e["segment"]), Viewpoint(float(e["theta"]), float(e["phi"]))) for e in ranked]
    except (KeyError, TypeError, ValueError) as e:
        raise ManifestError(f"Malformed plan: {e}", path) from e
    return LoadedPlan(str(document.get("video_id", "")), trajectory, highlights)


def ground_truth_document(gt: GroundTruth) -> dict[str, Any]:
    annotators = []
    for index, trajectory in enumerate(gt.trajectories):
        annotator: dict[str, Any] = {"trajectory": [{"theta": p.theta, "phi": p.phi} for p in trajectory]}
        if index < len(gt.highlights):
            annotator["highlights"] = [
                {"segment": m.segment, "theta": m.center.theta, "phi": m.center.phi} for m in gt.highlights[index]
            ]
        annotators.append(annotator)
    return {"version": MANIFEST_VERSION, "annotators": annotators}


def load_ground_truth(path: Path, no_schema_validation: bool = False) -> GroundTruth:
    path = Path(path)
    document = _load_validated(path, GROUND_TRUTH_SCHEMA, "ground truth", no_schema_validation)
    try:
        annotators = document["annotators"]
        trajectories = [[Viewpoint(float(p["theta"]), float(p["phi"])) for p in a["trajectory"]] for a in annotators]
        # one entry per annotator once any annotator marks highlights, empty where one marks none
        highlights: list[list[HighlightMark]] = []
        if any("highlights" in a for a in annotators):
            highlights = [
                [
                    HighlightMark(int(m["segment"]), Viewpoint(float(m["theta"]), float(m["phi"])))
                    for m in a.get("highlights", [])
                ]
                for a in annotators
            ]
        return GroundTruth(trajectories, highlights)
    except (KeyError, TypeError, ValueError) as e:
        raise ManifestError(f"Malformed ground truth: {e}", path) from e


# +------------------------------------------------------------------------------------------------------------------+
# | SPHERE MAP INDEX
# +------------------------------------------------------------------------------------------------------------------+

SPHERE_MAP_INDEX_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["version", "video_id", "hfov", "aspect", "maps"],
    "properties": {
        "version": {"const": MANIFEST_VERSION},
        "video_id": {"type": "string"},
        "hfov": _NUMBER,
        "aspect": _NUMBER,
        "maps": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["segment", "path"],
                "properties": {"segment": {"type": "integer"}, "path": {"type": "string"}},
            },
        },
    },
}


def save_sphere_maps(video_id: str, maps: Sequence[SphereScoreMap], directory: Path) -> Path:
    """
    Write every segment's sphere map as a tensor file plus an ``index.json`` listing them in segment order.

    :return: The path of the index.
    """
    directory = Path(directory)
    if not maps:
        raise ManifestError("No sphere maps to write.", directory)
    entries = []
    for segment, sphere_map in enumerate(maps):
        name = f"segment_{segment:05d}.cvst"
        write_tensor(sphere_map.cells, directory / name)
        entries.append({"segment": segment, "path": name})
    index = directory / "index.json"
    write_json(
        index,
        {
            "version": MANIFEST_VERSION,
            "video_id": video_id,
            "hfov": maps[0].hfov,
            "aspect": maps[0].aspect,
            "maps": entries,
        },
    )
    return index


def load_sphere_maps(directory: Path, no_schema_validation: bool = False) -> tuple[str, list[SphereScoreMap]]:
    """
    Load the sphere maps written by :func:`save_sphere_maps`.

    :param directory: The map directory, or its ``index.json``.
    :return: The video id and the maps in segment order.
    :raises ManifestError: for a malformed index, a non-contiguous segment list or missing map files.
    """
    directory = Path(directory)
    index = directory if directory.suffix == ".json" else directory / "index.json"
    document = _load_validated(index, SPHERE_MAP_INDEX_SCHEMA, "sphere map index", no_schema_validation)
    try:
        entries = sorted(document["maps"], key=lambda e: int(e["segment"]))
        segments = [int(e["segment"]) for e in entries]
        if segments != list(range(len(segments))):
            raise ManifestError(f"Sphere map segments {segments} are not contiguous from 0.", index)
        maps = []
        for entry in entries:
            path = index.parent / str(entry["path"])
            if not path.is_file():
                raise ManifestError(f"Segment {entry['segment']} references missing map {path}.", index)
            maps.append(SphereScoreMap(read_tensor(path), float(document["hfov"]), float(document["aspect"])))
    except (ManifestError, TensorFormatError):
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ManifestError(f"Malformed sphere map index: {e}", index) from e
    if not maps:
        raise ManifestError("Sphere map index lists no maps.", index)
    return str(document["video_id"]), maps


def load_sphere_map(path: Path, no_schema_validation: bool = False) -> SphereScoreMap:
    """
    Load one map written by :func:`save_sphere_maps` with the window field of view and aspect recorded in the
    ``index.json`` beside it.

    :raises ManifestError: for a missing or malformed index, or one that does not list the map.
    """
    path = Path(path)
    index = path.parent / "index.json"
    document = _load_validated(index, SPHERE_MAP_INDEX_SCHEMA, "sphere map index", no_schema_validation)
    try:
        listed = {str(entry["path"]) for entry in document["maps"]}
        hfov, aspect = float(document["hfov"]), float(document["aspect"])
    except (KeyError, TypeError, ValueError) as e:
        raise ManifestError(f"Malformed sphere map index: {e}", index) from e
    if path.name not in listed:
        raise ManifestError(f"Sphere map index does not list {path.name}.", index)
    return SphereScoreMap(read_tensor(path), hfov, aspect)


# +------------------------------------------------------------------------------------------------------------------+
# | IMAGES
# +------------------------------------------------------------------------------------------------------------------+


def read_pnm(path: Path) -> np.ndarray:
    """
    Read a binary PGM (``H x W``) or PPM (``H x W x 3``, RGB order) image.

    :raises ManifestError: if the file is missing or not a decodable image.
    """
    path = Path(path)
    try:
        raw = np.frombuffer(path.read_bytes(), dtype=np.uint8)
    except OSError as e:
        raise ManifestError(f"Cannot read image: {e.strerror}", path) from e
    image = cv2.imdecode(raw, cv2.IMREAD_UNCHANGED)
    if image is None:
        raise ManifestError("Not a decodable PGM/PPM image.", path, 0)
    if image.ndim == 3:
        image = cv2.cvtColor(image, cv2.COLOR_BGR2RGB)
    return np.asarray(image)


def encode_pnm(image: np.ndarray) -> bytes:
    """
    Encode an 8 bit gray (PGM) or RGB (PPM) image.
    """
    image = np.ascontiguousarray(image, dtype=np.uint8)
    if image.ndim == 3:
        ok, encoded = cv2.imencode(".ppm", cv2.cvtColor(image, cv2.COLOR_RGB2BGR))
    else:
        ok, encoded = cv2.imencode(".pgm", image)
    if not ok:
        raise ManifestError(f"Cannot encode an image of shape {image.shape}.")
    return bytes(encoded.tobytes())


def write_pnm(image: np.ndarray, path: Path) -> bool:
    return write_bytes_atomically(Path(path), encode_pnm(image))
