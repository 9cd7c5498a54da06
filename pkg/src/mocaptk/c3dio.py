"""C3D motion-capture file parsing and writing, marker selection,
catalogs and actor-based partitions.

The C3D layout used here is the public one: 512-byte blocks, a header
block (word 1 carries the first parameter block number and the 0x50
signature byte), a parameter section of group/parameter records, and a
point data section that is either float-coded (scale factor written
negative) or integer-coded (int16 values multiplied by the scale
factor).  Only little-endian (Intel, processor type 84) files are
supported; analog channels are skipped; residual/camera words are read
and discarded.
"""
from __future__ import annotations

import json
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (DataError, MalformedHeader, MissingMarker, TruncatedData,
                     UnknownActor, UnsupportedEncoding)

_BLOCK = 512
_PROC_INTEL = 84


# --------------------------------------------------------------------
# domain types

@dataclass
class C3dFile:
    point_count: int
    frame_count: int
    frame_rate: float
    labels: list
    points: np.ndarray        # (frame_count, point_count, 3), file units
    scale_factor: float = 0.001
    data_format: str = "float"  # "float" | "int"

    def validate(self):
        if self.frame_count < 1 or self.point_count < 1:
            raise ValueError("frame_count and point_count must be >= 1")
        if len(self.labels) != self.point_count:
            raise ValueError("labels must match point_count")
        if self.points.shape != (self.frame_count, self.point_count, 3):
            raise ValueError(f"points shape {self.points.shape} inconsistent with header")
        if self.data_format not in ("float", "int"):
            raise ValueError(f"unknown data_format {self.data_format!r}")


@dataclass
class MotionSequence:
    frames: np.ndarray  # (T, 69) marker-major x,y,z
    fps: float
    label: int | None = None
    actor: str | None = None
    source: str = ""

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2:
            raise ValueError("frames must be (T, dim)")
        if self.fps <= 0:
            raise ValueError("fps must be positive")


@dataclass
class MarkerSet:
    names: list
    aliases: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.names) != len(set(self.names)):
            raise ValueError("marker names must be distinct")

    @property
    def dim(self) -> int:
        return 3 * len(self.names)

    def candidates(self, name: str):
        return [name] + list(self.aliases.get(name, []))

    @classmethod
    def from_json(cls, path) -> "MarkerSet":
        doc = json.loads(Path(path).read_text())
        return cls(names=list(doc["names"]), aliases=dict(doc.get("aliases", {})))


# The toolkit's canonical 23-marker set.  The selection itself is a
# configuration choice (ship your own JSON for other conventions); the
# aliases cover the usual Vicon / Plug-in-Gait label variants found in
# the HDM05 and CMU releases.
DEFAULT_MARKERS = MarkerSet(
    names=[
        "LFHD", "RFHD", "LBHD", "RBHD",
        "C7", "CLAV", "STRN", "T10",
        "LSHO", "LELB", "LWRA",
        "RSHO", "RELB", "RWRA",
        "LFWT", "RFWT",
        "LKNE", "LANK", "LTOE",
        "RKNE", "RANK", "RTOE",
        "SACR",
    ],
    aliases={
        "LFWT": ["LASI", "LHIP"],
        "RFWT": ["RASI", "RHIP"],
        "SACR": ["ROOT", "PELV", "LBWT"],
        "LWRA": ["LWRI", "LWRB"],
        "RWRA": ["RWRI", "RWRB"],
        "LTOE": ["LMT5", "LFOOT"],
        "RTOE": ["RMT5", "RFOOT"],
    },
)

HIP_MARKERS = ("LFWT", "RFWT")


# --------------------------------------------------------------------
# parsing

def _require(blob: bytes, end: int, what: str):
    if end > len(blob):
        raise TruncatedData(f"stream ends inside {what} ({end} > {len(blob)} bytes)")


def parse_c3d(blob: bytes) -> C3dFile:
    """Decode a C3D byte stream.  Coordinates stay in file units."""
    _require(blob, _BLOCK, "header block")
    param_block = blob[0]
    if blob[1] != 0x50:
        raise MalformedHeader(f"signature byte is 0x{blob[1]:02x}, expected 0x50")
    (point_count, _analog, first_frame, last_frame) = struct.unpack_from("<4H", blob, 2)
    scale = struct.unpack_from("<f", blob, 12)[0]
    data_block = struct.unpack_from("<H", blob, 16)[0]
    frame_rate = struct.unpack_from("<f", blob, 20)[0]
    frame_count = last_frame - first_frame + 1
    if point_count < 1 or frame_count < 1:
        raise MalformedHeader("header declares no points or no frames")

    labels = _parse_labels(blob, param_block, point_count)

    data_format = "float" if scale < 0 else "int"
    offset = (data_block - 1) * _BLOCK
    n_values = frame_count * point_count * 4
    if data_format == "float":
        _require(blob, offset + 4 * n_values, "point data")
        raw = np.frombuffer(blob, dtype="<f4", count=n_values, offset=offset)
        pts = raw.reshape(frame_count, point_count, 4)[:, :, :3].astype(np.float64)
    else:
        _require(blob, offset + 2 * n_values, "point data")
        raw = np.frombuffer(blob, dtype="<i2", count=n_values, offset=offset)
        pts = raw.reshape(frame_count, point_count, 4)[:, :, :3].astype(np.float64) * scale

    return C3dFile(point_count=point_count, frame_count=frame_count,
                   frame_rate=float(frame_rate), labels=labels,
                   points=np.ascontiguousarray(pts),
                   scale_factor=abs(float(scale)), data_format=data_format)


def _parse_labels(blob: bytes, param_block: int, point_count: int) -> list:
    """Walk the parameter section for POINT:LABELS; fall back to generic
    names when the section carries none."""
    offset = (param_block - 1) * _BLOCK
    _require(blob, offset + 4, "parameter header")
    proc = blob[offset + 3]
    if proc != _PROC_INTEL:
        raise UnsupportedEncoding(
            f"processor type {proc} unsupported (only little-endian Intel, 84)")
    pos = offset + 4
    group_ids = {}
    labels = None
    point_gid = None
    pending = []  # (group_id, name, payload position) until POINT's id is known
    while pos + 2 <= len(blob):
        name_len = struct.unpack_from("<b", blob, pos)[0]
        gid = struct.unpack_from("<b", blob, pos + 1)[0]
        if name_len == 0:
            break
        n = abs(name_len)  # negative length marks a locked record
        _require(blob, pos + 2 + n + 2, "parameter record")
        name = blob[pos + 2:pos + 2 + n].decode("ascii", "replace").upper()
        after_name = pos + 2 + n
        next_offset = struct.unpack_from("<h", blob, after_name)[0]
        body = after_name + 2
        if gid < 0:
            group_ids[name] = -gid
            if name == "POINT":
                point_gid = -gid
        else:
            pending.append((gid, name, body))
        if next_offset <= 0:
            break
        pos = after_name + next_offset
    if point_gid is not None:
        for gid, name, body in pending:
            if gid == point_gid and name == "LABELS":
                labels = _parse_char_matrix(blob, body)
    if labels is None:
        labels = [f"M{i:03d}" for i in range(point_count)]
    if len(labels) < point_count:
        labels = labels + [f"M{i:03d}" for i in range(len(labels), point_count)]
    return labels[:point_count]


def _parse_char_matrix(blob: bytes, pos: int) -> list:
    elem = struct.unpack_from("<b", blob, pos)[0]
    ndims = blob[pos + 1]
    if elem != -1 or ndims != 2:
        raise MalformedHeader("LABELS parameter must be a 2-D char array")
    width, count = blob[pos + 2], blob[pos + 3]
    start = pos + 4
    _require(blob, start + width * count, "LABELS data")
    out = []
    for i in range(count):
        raw = blob[start + i * width:start + (i + 1) * width]
        out.append(raw.decode("ascii", "replace").strip())
    return out


# --------------------------------------------------------------------
# writing

def _param_record(gid: int, name: str, elem: int, dims: list, payload: bytes) -> bytes:
    head = struct.pack("<bb", len(name), gid) + name.encode("ascii")
    body = struct.pack("<bB", elem, len(dims)) + bytes(dims) + payload + b"\x00"
    return head + struct.pack("<h", 2 + len(body)) + body


def _group_record(gid: int, name: str) -> bytes:
    head = struct.pack("<bb", len(name), -gid) + name.encode("ascii")
    body = b"\x00"
    return head + struct.pack("<h", 2 + len(body)) + body


def write_c3d(file: C3dFile) -> bytes:
    """Emit bytes whose parse is value-equal to *file*."""
    file.validate()
    scale = abs(file.scale_factor) or 0.001
    header_scale = -scale if file.data_format == "float" else scale

    # parameter section: POINT group with the fields readers expect
    width = max(4, max(len(l) for l in file.labels))
    label_blob = b"".join(l.ljust(width).encode("ascii") for l in file.labels)
    records = b"".join([
        _group_record(1, "POINT"),
        _param_record(1, "USED", 2, [], struct.pack("<H", file.point_count)),
        _param_record(1, "FRAMES", 2, [], struct.pack("<H", file.frame_count)),
        _param_record(1, "SCALE", 4, [], struct.pack("<f", header_scale)),
        _param_record(1, "RATE", 4, [], struct.pack("<f", file.frame_rate)),
        _param_record(1, "LABELS", -1, [width, file.point_count], label_blob),
    ])
    records += struct.pack("<bbh", 0, 0, 0)  # terminator
    param_payload = struct.pack("<BBBB", 1, 0x50, 0, _PROC_INTEL) + records
    n_param_blocks = -(-len(param_payload) // _BLOCK)
    param_payload = param_payload.ljust(n_param_blocks * _BLOCK, b"\x00")
    # patch the declared parameter block count
    param_payload = param_payload[:2] + bytes([n_param_blocks]) + param_payload[3:]

    data_block = 2 + n_param_blocks
    header = bytearray(_BLOCK)
    header[0] = 2
    header[1] = 0x50
    struct.pack_into("<4H", header, 2, file.point_count, 0, 1, file.frame_count)
    struct.pack_into("<f", header, 12, header_scale)
    struct.pack_into("<H", header, 16, data_block)
    struct.pack_into("<H", header, 18, 0)
    struct.pack_into("<f", header, 20, file.frame_rate)

    frames4 = np.zeros((file.frame_count, file.point_count, 4))
    frames4[:, :, :3] = file.points
    if file.data_format == "float":
        data = frames4.astype("<f4").tobytes()
    else:
        ints = np.round(frames4 / scale)
        if np.abs(ints).max() > 32767:
            raise ValueError("integer-coded coordinates exceed int16 range at this scale")
        ints[:, :, 3] = 0
        data = ints.astype("<i2").tobytes()
    pad = (-len(data)) % _BLOCK
    return bytes(header) + param_payload + data + b"\x00" * pad


def read_c3d(path) -> C3dFile:
    return parse_c3d(Path(path).read_bytes())


# --------------------------------------------------------------------
# marker selection

def select_markers(file: C3dFile, markers: MarkerSet = DEFAULT_MARKERS,
                   fps: float | None = None, source: str = "") -> MotionSequence:
    """Reorder the file's points into the marker set's canonical order and
    flatten each frame to a 3*len(names) vector."""
    normalized = [_norm_label(l) for l in file.labels]
    indices = []
    missing = []
    for name in markers.names:
        idx = None
        for cand in markers.candidates(name):
            cand = _norm_label(cand)
            if cand in normalized:
                idx = normalized.index(cand)
                break
        if idx is None:
            missing.append(name)
        else:
            indices.append(idx)
    if missing:
        raise MissingMarker(missing)
    frames = file.points[:, indices, :].reshape(file.frame_count, markers.dim)
    return MotionSequence(frames=frames, fps=fps or file.frame_rate, source=source)


def _norm_label(label: str) -> str:
    # CMU-style labels may carry a "subject:" prefix
    return label.split(":")[-1].strip().upper()


# --------------------------------------------------------------------
# catalog and partitions

@dataclass
class CatalogEntry:
    id: str
    path: str
    actor: str
    label: int | None
    frame_count: int
    fps: float


@dataclass
class Partition:
    train: list
    valid: list
    test: list
    policy: str = "actor-based"


DEFAULT_NAME_PATTERN = r"^(?P<actor>[A-Za-z]+\d*)_(?P<label>\d+)_"


def entry_from_filename(path, pattern: str = DEFAULT_NAME_PATTERN) -> tuple:
    """(actor, label) recovered from a file stem like 'bk_12_0042.c3d';
    falls back to (stem, None) so unlabeled corpora still ingest."""
    stem = Path(path).stem
    m = re.match(pattern, stem)
    if not m:
        return stem, None
    groups = m.groupdict()
    label = groups.get("label")
    return groups.get("actor", stem), (int(label) if label is not None else None)


def build_partition(catalog, test_actors, valid_actor) -> Partition:
    actors = {e.actor for e in catalog}
    wanted = set(test_actors) | {valid_actor}
    unknown = wanted - actors
    if unknown:
        raise UnknownActor(f"actors not in catalog: {sorted(unknown)}")
    test_set = set(test_actors)
    train, valid, test = [], [], []
    for e in catalog:
        if e.actor in test_set:
            test.append(e.id)
        elif e.actor == valid_actor:
            valid.append(e.id)
        else:
            train.append(e.id)
    return Partition(train=train, valid=valid, test=test, policy="actor-based")


def build_random_partition(catalog, fractions, rng) -> Partition:
    """Shuffled label-balanced split with the given (train, valid, test)
    fractions; sequences of each class are distributed proportionally."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    by_label = {}
    for e in catalog:
        by_label.setdefault(e.label, []).append(e)
    train, valid, test = [], [], []
    for entries in by_label.values():
        order = list(entries)
        rng.shuffle(order)
        n = len(order)
        n_train = int(round(fractions[0] * n))
        n_valid = int(round(fractions[1] * n))
        train += [e.id for e in order[:n_train]]
        valid += [e.id for e in order[n_train:n_train + n_valid]]
        test += [e.id for e in order[n_train + n_valid:]]
    return Partition(train=train, valid=valid, test=test, policy="random-balanced")


# --- manifests (line-delimited JSON; first line is a meta record) ---

def write_catalog(path, entries, meta: dict) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps({"meta": meta}, sort_keys=True) + "\n")
        for e in entries:
            fh.write(json.dumps({
                "id": e.id, "path": e.path, "actor": e.actor, "label": e.label,
                "frame_count": e.frame_count, "fps": e.fps,
            }, sort_keys=True) + "\n")


def read_catalog(path):
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise DataError(f"catalog {path} is empty")
    meta = json.loads(lines[0]).get("meta", {})
    entries = []
    for line in lines[1:]:
        doc = json.loads(line)
        entries.append(CatalogEntry(id=doc["id"], path=doc["path"], actor=doc["actor"],
                                    label=doc["label"], frame_count=doc["frame_count"],
                                    fps=doc["fps"]))
    return entries, meta


def write_partition(path, partition: Partition, meta: dict) -> None:
    doc = {"meta": meta, "policy": partition.policy, "train": partition.train,
           "valid": partition.valid, "test": partition.test}
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def read_partition(path) -> Partition:
    doc = json.loads(Path(path).read_text())
    return Partition(train=doc["train"], valid=doc["valid"], test=doc["test"],
                     policy=doc.get("policy", "actor-based"))
