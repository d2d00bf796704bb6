"""Binary containers: a JSON header followed by little-endian float64 arrays.

Layout of every container::

    magic (8 bytes) | header length (uint64 LE) | header JSON (utf-8) | payload

The header lists each array's name and shape in payload order and carries
the SHA-256 of the payload, so a payload that does not match its header is
always rejected.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

FEATURE_MAGIC = b"NVXFEAT1"
EEG_MAGIC = b"NVXEEG01"
CHECKPOINT_MAGIC = b"NVXCKPT1"

FEATURE_WIDTHS = {"mfcc13": 13, "eeg155": 155, "eeg30": 30}


def feature_width(kind: str) -> int:
    """Width of a feature kind; ``eeg<k>`` covers KPCA outputs of any size."""
    if kind in FEATURE_WIDTHS:
        return FEATURE_WIDTHS[kind]
    if kind.startswith("eeg") and kind[3:].isdigit() and int(kind[3:]) > 0:
        return int(kind[3:])
    raise ContainerError(f"unknown feature kind {kind!r}")


class ContainerError(ValueError):
    pass


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def pack(magic: bytes, header: dict, arrays: dict) -> bytes:
    layout = []
    chunks = []
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr, dtype="<f8")
        layout.append({"name": name, "shape": list(a.shape)})
        chunks.append(a.tobytes())
    payload = b"".join(chunks)
    full = dict(header)
    full["arrays"] = layout
    full["payload_sha256"] = hashlib.sha256(payload).hexdigest()
    head = canonical_json(full).encode()
    return magic + struct.pack("<Q", len(head)) + head + payload


def unpack(blob: bytes, magic: bytes, source="<bytes>"):
    if blob[:8] != magic:
        raise ContainerError(f"{source}: bad magic {blob[:8]!r}, expected {magic!r}")
    if len(blob) < 16:
        raise ContainerError(f"{source}: truncated header")
    (n,) = struct.unpack("<Q", blob[8:16])
    try:
        header = json.loads(blob[16:16 + n].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"{source}: corrupt header ({exc})") from None
    payload = blob[16 + n:]
    if hashlib.sha256(payload).hexdigest() != header.get("payload_sha256"):
        raise ContainerError(f"{source}: payload hash does not match header")
    expected = sum(8 * int(np.prod(item["shape"], dtype=np.int64)) for item in header["arrays"])
    if expected != len(payload):
        raise ContainerError(
            f"{source}: declared shapes need {expected} bytes, payload has {len(payload)}"
        )
    arrays = {}
    offset = 0
    for item in header["arrays"]:
        count = int(np.prod(item["shape"], dtype=np.int64))
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
        arrays[item["name"]] = arr.reshape(item["shape"]).astype(np.float64)
        offset += 8 * count
    return header, arrays


def write_bytes(path, blob: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    tmp.replace(path)


def write_features(path, kind: str, frames: np.ndarray, frame_rate_hz: int = 100) -> None:
    width = feature_width(kind)
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[1] != width:
        raise ContainerError(f"{kind} needs width {width}, got {frames.shape}")
    header = {"kind": kind, "frame_rate_hz": frame_rate_hz, "frames": frames.shape[0]}
    write_bytes(path, pack(FEATURE_MAGIC, header, {"data": frames}))


def read_features(path):
    """Return ``(kind, frame_rate_hz, frames x width array)``."""
    header, arrays = unpack(Path(path).read_bytes(), FEATURE_MAGIC, str(path))
    data = arrays["data"]
    if data.shape != (header["frames"], feature_width(header["kind"])):
        raise ContainerError(f"{path}: header frame count/width disagree with payload")
    return header["kind"], header["frame_rate_hz"], data


def write_eeg(path, recording) -> None:
    header = {
        "sample_rate_hz": recording.sample_rate_hz,
        "channel_labels": list(recording.channel_labels),
    }
    write_bytes(path, pack(EEG_MAGIC, header, {"samples": recording.data}))


def read_eeg(path):
    from .eeg import EegRecording

    header, arrays = unpack(Path(path).read_bytes(), EEG_MAGIC, str(path))
    return EegRecording(arrays["samples"], header["sample_rate_hz"],
                        tuple(header["channel_labels"]))


def write_checkpoint(path, header: dict, arrays: dict) -> None:
    write_bytes(path, pack(CHECKPOINT_MAGIC, header, arrays))


def read_checkpoint(path, expected_config_hash: str | None = None):
    header, arrays = unpack(Path(path).read_bytes(), CHECKPOINT_MAGIC, str(path))
    if expected_config_hash is not None and header.get("config_hash") != expected_config_hash:
        raise ContainerError(
            f"{path}: config hash {header.get('config_hash')} does not match "
            f"expected {expected_config_hash}"
        )
    return header, arrays
