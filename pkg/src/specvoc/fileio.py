"""Binary file formats: WAV audio, MELF feature files, VCSK checkpoints.

All three formats are little-endian and inspectable with xxd. Parse errors
name the byte offset at which the file stopped making sense.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np


class FormatError(ValueError):
    """Raised when a file does not match its declared binary format."""


@dataclass
class AudioBuffer:
    """Mono signal with its sample rate; samples nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError(f"expected mono 1-D samples, got shape {self.samples.shape}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples contain NaN or Inf")

    def __len__(self) -> int:
        return self.samples.size


# -----------------------------
# WAV (RIFF)
# -----------------------------
_PCM16 = 1
_IEEE_FLOAT = 3


def read_wav(path) -> AudioBuffer:
    """Read a mono RIFF WAV: 16-bit PCM or 32-bit IEEE float."""
    with open(path, "rb") as fh:
        data = fh.read()

    def need(offset, count, what):
        if offset + count > len(data):
            raise FormatError(f"offset {offset}: truncated while reading {what}")
        return data[offset: offset + count]

    if need(0, 4, "RIFF magic") != b"RIFF":
        raise FormatError("offset 0: not a RIFF file")
    if need(8, 4, "WAVE magic") != b"WAVE":
        raise FormatError("offset 8: RIFF file is not WAVE")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos: pos + 4]
        (chunk_len,) = struct.unpack_from("<I", data, pos + 4)
        body = need(pos + 8, chunk_len, f"{chunk_id!r} chunk body")
        if chunk_id == b"fmt ":
            if chunk_len < 16:
                raise FormatError(f"offset {pos + 4}: fmt chunk too short ({chunk_len})")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
            fmt_offset = pos + 8
        elif chunk_id == b"data":
            payload = body
        pos += 8 + chunk_len + (chunk_len & 1)  # chunks are word-aligned

    if fmt is None:
        raise FormatError(f"offset {pos}: no fmt chunk found")
    if payload is None:
        raise FormatError(f"offset {pos}: no data chunk found")

    tag, channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if channels != 1:
        raise FormatError(f"offset {fmt_offset + 2}: expected mono, got {channels} channels")
    if tag == _PCM16 and bits == 16:
        samples = np.frombuffer(payload, dtype="<i2").astype(np.float64) / 32767.0
    elif tag == _IEEE_FLOAT and bits == 32:
        samples = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    else:
        raise FormatError(
            f"offset {fmt_offset}: unsupported format tag {tag} with {bits}-bit samples"
        )
    return AudioBuffer(samples, sample_rate)


def write_wav(path, audio: AudioBuffer) -> None:
    """Write mono 16-bit PCM little-endian."""
    clipped = np.clip(audio.samples, -1.0, 1.0)
    pcm = np.round(clipped * 32767.0).astype("<i2").tobytes()  # read_wav divides by the same scale
    header = b"RIFF" + struct.pack("<I", 36 + len(pcm)) + b"WAVE"
    fmt = b"fmt " + struct.pack(
        "<IHHIIHH", 16, _PCM16, 1, audio.sample_rate, audio.sample_rate * 2, 2, 16
    )
    with open(path, "wb") as fh:
        fh.write(header + fmt + b"data" + struct.pack("<I", len(pcm)) + pcm)


# -----------------------------
# MELF feature files
# -----------------------------
MELF_MAGIC = b"MELF"
MELF_VERSION = 1


def write_melf(path, mel: np.ndarray) -> None:
    """Write a [frames, n_mels] feature matrix, frame-major float32."""
    mel = np.asarray(mel)
    if mel.ndim != 2:
        raise ValueError(f"expected [frames, n_mels], got shape {mel.shape}")
    n_frames, n_mels = mel.shape
    with open(path, "wb") as fh:
        fh.write(MELF_MAGIC)
        fh.write(struct.pack("<III", MELF_VERSION, n_mels, n_frames))
        fh.write(np.ascontiguousarray(mel, dtype="<f4").tobytes())


def read_melf(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MELF_MAGIC:
        raise FormatError("offset 0: bad MELF magic")
    if len(data) < 16:
        raise FormatError(f"offset {len(data)}: truncated MELF header")
    version, n_mels, n_frames = struct.unpack_from("<III", data, 4)
    if version != MELF_VERSION:
        raise FormatError(f"offset 4: unsupported MELF version {version}")
    expected = 16 + 4 * n_mels * n_frames
    if len(data) != expected:
        raise FormatError(
            f"offset {min(len(data), expected)}: payload size mismatch "
            f"(header promises {n_frames}x{n_mels})"
        )
    flat = np.frombuffer(data, dtype="<f4", offset=16)
    return flat.reshape(n_frames, n_mels).astype(np.float64)


# -----------------------------
# VCSK checkpoints
# -----------------------------
VCSK_MAGIC = b"VCSK"
VCSK_VERSION = 1


def save_checkpoint(path, tensors: dict) -> None:
    """Write named float32 tensors, sorted by name for byte determinism.

    Layout per tensor: u16 name length, UTF-8 name, u8 rank, u32 per-dim
    sizes, then little-endian float32 data.
    """
    names = sorted(tensors)
    with open(path, "wb") as fh:
        fh.write(VCSK_MAGIC)
        fh.write(struct.pack("<II", VCSK_VERSION, len(names)))
        for name in names:
            arr = np.asarray(tensors[name], dtype="<f4")  # keeps rank-0 tensors rank-0
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(arr.tobytes())


def load_checkpoint(path) -> dict:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != VCSK_MAGIC:
        raise FormatError("offset 0: bad VCSK magic")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VCSK_VERSION:
        raise FormatError(f"offset 4: unsupported VCSK version {version}")
    tensors = {}
    pos = 12
    for _ in range(count):
        try:
            (name_len,) = struct.unpack_from("<H", data, pos)
            name = data[pos + 2: pos + 2 + name_len].decode("utf-8")
            pos += 2 + name_len
            (rank,) = struct.unpack_from("<B", data, pos)
            pos += 1
            shape = struct.unpack_from(f"<{rank}I", data, pos) if rank else ()
            pos += 4 * rank
            size = int(np.prod(shape)) if rank else 1
            arr = np.frombuffer(data, dtype="<f4", count=size, offset=pos)
            pos += 4 * size
        except (struct.error, ValueError) as exc:
            raise FormatError(f"offset {pos}: truncated checkpoint ({exc})") from exc
        tensors[name] = arr.reshape(shape).astype(np.float32)
    return tensors
