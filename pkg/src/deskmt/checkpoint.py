"""Self-contained model checkpoints.

Layout: an 8-byte magic, a u32 format version, a u64-length JSON header
(config, vocabularies, epoch, RNG state, wall time, and a parameter
manifest with per-block CRC32), then the raw little-endian float64
parameter blocks in manifest order. A human-readable `.json` sidecar
summarizing the run is written next to the binary.
"""

from __future__ import annotations

import hashlib
import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .network import ModelConfig, ModelParams
from .vocab import Vocabulary

MAGIC = b"DESKMT\x00\x01"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    """Everything needed to resume or decode: loadable without the corpus."""

    config: ModelConfig
    arrays: dict[str, np.ndarray]
    src_vocab: Vocabulary
    tgt_vocab: Vocabulary
    epoch: int = 0
    rng_state: dict | None = None
    wall_time: float = 0.0
    version: int = FORMAT_VERSION
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_params(cls, params: ModelParams, src_vocab: Vocabulary,
                    tgt_vocab: Vocabulary, epoch: int = 0,
                    rng_state: dict | None = None, wall_time: float = 0.0,
                    meta: dict | None = None) -> "Checkpoint":
        arrays = {k: v.copy() for k, v in params.store.state_arrays().items()}
        return cls(config=params.config, arrays=arrays, src_vocab=src_vocab,
                   tgt_vocab=tgt_vocab, epoch=epoch, rng_state=rng_state,
                   wall_time=wall_time, meta=meta or {})

    def restore_params(self) -> ModelParams:
        params = ModelParams(self.config, seed=0)
        params.store.load_state(self.arrays)
        return params

    def digest(self, include_wall_time: bool = False) -> str:
        """Content hash of the checkpoint (wall time excluded by default)."""
        h = hashlib.sha256()
        header = dict(self._header())
        if not include_wall_time:
            header.pop("wall_time", None)
        h.update(json.dumps(header, sort_keys=True).encode())
        for name in sorted(self.arrays):
            h.update(self.arrays[name].astype("<f8").tobytes())
        return h.hexdigest()

    def _vocab_dict(self, v: Vocabulary) -> dict:
        return {"entries": [[t, f] for t, f in v.entries], "cutoff_n": v.cutoff_n}

    def _header(self) -> dict:
        return {
            "format_version": self.version,
            "config": self.config.to_dict(),
            "src_vocab": self._vocab_dict(self.src_vocab),
            "tgt_vocab": self._vocab_dict(self.tgt_vocab),
            "epoch": self.epoch,
            "rng_state": self.rng_state,
            "wall_time": self.wall_time,
            "meta": self.meta,
        }


def save_checkpoint(ckpt: Checkpoint, path: str | Path, sidecar: bool = True) -> Path:
    path = Path(path)
    header = ckpt._header()
    manifest = []
    blocks = []
    for name in sorted(ckpt.arrays):
        raw = np.ascontiguousarray(ckpt.arrays[name], dtype="<f8").tobytes()
        manifest.append({"name": name, "shape": list(ckpt.arrays[name].shape),
                         "nbytes": len(raw), "crc32": zlib.crc32(raw)})
        blocks.append(raw)
    header["params"] = manifest
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", ckpt.version))
        f.write(struct.pack("<Q", len(header_bytes)))
        f.write(header_bytes)
        for raw in blocks:
            f.write(raw)
    if sidecar:
        summary = {
            "epoch": ckpt.epoch,
            "wall_time_seconds": round(ckpt.wall_time, 3),
            "config": ckpt.config.to_dict(),
            "src_vocab_size": ckpt.src_vocab.size,
            "tgt_vocab_size": ckpt.tgt_vocab.size,
            "parameter_tensors": len(ckpt.arrays),
            "parameter_count": int(sum(a.size for a in ckpt.arrays.values())),
            "meta": ckpt.meta,
        }
        Path(str(path) + ".json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read {path}: {e}") from e
    if len(raw) < len(MAGIC) + 12:
        raise CheckpointError(f"{path}: truncated checkpoint")
    if raw[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint file")
    offset = len(MAGIC)
    (version,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    (header_len,) = struct.unpack_from("<Q", raw, offset)
    offset += 8
    if offset + header_len > len(raw):
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(raw[offset:offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: corrupt header: {e}") from e
    offset += header_len

    arrays: dict[str, np.ndarray] = {}
    for entry in header["params"]:
        nbytes = entry["nbytes"]
        if offset + nbytes > len(raw):
            raise CheckpointError(f"{path}: truncated block {entry['name']}")
        block = raw[offset:offset + nbytes]
        if zlib.crc32(block) != entry["crc32"]:
            raise CheckpointError(f"{path}: checksum failure in {entry['name']}")
        arrays[entry["name"]] = np.frombuffer(block, dtype="<f8").reshape(entry["shape"]).copy()
        offset += nbytes
    if offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")

    def vocab_from(d):
        return Vocabulary(entries=[(t, f) for t, f in d["entries"]], cutoff_n=d["cutoff_n"])

    return Checkpoint(
        config=ModelConfig.from_dict(header["config"]),
        arrays=arrays,
        src_vocab=vocab_from(header["src_vocab"]),
        tgt_vocab=vocab_from(header["tgt_vocab"]),
        epoch=header["epoch"],
        rng_state=header["rng_state"],
        wall_time=header["wall_time"],
        version=header["format_version"],
        meta=header.get("meta", {}),
    )
