"""Checkpoint persistence: a JSON manifest plus one little-endian float64 blob.

The manifest lists every array (name, shape, element offset, count) in
blob order together with the model config, step counter, optimizer step,
and rng state. Loading validates the byte count and that the parameter
names match the architecture exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..backbone import ModelConfig, init_params
from ..numkit import Rng, Tensor


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict[str, np.ndarray]
    step: int = 0
    opt_m: dict[str, np.ndarray] = field(default_factory=dict)
    opt_v: dict[str, np.ndarray] = field(default_factory=dict)
    opt_t: int = 0
    rng_state: dict | None = None
    ablations: dict | None = None

    def expected_param_names(self) -> set[str]:
        return set(init_params(self.config, Rng(0)).keys())

    def validate(self) -> None:
        expected = self.expected_param_names()
        got = set(self.params.keys())
        unknown = sorted(got - expected)
        missing = sorted(expected - got)
        if unknown:
            raise CheckpointError(f"manifest lists unknown parameter(s): {unknown}")
        if missing:
            raise CheckpointError(f"manifest is missing parameter(s): {missing}")

    def to_tensors(self) -> dict[str, Tensor]:
        return {k: Tensor(v.copy(), requires_grad=True) for k, v in self.params.items()}


def _blob_entries(ckpt: Checkpoint) -> list[tuple[str, np.ndarray]]:
    entries = [("param/" + k, v) for k, v in sorted(ckpt.params.items())]
    entries += [("adam_m/" + k, v) for k, v in sorted(ckpt.opt_m.items())]
    entries += [("adam_v/" + k, v) for k, v in sorted(ckpt.opt_v.items())]
    return entries


def save_checkpoint(ckpt: Checkpoint, base_path) -> tuple[Path, Path]:
    """Write <base>.manifest and <base>.bin; returns both paths."""
    ckpt.validate()
    base = Path(base_path)
    manifest_path = base.with_suffix(".manifest")
    blob_path = base.with_suffix(".bin")

    entries = _blob_entries(ckpt)
    offset = 0
    listed = []
    for name, arr in entries:
        count = int(arr.size)
        listed.append({"name": name, "shape": list(arr.shape),
                       "offset": offset, "count": count})
        offset += count

    manifest = {
        "config": ckpt.config.to_dict(),
        "step": ckpt.step,
        "opt_t": ckpt.opt_t,
        "rng_state": ckpt.rng_state,
        "ablations": ckpt.ablations,
        "total_elements": offset,
        "entries": listed,
    }
    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")

    with blob_path.open("wb") as fh:
        for _, arr in entries:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return manifest_path, blob_path


def load_checkpoint(base_path) -> Checkpoint:
    base = Path(base_path)
    manifest_path = base.with_suffix(".manifest")
    blob_path = base.with_suffix(".bin")
    manifest = json.loads(manifest_path.read_text())

    expected_bytes = manifest["total_elements"] * 8
    blob = blob_path.read_bytes()
    if len(blob) != expected_bytes:
        raise CheckpointError(
            f"blob {blob_path} holds {len(blob)} bytes, manifest expects {expected_bytes} "
            f"({expected_bytes - len(blob)} missing)")

    flat = np.frombuffer(blob, dtype="<f8")
    params: dict[str, np.ndarray] = {}
    opt_m: dict[str, np.ndarray] = {}
    opt_v: dict[str, np.ndarray] = {}
    for entry in manifest["entries"]:
        arr = flat[entry["offset"]:entry["offset"] + entry["count"]]
        arr = arr.reshape(entry["shape"]).astype(np.float64)
        kind, name = entry["name"].split("/", 1)
        if kind == "param":
            params[name] = arr
        elif kind == "adam_m":
            opt_m[name] = arr
        elif kind == "adam_v":
            opt_v[name] = arr
        else:
            raise CheckpointError(f"manifest lists unknown blob section {kind!r}")

    ckpt = Checkpoint(
        config=ModelConfig.from_dict(manifest["config"]),
        params=params,
        step=manifest["step"],
        opt_m=opt_m,
        opt_v=opt_v,
        opt_t=manifest.get("opt_t", 0),
        rng_state=manifest.get("rng_state"),
        ablations=manifest.get("ablations"),
    )
    ckpt.validate()
    return ckpt
