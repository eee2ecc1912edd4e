"""Named parameter arrays with gradient buffers and checkpoint files."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from backend.app.core.errors import CheckpointError

CHECKPOINT_VERSION = "routing-lab-params/1"


class ParamSet:
    """Ordered mapping name -> array, each with a same-shaped gradient buffer."""

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self.values: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self.values:
            raise KeyError(f"parameter {name!r} already defined")
        self.values[name] = np.array(value, dtype=self.dtype)
        self.grads[name] = np.zeros_like(self.values[name])
        return self.values[name]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def __iter__(self) -> Iterator[str]:
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def accumulate(self, name: str, grad: np.ndarray) -> None:
        self.grads[name] += grad

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0)

    def grad_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in self.grads.values())))

    def grads_finite(self) -> bool:
        return all(np.isfinite(g).all() for g in self.grads.values())

    def copy(self) -> "ParamSet":
        return self.astype(self.dtype)

    def astype(self, dtype) -> "ParamSet":
        out = ParamSet(dtype)
        for name, value in self.values.items():
            out.add(name, value)
        return out

    def assign(self, other: "ParamSet") -> None:
        """Copy values from `other` in place (names and shapes must match)."""
        for name, value in self.values.items():
            value[...] = other.values[name]

    def state(self) -> dict[str, np.ndarray]:
        return {name: value.copy() for name, value in self.values.items()}

    def load_state(self, state: Mapping[str, np.ndarray]) -> None:
        missing = set(self.values) - set(state)
        if missing:
            raise CheckpointError(f"checkpoint lacks parameters: {sorted(missing)}")
        for name, value in self.values.items():
            if state[name].shape != value.shape:
                raise CheckpointError(f"{name}: shape {state[name].shape} != {value.shape}")
            value[...] = state[name]


def clip_grad_norm(param_sets: list[ParamSet], max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most `max_norm`."""
    total = float(np.sqrt(sum(p.grad_norm() ** 2 for p in param_sets)))
    if total > max_norm > 0:
        scale = max_norm / (total + 1e-12)
        for p in param_sets:
            for g in p.grads.values():
                g *= scale
    return total


def save_checkpoint(path: str | Path, groups: Mapping[str, ParamSet], meta: dict | None = None) -> None:
    """Write parameter groups to one `.npz` container with shape metadata."""
    arrays = {}
    shapes = {}
    for group, params in groups.items():
        for name, value in params.values.items():
            key = f"{group}/{name}"
            arrays[key] = value
            shapes[key] = list(value.shape)
    header = {"version": CHECKPOINT_VERSION, "shapes": shapes, "meta": meta or {}}
    arrays["__header__"] = np.frombuffer(json.dumps(header).encode("utf-8"), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path: str | Path) -> tuple[dict[str, dict[str, np.ndarray]], dict]:
    """Read a checkpoint; returns `({group: {name: array}}, meta)`."""
    try:
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(bytes(data["__header__"]).decode("utf-8"))
            arrays = {k: data[k] for k in data.files if k != "__header__"}
    except (OSError, KeyError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header.get('version')!r}")
    groups: dict[str, dict[str, np.ndarray]] = {}
    for key, value in arrays.items():
        if list(value.shape) != header["shapes"].get(key):
            raise CheckpointError(f"{key}: shape does not match header")
        group, name = key.split("/", 1)
        groups.setdefault(group, {})[name] = value
    return groups, header.get("meta", {})
