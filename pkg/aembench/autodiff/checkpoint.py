"""IBCHK v1 text checkpoints.

Layout::

    IBCHK v1
    tensor <name> <rank> <dim...>
    <values, whitespace separated, 17 significant digits>
    ...
    end

Seventeen significant digits round-trip every float64 exactly; integer
tensors (flow permutations) print without a fractional part.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, Mapping, Union

import numpy as np

from aembench.errors import CheckpointError, MissingArtifactError

MAGIC = "IBCHK v1"
# Values per line; purely cosmetic.
_WRAP = 8


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dumps(tensors: Mapping[str, np.ndarray]) -> str:
    lines = [MAGIC]
    for name, arr in tensors.items():
        if any(ch.isspace() for ch in name) or not name:
            raise CheckpointError(f"invalid tensor name {name!r}")
        arr = np.asarray(arr, dtype=np.float64)
        dims = " ".join(str(d) for d in arr.shape)
        lines.append(f"tensor {name} {arr.ndim} {dims}".rstrip())
        flat = arr.reshape(-1)
        for i in range(0, flat.size, _WRAP):
            lines.append(" ".join(_fmt(v) for v in flat[i : i + _WRAP]))
    lines.append("end")
    return "\n".join(lines) + "\n"


def loads(text: str) -> Dict[str, np.ndarray]:
    tokens_by_line = [ln.split() for ln in text.splitlines()]
    if not tokens_by_line or " ".join(tokens_by_line[0]) != MAGIC:
        raise CheckpointError("unknown checkpoint magic (expected 'IBCHK v1')")

    out: Dict[str, np.ndarray] = {}
    i = 1
    n = len(tokens_by_line)
    while i < n:
        toks = tokens_by_line[i]
        if not toks:
            i += 1
            continue
        if toks == ["end"]:
            return out
        if toks[0] != "tensor" or len(toks) < 3:
            raise CheckpointError(f"line {i + 1}: expected 'tensor' header, got {' '.join(toks)!r}")
        name = toks[1]
        try:
            rank = int(toks[2])
            shape = tuple(int(d) for d in toks[3:])
        except ValueError:
            raise CheckpointError(f"line {i + 1}: malformed header") from None
        if len(shape) != rank or any(d < 0 for d in shape):
            raise CheckpointError(f"tensor {name}: rank {rank} does not match dims {shape}")
        count = int(np.prod(shape)) if shape else 1
        values: list = []
        i += 1
        while len(values) < count and i < n:
            row = tokens_by_line[i]
            if row and row[0] in ("tensor", "end"):
                break
            values.extend(row)
            i += 1
        if len(values) != count:
            raise CheckpointError(f"tensor {name}: expected {count} values, found {len(values)}")
        try:
            arr = np.array([float(v) for v in values], dtype=np.float64)
        except ValueError:
            raise CheckpointError(f"tensor {name}: non-numeric value") from None
        out[name] = arr.reshape(shape)
    raise CheckpointError("missing 'end' line")


def save(path: Union[str, Path], tensors: Mapping[str, np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(tensors))
    return path


def load(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"checkpoint not found: {path}")
    return loads(path.read_text())
