"""Named parameter container and the binary checkpoint format.

Checkpoint layout (all integers little-endian)::

    magic        8 bytes  b"RCPEDIT\\0"
    version      u32
    config_len   u32, then config_len bytes of UTF-8 JSON (sorted keys)
    n_params     u32
    per parameter, in insertion order:
        name_len u16, name bytes
        ndim     u8, dims as u64 each
        data     prod(dims) little-endian float64
"""
from __future__ import annotations

import io
import json
import struct
from pathlib import Path
from typing import Any, Iterator

import numpy as np

from .tensor import Tensor

MAGIC = b"RCPEDIT\x00"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


class ParameterStore:
    def __init__(self, config: dict[str, Any] | None = None):
        self.config: dict[str, Any] = dict(config or {})
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def names(self) -> list[str]:
        return list(self._params)

    def n_weights(self) -> int:
        return int(sum(p.data.size for p in self._params.values()))

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        return {
            n: (p.grad if p.grad is not None else np.zeros_like(p.data))
            for n, p in self._params.items()
        }

    def snapshot(self) -> dict[str, np.ndarray]:
        return {n: p.data.copy() for n, p in self._params.items()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for n, arr in snap.items():
            self._params[n].data = arr.copy()

    # serialization

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        buf.write(MAGIC)
        buf.write(struct.pack("<I", FORMAT_VERSION))
        cfg = json.dumps(self.config, sort_keys=True, separators=(",", ":")).encode("utf-8")
        buf.write(struct.pack("<I", len(cfg)))
        buf.write(cfg)
        buf.write(struct.pack("<I", len(self._params)))
        for name, p in self._params.items():
            nb = name.encode("utf-8")
            buf.write(struct.pack("<H", len(nb)))
            buf.write(nb)
            buf.write(struct.pack("<B", p.data.ndim))
            for dim in p.data.shape:
                buf.write(struct.pack("<Q", dim))
            buf.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "ParameterStore":
        view = memoryview(raw)
        pos = 0

        def take(n: int) -> memoryview:
            nonlocal pos
            if pos + n > len(view):
                raise CheckpointError("truncated checkpoint")
            out = view[pos : pos + n]
            pos += n
            return out

        if bytes(take(len(MAGIC))) != MAGIC:
            raise CheckpointError("not a checkpoint file (bad magic)")
        (version,) = struct.unpack("<I", take(4))
        if version != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        (clen,) = struct.unpack("<I", take(4))
        store = cls(json.loads(bytes(take(clen)).decode("utf-8")))
        (count,) = struct.unpack("<I", take(4))
        for _ in range(count):
            (nlen,) = struct.unpack("<H", take(2))
            name = bytes(take(nlen)).decode("utf-8")
            (ndim,) = struct.unpack("<B", take(1))
            shape = tuple(struct.unpack("<Q", take(8))[0] for _ in range(ndim))
            size = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(bytes(take(8 * size)), dtype="<f8").reshape(shape)
            store.add(name, data.astype(np.float64))
        if pos != len(view):
            raise CheckpointError("trailing bytes after last parameter")
        return store

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "ParameterStore":
        return cls.from_bytes(Path(path).read_bytes())
