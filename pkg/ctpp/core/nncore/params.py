"""
Named parameter storage and the checkpoint archive format.
"""

import io
import json
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, Tuple, Union

import numpy as np

from ctpp.core.exceptions import StateError, UsageError
from ctpp.core.nncore.tensor import Tensor

CHECKPOINT_VERSION = "ctpp-checkpoint/1"


class ParamStore:
    """
    Ordered registry of trainable tensors.

    Every parameter has a unique name and belongs to one group (for
    example ``kernel``, ``gru``, ``aggregation``, ``decoder``) so gradient
    checks and reports can be broken down the way the model is built.
    """

    def __init__(self):
        self._params: Dict[str, Tensor] = {}
        self._groups: Dict[str, str] = {}

    def add(self, name: str, value: np.ndarray, group: str) -> Tensor:
        if name in self._params:
            raise StateError(f"parameter {name!r} registered twice")
        param = Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)
        self._params[name] = param
        self._groups[name] = group
        return param

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def __iter__(self) -> Iterator[Tensor]:
        return iter(self._params.values())

    def names(self) -> List[str]:
        return list(self._params)

    def named(self) -> List[Tuple[str, Tensor]]:
        return list(self._params.items())

    def group_of(self, name: str) -> str:
        return self._groups[name]

    def groups(self) -> Dict[str, List[str]]:
        grouped: Dict[str, List[str]] = {}
        for name, group in self._groups.items():
            grouped.setdefault(group, []).append(name)
        return grouped

    def zero_grad(self) -> None:
        for param in self._params.values():
            param.grad = None

    def num_values(self) -> int:
        return sum(p.size for p in self._params.values())

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self._params.items()}

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        missing = set(self._params) - set(state)
        unknown = set(state) - set(self._params)
        if missing or unknown:
            raise StateError(f"state mismatch: missing {sorted(missing)}, unknown {sorted(unknown)}")
        for name, param in self._params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != param.shape:
                raise StateError(f"{name}: shape {value.shape} does not match {param.shape}")
            param.data = value.copy()


def save_checkpoint(path: Union[str, Path], store: ParamStore, meta: dict) -> Path:
    """
    Write parameters and metadata to a single ``.npz`` archive.

    The archive holds one row-major float64 array per parameter name, plus
    ``__version__`` and ``__meta__`` (a JSON document) entries.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {name: np.ascontiguousarray(value) for name, value in store.state_dict().items()}
    arrays["__version__"] = np.array(CHECKPOINT_VERSION)
    arrays["__meta__"] = np.array(json.dumps(meta, sort_keys=True))
    buffer = io.BytesIO()
    np.savez(buffer, **arrays)
    path.write_bytes(buffer.getvalue())
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[Dict[str, np.ndarray], dict]:
    """Read an archive written by :func:`save_checkpoint`."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"checkpoint not found: {path}")
    with np.load(path, allow_pickle=False) as archive:
        version = str(archive["__version__"]) if "__version__" in archive.files else None
        if version != CHECKPOINT_VERSION:
            raise UsageError(f"{path}: unsupported checkpoint version {version!r}")
        meta = json.loads(str(archive["__meta__"]))
        state = {
            name: archive[name].astype(np.float64)
            for name in archive.files
            if not name.startswith("__")
        }
    return state, meta
