"""Tensor value type and the gradient tape."""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from ..errors import InvalidArgumentError, InvalidShapeError

_FLOAT_TYPES = (np.float32, np.float64)
_ids = itertools.count()
_local = threading.local()


class Tensor:
    """Immutable dense float array with a process-unique id.

    Storage is a read-only, C-contiguous numpy array. float32 is the
    production precision; float64 is used by oracles and gradient checks.
    Rank 0 is allowed for scalar results.
    """

    __slots__ = ("data", "id", "__weakref__")
    __array_priority__ = 1000

    def __init__(self, data: Any, dtype: Any = None):
        if dtype is None:
            dtype = data.dtype if isinstance(data, np.ndarray) and data.dtype in _FLOAT_TYPES else np.float32
        if np.dtype(dtype) not in _FLOAT_TYPES:
            raise InvalidArgumentError(f"unsupported dtype {dtype}")
        arr = np.array(data, dtype=dtype, order="C", copy=True)
        self._init(arr)

    def _init(self, arr: np.ndarray) -> None:
        if any(n < 1 for n in arr.shape):
            raise InvalidShapeError(f"all dimensions must be >= 1, got {arr.shape}")
        arr.flags.writeable = False
        self.data = arr
        self.id = next(_ids)

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Tensor":
        t = cls.__new__(cls)
        t._init(np.ascontiguousarray(arr))
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _raise_not_scalar(self.shape)

    def astype(self, dtype: Any) -> "Tensor":
        return Tensor(self.data, dtype=dtype)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name})"

    def __len__(self) -> int:
        return self.shape[0]

    # operator sugar; the ops module owns the gradient rules
    def __add__(self, other):
        from . import ops
        return ops.add(self, ops.as_tensor(other, self.dtype))

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, ops.as_tensor(other, self.dtype))

    def __rsub__(self, other):
        from . import ops
        return ops.sub(ops.as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        from . import ops
        if np.isscalar(other):
            return ops.scale(self, float(other))
        return ops.mul(self, ops.as_tensor(other, self.dtype))

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)


def _raise_not_scalar(shape):
    raise InvalidShapeError(f"item() needs a single-element tensor, got shape {shape}")


@dataclass
class Node:
    """One recorded primitive application."""

    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    saved: Any
    forward: Callable[..., tuple[np.ndarray, Any]]
    backward: Callable[..., Sequence[np.ndarray | None]]
    params: dict = field(default_factory=dict)

    @property
    def input_ids(self) -> tuple[int, ...]:
        return tuple(t.id for t in self.inputs)

    @property
    def output_id(self) -> int:
        return self.output.id


class Tape:
    """Ordered record of primitive ops, used as a context manager.

    >>> with Tape() as tape:
    ...     y = ops.sum(x * x)
    >>> grads = tape.gradient(y, [x])

    A tape is single-writer; nested tapes are allowed and only the innermost
    records.
    """

    def __init__(self):
        self.nodes: list[Node] = []
        self._watched: dict[int, Tensor] = {}
        self._producer: dict[int, int] = {}

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _stack()
        if not stack or stack[-1] is not self:
            raise RuntimeError("tape stack corrupted")
        stack.pop()

    def watch(self, *tensors: Tensor) -> None:
        for t in tensors:
            self._watched[t.id] = t

    def record(self, node: Node) -> None:
        self._producer[node.output_id] = len(self.nodes)
        self.nodes.append(node)

    def leaves(self) -> dict[int, Tensor]:
        """Watched tensors plus every node input not produced on this tape."""
        found = dict(self._watched)
        for node in self.nodes:
            for t in node.inputs:
                if t.id not in self._producer:
                    found.setdefault(t.id, t)
        return found

    def backward(self, output_id: int, seed_grad: Any = None) -> dict[int, np.ndarray]:
        """Reverse sweep from ``output_id``; returns gradients for all leaves.

        Leaves the output does not depend on get zero gradients.
        """
        if output_id in self._producer:
            out = self.nodes[self._producer[output_id]].output
        elif output_id in self._watched:
            out = self._watched[output_id]
        else:
            raise InvalidArgumentError(f"tensor id {output_id} is not recorded on this tape")
        seed = np.ones(out.shape, dtype=out.dtype) if seed_grad is None else np.asarray(
            seed_grad.data if isinstance(seed_grad, Tensor) else seed_grad, dtype=out.dtype)
        if seed.shape != out.shape:
            raise InvalidShapeError(f"seed shape {seed.shape} != output shape {out.shape}")

        grads: dict[int, np.ndarray] = {output_id: seed.copy()}
        stop = self._producer.get(output_id, -1)
        for node in reversed(self.nodes[: stop + 1]):
            g = grads.pop(node.output_id, None) if node.output_id not in self._watched else grads.get(node.output_id)
            if g is None:
                continue
            arrays = [t.data for t in node.inputs]
            in_grads = node.backward(g, node.saved, *arrays, **node.params)
            for t, gi in zip(node.inputs, in_grads):
                if gi is None:
                    continue
                if t.id in grads:
                    grads[t.id] = grads[t.id] + gi
                else:
                    grads[t.id] = np.asarray(gi, dtype=t.dtype)

        result = {}
        for leaf_id, leaf in self.leaves().items():
            g = grads.get(leaf_id)
            result[leaf_id] = np.zeros(leaf.shape, dtype=leaf.dtype) if g is None else g.astype(leaf.dtype, copy=False)
        return result

    def gradient(self, output: Tensor, sources: Sequence[Tensor], seed_grad: Any = None) -> list[np.ndarray]:
        grads = self.backward(output.id, seed_grad)
        return [grads.get(s.id, np.zeros(s.shape, dtype=s.dtype)) for s in sources]

    def replay(self, overrides: dict[int, np.ndarray] | None = None) -> dict[int, np.ndarray]:
        """Recompute every recorded output from leaf values.

        ``overrides`` substitutes leaf values by id; without it the replay
        reproduces the recorded outputs bit-exactly.
        """
        env = {i: t.data for i, t in self.leaves().items()}
        if overrides:
            env.update(overrides)
        for node in self.nodes:
            out, _ = node.forward(*[env[t.id] for t in node.inputs], **node.params)
            env[node.output_id] = out
        return env


def _stack() -> list[Tape]:
    stack = getattr(_local, "tapes", None)
    if stack is None:
        stack = _local.tapes = []
    return stack


def current_tape() -> Tape | None:
    stack = _stack()
    return stack[-1] if stack else None


def backward(tape: Tape, output_id: int, seed_grad: Any = None) -> dict[int, np.ndarray]:
    """Functional alias of :meth:`Tape.backward`."""
    return tape.backward(output_id, seed_grad)


def apply(op: str, forward, backward_fn, *inputs: Tensor, **params) -> Tensor:
    """Run a primitive and record it on the active tape, if any."""
    out, saved = forward(*[t.data for t in inputs], **params)
    result = Tensor._wrap(out)
    tape = current_tape()
    if tape is not None:
        tape.record(Node(op, tuple(inputs), result, saved, forward, backward_fn, params))
    return result
