"""Dense float32 tensors, the Adam update rule, and an IEEE 754 binary16 codec.

Tensors are immutable once constructed; float32 is the canonical in-memory
precision, binary16 exists only at the wire boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Largest finite binary16 value; anything beyond it must not be encoded.
F16_MAX = 65504.0


class Tensor:
    """Immutable dense tensor of finite float32 values, row-major."""

    __slots__ = ("_array",)

    def __init__(self, values, shape: tuple[int, ...] | None = None):
        a = np.asarray(values, dtype=np.float32)
        if shape is not None:
            a = a.reshape(shape)
        if not np.all(np.isfinite(a)):
            raise ValueError("tensor values must be finite (no NaN/Inf)")
        a = np.ascontiguousarray(a)
        a.flags.writeable = False
        self._array = a

    @classmethod
    def zeros(cls, shape: tuple[int, ...]) -> "Tensor":
        return cls(np.zeros(shape, dtype=np.float32))

    @property
    def array(self) -> np.ndarray:
        """Read-only ndarray view (writeable flag is off)."""
        return self._array

    @property
    def shape(self) -> tuple[int, ...]:
        return self._array.shape

    @property
    def size(self) -> int:
        return int(self._array.size)

    @property
    def data(self) -> np.ndarray:
        """Flat row-major view of the values."""
        return self._array.reshape(-1)

    def tobytes(self) -> bytes:
        """Row-major little-endian float32 bytes."""
        return self._array.astype("<f4").tobytes()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tensor):
            return NotImplemented
        return self.shape == other.shape and bool(
            np.array_equal(self._array, other._array)
        )

    def __hash__(self):
        return hash((self.shape, self._array.tobytes()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


def l2_sq_distance(a: Tensor, b: Tensor) -> float:
    """Sum of squared elementwise differences between two equal-shape tensors."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = a.data.astype(np.float64) - b.data.astype(np.float64)
    return float(np.dot(d, d))


@dataclass
class AdamState:
    """Per-parameter Adam optimizer state (first/second moments plus step count)."""

    m: Tensor
    v: Tensor
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_param(cls, param: Tensor, lr: float = 1e-3, beta1: float = 0.9,
                  beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        """Fresh zero-moment state matching a parameter tensor's shape."""
        return cls(m=Tensor.zeros(param.shape), v=Tensor.zeros(param.shape),
                   step=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(param: Tensor, grad: Tensor, state: AdamState) -> Tensor:
    """One bias-corrected Adam update; returns new params, mutates ``state``.

    The update follows the standard rule: moment estimates are decayed
    averages of the gradient and its square, corrected by 1/(1-beta^t),
    and the parameter moves by lr * m_hat / (sqrt(v_hat) + eps).
    """
    if param.shape != grad.shape or param.shape != state.m.shape:
        raise ValueError("param, grad and state moments must share one shape")
    g = grad.array
    if not np.all(np.isfinite(g)):
        raise ValueError("non-finite gradient")

    t = state.step + 1
    m = state.beta1 * state.m.array + (1.0 - state.beta1) * g
    v = state.beta2 * state.v.array + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new = param.array - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)

    state.m = Tensor(m)
    state.v = Tensor(v)
    state.step = t
    return Tensor(new)


def f16_encode(t: Tensor) -> bytes:
    """Encode to IEEE 754 binary16, little-endian, 2 bytes per element.

    Raises OverflowError instead of saturating when a value cannot be
    represented in the binary16 range.
    """
    a = t.array
    if np.any(np.abs(a) > F16_MAX):
        raise OverflowError("value exceeds binary16 range (|x| > 65504)")
    return a.astype("<f2").tobytes()


def f16_decode(data: bytes, shape: tuple[int, ...]) -> Tensor:
    """Decode little-endian binary16 bytes back to a float32 tensor."""
    n = 1
    for d in shape:
        n *= int(d)
    if len(data) != 2 * n:
        raise ValueError(f"byte length {len(data)} != 2 * product(shape) = {2 * n}")
    a = np.frombuffer(data, dtype="<f2").astype(np.float32).reshape(shape)
    return Tensor(a)
