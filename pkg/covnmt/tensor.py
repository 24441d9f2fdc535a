"""
Dense tensors on numpy with a reverse-mode differentiation tape.

Operations run eagerly. While a Tape is active on the current thread, every
operation whose inputs require gradients is recorded together with a closure
that maps the output adjoint to input adjoints. Tape.backward replays the
records in reverse execution order and accumulates into Tensor.grad.
"""
import threading
from contextlib import contextmanager
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError, DimensionError, InvalidMaskError, NumericFailureError, VocabIndexError

PRECISIONS = {
    'standard': np.float32,
    'wide': np.float64,
}

_precision = {'name': 'standard'}
_local = threading.local()


def get_precision() -> str:
    return _precision['name']


def set_precision(name: str):
    """Select the dtype used for every tensor created from now on"""
    if name not in PRECISIONS:
        raise ConfigError(f"unknown precision '{name}', expected one of {sorted(PRECISIONS)}", field='precision')
    _precision['name'] = name


def default_dtype():
    return PRECISIONS[_precision['name']]


@contextmanager
def precision(name: str):
    previous = get_precision()
    set_precision(name)
    try:
        yield
    finally:
        set_precision(previous)


def _tape_stack() -> list:
    stack = getattr(_local, 'tapes', None)
    if stack is None:
        stack = []
        _local.tapes = stack
    return stack


def active_tape() -> Optional['Tape']:
    stack = _tape_stack()
    return stack[-1] if stack else None


@contextmanager
def no_grad():
    """Run operations without recording, even inside an active tape"""
    stack = _tape_stack()
    stack.append(None)
    try:
        yield
    finally:
        stack.pop()


class Tensor:
    """Dense real array, optionally tracked for differentiation"""

    __slots__ = ('data', 'requires_grad', 'grad', 'name')

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.asarray(data, dtype=default_dtype())
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError("item() needs a single-element tensor", self.shape)
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = None

    def accumulate(self, grad: np.ndarray):
        if grad.shape != self.data.shape:
            raise DimensionError("gradient shape differs from tensor shape", grad.shape, self.data.shape)
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype)
        else:
            self.grad += grad

    def __repr__(self):
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


class _Record:
    __slots__ = ('output', 'inputs', 'backward')

    def __init__(self, output, inputs, backward):
        self.output = output
        self.inputs = inputs
        self.backward = backward


class Tape:
    """Ordered log of executed operations on one thread"""

    def __init__(self):
        self.records: List[_Record] = []

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _tape_stack().pop()
        return False

    def __len__(self):
        return len(self.records)

    def record(self, output: Tensor, inputs: Sequence[Tensor], backward: Callable):
        self.records.append(_Record(output, tuple(inputs), backward))

    def backward(self, loss: Tensor) -> int:
        """Accumulate d(loss)/d(leaf) into every tracked leaf; returns records visited"""
        if loss.size != 1:
            raise DimensionError("backward needs a scalar loss", loss.shape)
        loss.grad = np.ones_like(loss.data)
        visited = 0
        for record in reversed(self.records):
            visited += 1
            if record.output.grad is None:
                continue
            grads = record.backward(record.output.grad)
            for tensor, grad in zip(record.inputs, grads):
                if grad is not None and tensor.requires_grad:
                    tensor.accumulate(np.asarray(grad, dtype=tensor.data.dtype))
        return visited


# ====== CONSTRUCTION ======

def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def constant(data) -> Tensor:
    return Tensor(data)


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape, dtype=default_dtype()))


def parameter(data, name: Optional[str] = None) -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def _result(data, inputs: Sequence[Tensor], backward: Callable) -> Tensor:
    requires = any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=requires)
    if requires:
        tape = active_tape()
        if tape is not None:
            tape.record(out, inputs, backward)
    return out


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(op: str, a: Tensor, b: Tensor):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op} operands do not share a shape", a.shape, b.shape) from None


# ====== ARITHMETIC ======

def matmul(a, b) -> Tensor:
    """Matrix product; a may be a vector (treated as a single row)"""
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim != 2 or a.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise DimensionError("matmul inner dimensions differ", a.shape, b.shape)
    a_data, b_data = a.data, b.data

    def backward(g):
        grad_a = g @ b_data.T
        grad_b = np.outer(a_data, g) if a_data.ndim == 1 else a_data.T @ g
        return grad_a, grad_b

    return _result(a_data @ b_data, (a, b), backward)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast('add', a, b)
    a_shape, b_shape = a.shape, b.shape
    return _result(a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a_shape), _unbroadcast(g, b_shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast('sub', a, b)
    a_shape, b_shape = a.shape, b.shape
    return _result(a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, a_shape), _unbroadcast(-g, b_shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast('mul', a, b)
    a_data, b_data = a.data, b.data
    return _result(a_data * b_data, (a, b),
                   lambda g: (_unbroadcast(g * b_data, a_data.shape), _unbroadcast(g * a_data, b_data.shape)))


def scale(a, factor: float) -> Tensor:
    a = as_tensor(a)
    return _result(a.data * factor, (a,), lambda g: (g * factor,))


def one_minus(a) -> Tensor:
    a = as_tensor(a)
    return _result(1.0 - a.data, (a,), lambda g: (-g,))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    # tanh form stays finite for large |x|
    y = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _result(y, (a,), lambda g: (g * y * (1.0 - y),))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.data)
    return _result(y, (a,), lambda g: (g * (1.0 - y * y),))


def absolute(a) -> Tensor:
    a = as_tensor(a)
    sign = np.sign(a.data)
    return _result(np.abs(a.data), (a,), lambda g: (g * sign,))


def log(a, floor: Optional[float] = None) -> Tensor:
    """Natural log with inputs clipped from below at floor"""
    a = as_tensor(a)
    if floor is None:
        floor = np.finfo(a.data.dtype).tiny
    clipped = np.maximum(a.data, floor)
    return _result(np.log(clipped), (a,), lambda g: (g / clipped,))


def sum_all(a) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    return _result(a.data.sum(), (a,), lambda g: (np.broadcast_to(g, shape),))


POINTWISE = {
    'add': add,
    'sub': sub,
    'mul': mul,
    'sigmoid': sigmoid,
    'tanh': tanh,
    'scale': scale,
}


def pointwise(kind: str, *args) -> Tensor:
    """Dispatch an elementwise operation by name"""
    try:
        op = POINTWISE[kind]
    except KeyError:
        raise ConfigError(f"unknown pointwise operation '{kind}'") from None
    return op(*args)


# ====== STRUCTURE ======

def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    original = a.shape
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise DimensionError("cannot reshape", original, tuple(shape)) from None
    return _result(data, (a,), lambda g: (g.reshape(original),))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise DimensionError("concat operands disagree", *[t.shape for t in tensors]) from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return np.split(g, bounds, axis=axis)

    return _result(data, tensors, backward)


def stack(tensors: Sequence[Tensor]) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    shapes = {t.shape for t in tensors}
    if len(shapes) != 1:
        raise DimensionError("stack operands differ in shape", *[t.shape for t in tensors])
    data = np.stack([t.data for t in tensors])
    return _result(data, tensors, lambda g: [g[i] for i in range(len(tensors))])


def take(a, key) -> Tensor:
    """Index a tensor with any numpy key; the adjoint scatters back"""
    a = as_tensor(a)
    data = np.array(a.data[key])
    shape, dtype = a.shape, a.data.dtype

    def backward(g):
        full = np.zeros(shape, dtype=dtype)
        np.add.at(full, key, g)
        return (full,)

    return _result(data, (a,), backward)


def gather_rows(table, ids) -> Tensor:
    """Row gather; backward scatters into the gathered rows only"""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    rows = table.shape[0]
    for token_id in ids:
        if token_id < 0 or token_id >= rows:
            raise VocabIndexError(int(token_id), rows)
    return take(table, ids)


def put_rows(base, index, values) -> Tensor:
    """Copy of base with the rows at index replaced by values"""
    base, values = as_tensor(base), as_tensor(values)
    index = np.asarray(index, dtype=np.int64)
    if values.shape != (len(index),) + base.shape[1:]:
        raise DimensionError("put_rows values do not match the selected rows", values.shape, base.shape)
    data = base.data.copy()
    data[index] = values.data

    def backward(g):
        grad_base = g.copy()
        grad_base[index] = 0
        return grad_base, g[index]

    return _result(data, (base, values), backward)


def masked_softmax(logits, mask=None) -> Tensor:
    """Softmax over a vector; masked (False) positions come out exactly zero"""
    logits = as_tensor(logits)
    if logits.ndim != 1:
        raise DimensionError("masked_softmax expects a vector", logits.shape)
    if mask is None:
        mask = np.ones(logits.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != logits.shape:
        raise DimensionError("mask does not match logits", mask.shape, logits.shape)
    if not mask.any():
        raise InvalidMaskError("softmax over fully masked logits", logits.shape)
    x = logits.data
    shifted = np.where(mask, x - x[mask].max(), 0.0)
    e = np.where(mask, np.exp(shifted), 0.0)
    p = e / e.sum()

    def backward(g):
        return (p * (g - (g * p).sum()),)

    return _result(p, (logits,), backward)


# ====== GRADIENT CHECK ======

def _named(params) -> List[Tuple[str, Tensor]]:
    if isinstance(params, dict):
        return list(params.items())
    if hasattr(params, 'items'):
        return list(params.items())
    return [(t.name or f"param{i}", t) for i, t in enumerate(params)]


def _evaluate(f: Callable[[], Tensor]) -> float:
    with no_grad():
        return float(np.sum(f().data))


def grad_check(f: Callable[[], Tensor], params: Union[Dict[str, Tensor], Iterable[Tensor]], step: float = 1e-4) -> float:
    """
    Compare tape gradients against central differences

    Args:
        f: builds a scalar tensor from the current parameter values
        params: tensors (or name -> tensor mapping) to perturb
        step: finite-difference step

    Returns:
        float: max over all entries of |analytic - numeric| / max(1, |analytic|, |numeric|)
    """
    if step <= 0:
        raise ConfigError("finite-difference step must be positive", field='step')
    named = _named(params)
    for _, tensor in named:
        tensor.zero_grad()

    with Tape() as tape:
        out = f()
    if not np.all(np.isfinite(out.data)):
        raise NumericFailureError("objective is not finite", "objective")
    tape.backward(out)

    worst = 0.0
    for name, tensor in named:
        analytic = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        if not np.all(np.isfinite(analytic)):
            raise NumericFailureError("analytic gradient is not finite", name)
        for idx in np.ndindex(tensor.shape):
            original = tensor.data[idx]
            tensor.data[idx] = original + step
            plus = _evaluate(f)
            tensor.data[idx] = original - step
            minus = _evaluate(f)
            tensor.data[idx] = original
            if not (np.isfinite(plus) and np.isfinite(minus)):
                raise NumericFailureError("objective is not finite under perturbation", f"{name}{list(idx)}")
            numeric = (plus - minus) / (2 * step)
            exact = float(analytic[idx])
            error = abs(exact - numeric) / max(1.0, abs(exact), abs(numeric))
            worst = max(worst, error)
    return worst
