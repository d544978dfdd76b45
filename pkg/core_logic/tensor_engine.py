#Lõi tensor: mảng float64, vi phân ngược, FFT thực và bộ sinh số ngẫu nhiên

import contextlib
import math
import zlib
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import erf, expit

from core_logic.errors import ShapeError, TensorError

_GRAD_STATE = {"enabled": True}
_MAC_COUNTERS: List["MacCounter"] = []

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def is_grad_enabled() -> bool:
    return _GRAD_STATE["enabled"]


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Tắt việc ghi đồ thị tính toán (dùng khi suy luận)"""
    previous = _GRAD_STATE["enabled"]
    _GRAD_STATE["enabled"] = False
    try:
        yield
    finally:
        _GRAD_STATE["enabled"] = previous


class MacCounter:
    """Đếm số phép nhân-cộng của các phép co: matmul, tích chập, FFT"""

    def __init__(self):
        self.total = 0
        self.by_op: Dict[str, int] = {}

    def add(self, op: str, macs: int) -> None:
        self.total += int(macs)
        self.by_op[op] = self.by_op.get(op, 0) + int(macs)


@contextlib.contextmanager
def count_macs() -> Iterator[MacCounter]:
    """Bật bộ đếm nhân-cộng cho các phép toán chạy bên trong khối with"""
    counter = MacCounter()
    _MAC_COUNTERS.append(counter)
    try:
        yield counter
    finally:
        _MAC_COUNTERS.remove(counter)


def _record_macs(op: str, macs: int) -> None:
    for counter in _MAC_COUNTERS:
        counter.add(op, macs)


def fft_cost(n: int, transforms: int = 1) -> int:
    """Chi phí quy ước của `transforms` phép FFT thực độ dài n"""
    return int(transforms * n * max(1.0, math.log2(n)))


class Tensor:
    """
    Mảng số thực nhiều chiều (float64), đồng thời là một nút của đồ thị vi phân.

    Tensor tạo từ dữ liệu bên ngoài được kiểm tra: mọi chiều phải dương và
    mọi giá trị phải hữu hạn.
    """

    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        array = np.array(data, dtype=np.float64)
        if any(dim <= 0 for dim in array.shape):
            raise ShapeError(f"Kích thước tensor không hợp lệ: {array.shape}")
        if not np.all(np.isfinite(array)):
            label = f" ({name})" if name else ""
            raise TensorError(f"Dữ liệu đầu vào chứa NaN/Inf{label}")
        self.data = array
        self.requires_grad = bool(requires_grad)
        self.name = name
        self.grad: Optional[np.ndarray] = None
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None
        self._op = "leaf"

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() cần tensor 1 phần tử, nhận {self.shape}")
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        grad = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self._op}{grad})"

    # Toán tử
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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent: float):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)


def _make(data, parents: Sequence[Tensor], backward: Optional[BackwardFn], op: str) -> Tensor:
    """Tạo tensor kết quả của một phép toán nguyên thủy"""
    out = Tensor.__new__(Tensor)
    out.data = np.asarray(data, dtype=np.float64)
    track = _GRAD_STATE["enabled"] and any(parent.requires_grad for parent in parents)
    out.requires_grad = track
    out.name = ""
    out.grad = None
    out._parents = tuple(parents) if track else ()
    out._backward = backward if track else None
    out._op = op
    return out


def custom_op(data, parents: Sequence[Tensor], backward: BackwardFn, op: str = "custom") -> Tensor:
    """Tạo nút đồ thị cho một phép toán tự định nghĩa đạo hàm"""
    return _make(data, parents, backward, op)


def constant(value) -> Tensor:
    """Tensor hằng (không kiểm tra hữu hạn, không tham gia vi phân)"""
    return _make(np.array(value, dtype=np.float64), (), None, "const")


def as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return constant(value)


class GradTape:
    """Bản ghi có thứ tự các phép toán nguyên thủy dẫn tới một loss vô hướng"""

    def __init__(self, loss: Tensor):
        if loss.data.size != 1:
            raise TensorError(f"Loss phải là vô hướng, nhận kích thước {loss.shape}")
        if not loss.requires_grad:
            raise TensorError("Loss không nối với tham số nào (đồ thị bị tách)")
        self.loss = loss
        self.records = self._record(loss)

    @staticmethod
    def _record(root: Tensor) -> List[Tensor]:
        # Thứ tự topo: cha đứng trước con
        order: List[Tensor] = []
        visited = set()
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def replay(self) -> Dict[int, np.ndarray]:
        """Chạy ngược bản ghi, trả về gradient theo id của các lá"""
        grads: Dict[int, np.ndarray] = {id(self.loss): np.ones_like(self.loss.data)}
        for node in reversed(self.records):
            grad = grads.get(id(node))
            if grad is None or node._backward is None:
                continue
            parent_grads = node._backward(grad)
            for parent, parent_grad in zip(node._parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + parent_grad
                else:
                    grads[key] = np.asarray(parent_grad, dtype=np.float64)
            del grads[id(node)]
        return grads


def backward(loss: Tensor, parameters: Optional[Iterable[Tensor]] = None) -> Dict[Tensor, np.ndarray]:
    """
    Tính gradient dL/dp cho mọi tham số.

    Args:
        loss: Tensor vô hướng
        parameters: Danh sách tham số; mặc định là mọi lá có requires_grad trên bản ghi

    Returns:
        Dict: tham số -> gradient (tham số không dùng tới có gradient 0)
    """
    tape = GradTape(loss)
    grads = tape.replay()
    if parameters is None:
        parameters = [node for node in tape.records if not node._parents and node.requires_grad]
    result: Dict[Tensor, np.ndarray] = {}
    for param in parameters:
        grad = grads.get(id(param))
        if grad is None:
            grad = np.zeros_like(param.data)
        param.grad = grad
        result[param] = grad
    return result


# ---------------------------------------------------------------------------
# Phép toán nguyên thủy
# ---------------------------------------------------------------------------

def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: kích thước không khớp {a.shape} và {b.shape}") from None


def _normalize_axes(axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(ax % ndim for ax in axis))


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")

    def _backward(grad):
        return _unbroadcast(grad, a.shape), _unbroadcast(grad, b.shape)

    return _make(a.data + b.data, (a, b), _backward, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")

    def _backward(grad):
        return _unbroadcast(grad, a.shape), _unbroadcast(-grad, b.shape)

    return _make(a.data - b.data, (a, b), _backward, "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")

    def _backward(grad):
        return _unbroadcast(grad * b.data, a.shape), _unbroadcast(grad * a.data, b.shape)

    return _make(a.data * b.data, (a, b), _backward, "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "div")

    def _backward(grad):
        return (_unbroadcast(grad / b.data, a.shape),
                _unbroadcast(-grad * a.data / (b.data * b.data), b.shape))

    return _make(a.data / b.data, (a, b), _backward, "div")


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make(-a.data, (a,), lambda grad: (-grad,), "neg")


def power(a, exponent: float) -> Tensor:
    a = as_tensor(a)

    def _backward(grad):
        return (grad * exponent * np.power(a.data, exponent - 1),)

    return _make(np.power(a.data, exponent), (a,), _backward, "pow")


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: kích thước không khớp {a.shape} @ {b.shape}")
    try:
        batch = np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ShapeError(f"matmul: chiều batch không khớp {a.shape} @ {b.shape}") from None
    m, k, n = a.shape[-2], a.shape[-1], b.shape[-1]
    _record_macs("matmul", int(np.prod(batch, dtype=np.int64)) * m * k * n)

    def _backward(grad):
        grad_a = np.matmul(grad, np.swapaxes(b.data, -1, -2))
        grad_b = np.matmul(np.swapaxes(a.data, -1, -2), grad)
        return _unbroadcast(grad_a, a.shape), _unbroadcast(grad_b, b.shape)

    return _make(np.matmul(a.data, b.data), (a, b), _backward, "matmul")


def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)

    def _backward(grad):
        if not keepdims:
            grad = np.expand_dims(grad, axes)
        return (np.broadcast_to(grad, a.shape).copy(),)

    return _make(a.data.sum(axis=axes, keepdims=keepdims), (a,), _backward, "sum")


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes], dtype=np.int64))
    return sum_(a, axis=axes, keepdims=keepdims) * (1.0 / count)


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: không thể đổi {a.shape} thành {tuple(shape)}") from None
    return _make(out, (a,), lambda grad: (grad.reshape(a.shape),), "reshape")


def transpose(a, axes: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return _make(np.transpose(a.data, axes), (a,), lambda grad: (np.transpose(grad, inverse),), "transpose")


def getitem(a, index) -> Tensor:
    a = as_tensor(a)

    def _backward(grad):
        full = np.zeros_like(a.data)
        np.add.at(full, index, grad)
        return (full,)

    return _make(np.array(a.data[index]), (a,), _backward, "getitem")


def pad_axis(a, axis: int, before: int, after: int) -> Tensor:
    """Thêm số 0 vào hai đầu của một trục"""
    a = as_tensor(a)
    axis = axis % a.ndim
    widths = [(0, 0)] * a.ndim
    widths[axis] = (before, after)
    length = a.shape[axis]

    def _backward(grad):
        index = [slice(None)] * a.ndim
        index[axis] = slice(before, before + length)
        return (grad[tuple(index)],)

    return _make(np.pad(a.data, widths), (a,), _backward, "pad")


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    axis = axis % tensors[0].ndim
    sizes = [t.shape[axis] for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError("concat: kích thước không khớp") from None

    def _backward(grad):
        splits = np.cumsum(sizes)[:-1]
        return tuple(np.split(grad, splits, axis=axis))

    return _make(out, tensors, _backward, "concat")


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _make(out, (a,), lambda grad: (grad * out,), "exp")


def log(a) -> Tensor:
    a = as_tensor(a)
    return _make(np.log(a.data), (a,), lambda grad: (grad / a.data,), "log")


def log1p(a) -> Tensor:
    a = as_tensor(a)
    return _make(np.log1p(a.data), (a,), lambda grad: (grad / (1.0 + a.data),), "log1p")


def safe_sqrt(a) -> Tensor:
    """Căn bậc hai với đạo hàm bằng 0 tại 0"""
    a = as_tensor(a)
    out = np.sqrt(np.maximum(a.data, 0.0))

    def _backward(grad):
        safe = np.where(out > 0, out, 1.0)
        return (np.where(out > 0, grad / (2.0 * safe), 0.0),)

    return _make(out, (a,), _backward, "sqrt")


def xlogx(a) -> Tensor:
    """p·ln p với quy ước 0·ln 0 = 0"""
    a = as_tensor(a)
    positive = a.data > 0
    safe = np.where(positive, a.data, 1.0)
    out = np.where(positive, a.data * np.log(safe), 0.0)

    def _backward(grad):
        return (np.where(positive, grad * (np.log(safe) + 1.0), 0.0),)

    return _make(out, (a,), _backward, "xlogx")


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = expit(a.data)
    return _make(out, (a,), lambda grad: (grad * out * (1.0 - out),), "sigmoid")


def softplus(a) -> Tensor:
    a = as_tensor(a)
    return _make(np.logaddexp(0.0, a.data), (a,), lambda grad: (grad * expit(a.data),), "softplus")


def softplus_inverse(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    return y + np.log(-np.expm1(-y))


def gelu_derivative(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(x / math.sqrt(2.0))) + x * np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def gelu(a) -> Tensor:
    """GELU chính xác: 0.5·x·(1 + erf(x/√2))"""
    a = as_tensor(a)
    out = 0.5 * a.data * (1.0 + erf(a.data / math.sqrt(2.0)))
    return _make(out, (a,), lambda grad: (grad * gelu_derivative(a.data),), "gelu")


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def _backward(grad):
        return (out * (grad - (grad * out).sum(axis=axis, keepdims=True)),)

    return _make(out, (a,), _backward, "softmax")


def log_softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def _backward(grad):
        return (grad - np.exp(out) * grad.sum(axis=axis, keepdims=True),)

    return _make(out, (a,), _backward, "log_softmax")


LAYER_NORM_EPS = 1e-5


def layer_norm(x, gamma, beta, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Chuẩn hóa theo trục cuối với hệ số co giãn/dịch học được"""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if gamma.shape != (x.shape[-1],) or beta.shape != (x.shape[-1],):
        raise ShapeError(f"layer_norm: tham số {gamma.shape}/{beta.shape} không khớp {x.shape}")
    centered = x.data - x.data.mean(axis=-1, keepdims=True)
    variance = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(variance + eps)
    normalized = centered * inv_std

    def _backward(grad):
        grad_gamma = _unbroadcast(grad * normalized, gamma.shape)
        grad_beta = _unbroadcast(grad, beta.shape)
        grad_norm = grad * gamma.data
        grad_x = inv_std * (grad_norm
                            - grad_norm.mean(axis=-1, keepdims=True)
                            - normalized * (grad_norm * normalized).mean(axis=-1, keepdims=True))
        return grad_x, grad_gamma, grad_beta

    return _make(normalized * gamma.data + beta.data, (x, gamma, beta), _backward, "layer_norm")


def dropout(a, rate: float, rng: Optional[np.random.Generator]) -> Tensor:
    a = as_tensor(a)
    if rate <= 0.0 or rng is None:
        return a
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return mul(a, constant(keep))


def complex_abs(re, im) -> Tensor:
    """Biên độ |re + i·im| với đạo hàm bằng 0 tại gốc"""
    re, im = as_tensor(re), as_tensor(im)
    if re.shape != im.shape:
        raise ShapeError("complex_abs: phần thực và ảo khác kích thước")
    radius = np.hypot(re.data, im.data)

    def _backward(grad):
        safe = np.where(radius > 0, radius, 1.0)
        scale = np.where(radius > 0, grad / safe, 0.0)
        return scale * re.data, scale * im.data

    return _make(radius, (re, im), _backward, "abs")


def take_along_axis(a, indices: np.ndarray, axis: int = -1) -> Tensor:
    """Lấy phần tử theo chỉ số; các chỉ số trong cùng một hàng phải khác nhau"""
    a = as_tensor(a)
    indices = np.asarray(indices, dtype=np.int64)

    def _backward(grad):
        full = np.zeros_like(a.data)
        np.put_along_axis(full, indices, grad, axis=axis)
        return (full,)

    return _make(np.take_along_axis(a.data, indices, axis=axis), (a,), _backward, "take")


def gather_rows(values, indices: np.ndarray) -> Tensor:
    """
    Gom các hàng của values theo chỉ số.

    Args:
        values: Tensor (..., C, d)
        indices: mảng nguyên (..., Q, k) cùng các chiều batch

    Returns:
        Tensor (..., Q, k, d) với out[..., i, j, :] = values[..., indices[..., i, j], :]
    """
    values = as_tensor(values)
    indices = np.asarray(indices, dtype=np.int64)
    batch_shape = values.shape[:-2]
    if indices.shape[:-2] != batch_shape:
        raise ShapeError(f"gather_rows: batch {indices.shape[:-2]} khác {batch_shape}")
    n_batch = int(np.prod(batch_shape, dtype=np.int64))
    rows, width = values.shape[-2], values.shape[-1]
    flat_values = values.data.reshape(n_batch, rows, width)
    flat_index = indices.reshape(n_batch, indices.shape[-2], indices.shape[-1])
    batch_index = np.broadcast_to(np.arange(n_batch)[:, None, None], flat_index.shape)
    out = flat_values[batch_index, flat_index]

    def _backward(grad):
        full = np.zeros((n_batch, rows, width))
        np.add.at(full, (batch_index, flat_index), grad.reshape(out.shape))
        return (full.reshape(values.shape),)

    return _make(out.reshape(indices.shape + (width,)), (values,), _backward, "gather")


def depthwise_causal_conv(x, kernel) -> Tensor:
    """
    Tích chập nhân quả theo từng kênh đặc trưng.

    Args:
        x: Tensor (N, T, D)
        kernel: Tensor (k, D); kernel[k-1] nhân với x_t (độ trễ 0)

    Returns:
        Tensor (N, T, D), y[n,t,d] = Σ_i kernel[i,d]·x[n, t-(k-1-i), d]
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    if x.ndim != 3 or kernel.ndim != 2 or kernel.shape[1] != x.shape[2]:
        raise ShapeError(f"depthwise_causal_conv: {x.shape} với kernel {kernel.shape}")
    taps, length = kernel.shape[0], x.shape[1]
    padded = np.pad(x.data, ((0, 0), (taps - 1, 0), (0, 0)))
    out = np.zeros_like(x.data)
    for i in range(taps):
        out += padded[:, i:i + length, :] * kernel.data[i]
    _record_macs("depthwise_conv", x.data.size * taps)

    def _backward(grad):
        grad_padded = np.zeros_like(padded)
        grad_kernel = np.zeros_like(kernel.data)
        for i in range(taps):
            grad_padded[:, i:i + length, :] += grad * kernel.data[i]
            grad_kernel[i] = (grad * padded[:, i:i + length, :]).sum(axis=(0, 1))
        return grad_padded[:, taps - 1:, :], grad_kernel

    return _make(out, (x, kernel), _backward, "depthwise_conv")


# ---------------------------------------------------------------------------
# FFT thực
# ---------------------------------------------------------------------------

class ComplexTensor:
    """Tensor phức lưu dưới dạng cặp (phần thực, phần ảo)"""

    def __init__(self, re, im):
        re, im = as_tensor(re), as_tensor(im)
        if re.shape != im.shape:
            raise ShapeError(f"Phần thực {re.shape} và phần ảo {im.shape} khác kích thước")
        self.re = re
        self.im = im

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.re.shape

    def abs(self) -> Tensor:
        return complex_abs(self.re, self.im)

    def to_numpy(self) -> np.ndarray:
        return self.re.data + 1j * self.im.data


def _hermitian_weights(n: int, bins: int, axis: int, ndim: int) -> np.ndarray:
    # Số lần mỗi bin một phía xuất hiện trong phổ hai phía
    weights = np.full(bins, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    shape = [1] * ndim
    shape[axis] = bins
    return weights.reshape(shape)


def fft_real(x, axis: int = -1) -> ComplexTensor:
    """
    FFT một phía (T/2+1 bin), không chuẩn hóa, dọc theo một trục.

    Bin f ứng với tần số f·rate/T Hz.
    """
    x = as_tensor(x)
    axis = axis % x.ndim
    n = x.shape[axis]
    spectrum = np.fft.rfft(x.data, axis=axis)
    _record_macs("rfft", fft_cost(n, x.data.size // n))
    weights = _hermitian_weights(n, spectrum.shape[axis], axis, x.ndim)

    def _backward_re(grad):
        return (n * np.fft.irfft(grad / weights, n=n, axis=axis),)

    def _backward_im(grad):
        return (n * np.fft.irfft(1j * grad / weights, n=n, axis=axis),)

    re = _make(spectrum.real.copy(), (x,), _backward_re, "rfft_re")
    im = _make(spectrum.imag.copy(), (x,), _backward_im, "rfft_im")
    return ComplexTensor(re, im)


def ifft_real(spectrum: ComplexTensor, n: int, axis: int = -1) -> Tensor:
    """Nghịch đảo của fft_real (hệ số 1/T), trả về đúng n mẫu"""
    axis = axis % len(spectrum.shape)
    bins = spectrum.shape[axis]
    if n < 1 or bins != n // 2 + 1:
        raise ShapeError(f"ifft_real: {bins} bin không khớp độ dài {n} (cần {n // 2 + 1})")
    out = np.fft.irfft(spectrum.to_numpy(), n=n, axis=axis)
    x_size = out.size
    _record_macs("irfft", fft_cost(n, x_size // n))
    weights = _hermitian_weights(n, bins, axis, out.ndim)

    def _backward(grad):
        projected = np.fft.rfft(grad, axis=axis) * (weights / n)
        return projected.real, projected.imag

    return _make(out, (spectrum.re, spectrum.im), _backward, "irfft")


# ---------------------------------------------------------------------------
# Số ngẫu nhiên tất định
# ---------------------------------------------------------------------------

class SeedStreams:
    """
    Tách một seed gốc thành các luồng ngẫu nhiên độc lập có tên
    (data, init, dropout, augmentation, ...). Tắt một luồng không làm lệch
    các luồng còn lại.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)

    def generator(self, name: str) -> np.random.Generator:
        key = zlib.crc32(name.encode("utf-8"))
        return np.random.default_rng(np.random.SeedSequence([self.seed, key]))


def uniform_init(rng: np.random.Generator, shape: Sequence[int], fan_in: int) -> np.ndarray:
    """Khởi tạo đều trong [-1/√fan_in, 1/√fan_in]"""
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=tuple(shape))


# ---------------------------------------------------------------------------
# Lớp cơ sở cho khối có tham số
# ---------------------------------------------------------------------------

class Module:
    """Lớp cơ sở cho các khối có tham số học được"""

    def __init__(self):
        self._parameters: Dict[str, Tensor] = {}
        self._modules: Dict[str, "Module"] = {}
        self.training = False

    def add_parameter(self, name: str, value) -> Tensor:
        param = Tensor(value, requires_grad=True, name=name)
        self._parameters[name] = param
        return param

    def add_module(self, name: str, module: "Module") -> "Module":
        self._modules[name] = module
        return module

    def named_parameters(self, prefix: str = "") -> List[Tuple[str, Tensor]]:
        items = [(prefix + name, param) for name, param in self._parameters.items()]
        for name, module in self._modules.items():
            items.extend(module.named_parameters(f"{prefix}{name}."))
        return items

    def parameters(self) -> List[Tensor]:
        return [param for _, param in self.named_parameters()]

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for module in self._modules.values():
            module.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: param.data.copy() for name, param in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        missing = sorted(set(params) - set(state))
        if missing:
            raise ShapeError(f"Thiếu tham số: {', '.join(missing[:5])}")
        for name, param in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != param.data.shape:
                raise ShapeError(f"Tham số {name}: kích thước {value.shape} khác {param.data.shape}")
            param.data = value.copy()


Number = Union[int, float]
