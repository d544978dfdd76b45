#Mô hình không gian trạng thái: rời rạc hóa ZOH, nhân chập, quét hồi quy và quét chọn lọc

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from core_logic import tensor_engine as te
from core_logic.errors import ShapeError, TensorError
from core_logic.tensor_engine import Module, Tensor

logger = logging.getLogger(__name__)

# Hệ số Padé bậc 6 của exp(x) ≈ N(x)/N(-x)
PADE6_COEFFICIENTS = (1.0, 1.0 / 2, 5.0 / 44, 1.0 / 66, 1.0 / 792, 1.0 / 15840, 1.0 / 665280)
PADE_NORM_LIMIT = 0.5
SERIES_NORM_LIMIT = 1.0
SERIES_TOLERANCE = 1e-14


@dataclass
class SsmParams:
    """SSM liên tục h' = Ah + Bx, y = Ch + D·x"""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D_skip: float = 0.0

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        n = self.A.shape[0]
        self.B = np.asarray(self.B, dtype=np.float64).reshape(n, 1)
        self.C = np.asarray(self.C, dtype=np.float64).reshape(1, n)
        self.D_skip = float(self.D_skip)
        if self.A.shape != (n, n):
            raise ShapeError(f"A phải là ma trận vuông, nhận {self.A.shape}")

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    def is_stable(self) -> bool:
        return bool(np.max(np.linalg.eigvals(self.A).real) <= 0.0)


@dataclass
class DiscreteSsm:
    """SSM rời rạc: h_k = Ā h_{k-1} + B̄ x_k, y_k = C h_k + D·x_k"""

    A_bar: np.ndarray
    B_bar: np.ndarray
    C: np.ndarray
    D_skip: float
    delta: float

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A_bar))))


def default_state_matrix(state_dim: int) -> np.ndarray:
    """Ma trận A chéo ổn định: -(1 + n), n = 0..N-1"""
    return np.diag(-(1.0 + np.arange(state_dim)))


def init_ssm_params(state_dim: int) -> SsmParams:
    return SsmParams(A=default_state_matrix(state_dim), B=np.ones(state_dim), C=np.ones(state_dim))


def matrix_exp(matrix: np.ndarray) -> np.ndarray:
    """
    Lũy thừa ma trận bằng Padé bậc 6 kết hợp scaling-and-squaring

    Args:
        matrix: Ma trận vuông

    Returns:
        np.ndarray: exp(matrix)
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"matrix_exp cần ma trận vuông, nhận {m.shape}")
    norm = np.linalg.norm(m, 1)
    squarings = 0
    if norm > PADE_NORM_LIMIT:
        squarings = int(np.ceil(np.log2(norm / PADE_NORM_LIMIT)))
    scaled = m / (2.0 ** squarings)

    identity = np.eye(m.shape[0])
    numerator = np.zeros_like(m)
    denominator = np.zeros_like(m)
    power = identity
    for k, coefficient in enumerate(PADE6_COEFFICIENTS):
        term = coefficient * power
        numerator += term
        denominator += term if k % 2 == 0 else -term
        power = power @ scaled

    result = np.linalg.solve(denominator, numerator)
    for _ in range(squarings):
        result = result @ result
    return result


def zoh_input_matrix(delta_a: np.ndarray, delta: float) -> np.ndarray:
    """
    Ψ = Δ·(I + ΔA/2! + (ΔA)²/3! + ...) = (ΔA)⁻¹(exp(ΔA) − I)·Δ

    Chuỗi Taylor dùng khi ‖ΔA‖₁ ≤ 1, dừng khi số hạng kế tiếp < 1e-14;
    ngược lại lấy khối trên-phải của exp([[ΔA, ΔI], [0, 0]]).
    """
    n = delta_a.shape[0]
    identity = np.eye(n)
    if np.linalg.norm(delta_a, 1) <= SERIES_NORM_LIMIT:
        total = identity.copy()
        term = identity
        k = 0
        while True:
            k += 1
            term = term @ delta_a / (k + 1)
            if np.linalg.norm(term, 1) < SERIES_TOLERANCE or k > 200:
                break
            total = total + term
        return delta * total

    block = np.zeros((2 * n, 2 * n))
    block[:n, :n] = delta_a
    block[:n, n:] = delta * identity
    return matrix_exp(block)[:n, n:]


def discretize(params: SsmParams, delta: float) -> DiscreteSsm:
    """
    Rời rạc hóa giữ bậc không (ZOH) với bước Δ

    Args:
        params: SSM liên tục
        delta: Bước thời gian Δ > 0

    Returns:
        DiscreteSsm: Ā = exp(ΔA), B̄ = Ψ·B
    """
    if not delta > 0:
        raise TensorError(f"Bước Δ phải dương, nhận {delta}")
    delta_a = delta * params.A
    a_bar = matrix_exp(delta_a)
    b_bar = zoh_input_matrix(delta_a, delta) @ params.B
    if not (np.all(np.isfinite(a_bar)) and np.all(np.isfinite(b_bar))):
        raise TensorError(f"Rời rạc hóa cho kết quả không hữu hạn (Δ={delta})")
    return DiscreteSsm(A_bar=a_bar, B_bar=b_bar, C=params.C.copy(), D_skip=params.D_skip, delta=float(delta))


def materialize_kernel(ssm: DiscreteSsm, length: int) -> Tensor:
    """Nhân chập K[k] = C·Ā^k·B̄, k = 0..L-1"""
    if length < 1:
        raise ShapeError(f"Độ dài nhân phải >= 1, nhận {length}")
    kernel = np.empty(length)
    state = ssm.B_bar
    for k in range(length):
        kernel[k] = (ssm.C @ state).item()
        state = ssm.A_bar @ state
    return te.constant(kernel)


def recurrent_scan(ssm: DiscreteSsm, x) -> Tensor:
    """Quét hồi quy từ h₀ = 0: y_k = C h_k + D·x_k"""
    signal = te.as_tensor(x).data.reshape(-1)
    state = np.zeros((ssm.A_bar.shape[0], 1))
    out = np.empty_like(signal)
    for k, value in enumerate(signal):
        state = ssm.A_bar @ state + ssm.B_bar * value
        out[k] = (ssm.C @ state).item() + ssm.D_skip * value
    return te.constant(out)


def causal_convolve(kernel, x) -> Tensor:
    """
    Tích chập nhân quả cùng độ dài: y_t = Σ_{j=0}^{min(t,k-1)} K_j·x_{t-j}

    Khả vi theo cả kernel và x.
    """
    kernel, x = te.as_tensor(kernel), te.as_tensor(x)
    if kernel.ndim != 1 or x.ndim != 1:
        raise ShapeError("causal_convolve cần kernel và x một chiều")
    taps, length = kernel.shape[0], x.shape[0]
    # Bố cục depthwise: phần tử cuối là độ trễ 0
    reversed_kernel = kernel[::-1].reshape(taps, 1)
    out = te.depthwise_causal_conv(x.reshape(1, length, 1), reversed_kernel)
    return out.reshape(length)


def zoh_matrices(delta: Tensor, state_matrix: np.ndarray) -> Tuple[Tensor, Tensor]:
    """
    Ā_t = exp(Δ_t A) và Ψ_t cho từng bước, khả vi theo Δ

    dĀ/dΔ = A·exp(ΔA), dΨ/dΔ = exp(ΔA).

    Args:
        delta: Tensor (L,) các bước dương
        state_matrix: Ma trận A (N, N)

    Returns:
        Tuple: (Ā, Ψ) cùng kích thước (L, N, N)
    """
    steps = delta.data.reshape(-1)
    a_bars = np.stack([matrix_exp(step * state_matrix) for step in steps])
    psis = np.stack([zoh_input_matrix(step * state_matrix, step) for step in steps])
    a_times_abar = np.matmul(state_matrix, a_bars)

    def _backward_abar(grad):
        return ((grad * a_times_abar).sum(axis=(1, 2)).reshape(delta.shape),)

    def _backward_psi(grad):
        return ((grad * a_bars).sum(axis=(1, 2)).reshape(delta.shape),)

    return (te.custom_op(a_bars, (delta,), _backward_abar, "zoh_abar"),
            te.custom_op(psis, (delta,), _backward_psi, "zoh_psi"))


class SelectiveParams(Module):
    """Phép chiếu chọn lọc: Δ_t = softplus(x_t W_Δ), B_t = x_t W_B, C_t = x_t W_C"""

    def __init__(self, rng: np.random.Generator, features: int, state_dim: int):
        super().__init__()
        self.W_delta = self.add_parameter("W_delta", te.uniform_init(rng, (features, 1), features))
        self.W_B = self.add_parameter("W_B", te.uniform_init(rng, (features, state_dim), features))
        self.W_C = self.add_parameter("W_C", te.uniform_init(rng, (features, state_dim), features))


def selective_scan(params: SelectiveParams, base: SsmParams, x) -> Tensor:
    """
    Quét SSM với Δ, B, C phụ thuộc đầu vào

    Đầu vào vô hướng của SSM là trung bình theo D đặc trưng: x̃_t = mean(x_t).

    Args:
        params: Trọng số chọn lọc
        base: SSM gốc cung cấp A và D_skip
        x: Tensor (L, D)

    Returns:
        Tensor (L,)
    """
    x = te.as_tensor(x)
    if x.ndim != 2 or x.shape[1] != params.W_delta.shape[0]:
        raise ShapeError(f"selective_scan cần (L, {params.W_delta.shape[0]}), nhận {x.shape}")
    length = x.shape[0]
    n = base.state_dim

    x_tilde = te.mean(x, axis=1)
    delta = te.softplus(te.matmul(x, params.W_delta)).reshape(length)
    b_t = te.matmul(x, params.W_B).reshape(length, n, 1)
    c_t = te.matmul(x, params.W_C).reshape(length, 1, n)
    a_bar, psi = zoh_matrices(delta, base.A)
    b_bar = te.matmul(psi, b_t)

    state = None
    outputs = []
    for t in range(length):
        drive = b_bar[t] * x_tilde[t]
        state = drive if state is None else te.matmul(a_bar[t], state) + drive
        outputs.append(te.matmul(c_t[t], state).reshape(1))
    return te.concat(outputs, axis=0) + x_tilde * base.D_skip
