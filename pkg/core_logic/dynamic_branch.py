#Nhánh nhân SSM động: mạng meta chọn trọng số cho các nhân depthwise nhiều cỡ

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core_logic import tensor_engine as te
from core_logic.errors import ShapeError
from core_logic.ssm_core import DiscreteSsm, materialize_kernel
from core_logic.tensor_engine import Module, Tensor

logger = logging.getLogger(__name__)


class MetaNetwork(Module):
    """MLP hai lớp α = softmax(W2·GELU(W1·s)) với s = (phương sai, entropy)"""

    def __init__(self, rng: np.random.Generator, n_kernels: int, hidden: int = 16):
        super().__init__()
        self.W1 = self.add_parameter("W1", te.uniform_init(rng, (hidden, 2), 2))
        self.W2 = self.add_parameter("W2", te.uniform_init(rng, (n_kernels, hidden), hidden))

    @property
    def n_kernels(self) -> int:
        return self.W2.shape[0]

    def logits(self, stats: Tensor) -> Tensor:
        hidden = te.gelu(te.matmul(stats, te.transpose(self.W1, (1, 0))))
        return te.matmul(hidden, te.transpose(self.W2, (1, 0)))


class KernelBank(Module):
    """M nhân depthwise (K_m × D) và ma trận cổng W_gate (D × D)"""

    def __init__(self, rng: np.random.Generator, features: int, kernel_sizes: Sequence[int],
                 decay: float = 0.7, noise: float = 0.01):
        super().__init__()
        self.kernel_sizes = tuple(int(size) for size in kernel_sizes)
        seed_ssm = DiscreteSsm(A_bar=np.array([[decay]]), B_bar=np.array([[1.0]]),
                               C=np.array([[1.0]]), D_skip=0.0, delta=1.0)
        self.kernels: List[Tensor] = []
        for size in self.kernel_sizes:
            # Phần tử cuối của nhân ứng với độ trễ 0
            taps = materialize_kernel(seed_ssm, size).numpy()[::-1]
            value = np.tile(taps[:, None], (1, features)) + noise * rng.standard_normal((size, features))
            self.kernels.append(self.add_parameter(f"kernel_{size}", value))
        self.W_gate = self.add_parameter("W_gate", te.uniform_init(rng, (features, features), features))


def batch_statistics(x) -> Tuple[Tensor, Tensor]:
    """
    Thống kê thô của từng mẫu

    Args:
        x: Tensor (B, T, D)

    Returns:
        Tuple: (phương sai (B,), entropy phổ (B,) theo cơ số e)
    """
    x = te.as_tensor(x)
    if x.ndim != 3:
        raise ShapeError(f"Cần (B, T, D), nhận {x.shape}")
    batch = x.shape[0]
    centered = x - te.mean(x, axis=(1, 2), keepdims=True)
    variance = te.mean(centered * centered, axis=(1, 2))

    spectrum = te.fft_real(x, axis=1)
    power = te.sum_(spectrum.re * spectrum.re + spectrum.im * spectrum.im, axis=2)
    magnitude = te.safe_sqrt(power)
    total = te.sum_(magnitude, axis=1, keepdims=True)
    # Tín hiệu toàn 0: p = 0 nên entropy = 0
    guard = te.constant((total.data == 0.0).astype(np.float64))
    probability = magnitude / (total + guard)
    entropy = -te.sum_(te.xlogx(probability), axis=1)
    return variance.reshape(batch), entropy.reshape(batch)


def temporal_variance(x) -> float:
    """Trung bình bình phương độ lệch của mọi phần tử so với trung bình chung"""
    x = te.as_tensor(x)
    variance, _ = batch_statistics(x.reshape(1, x.shape[0], -1))
    return variance.item()


def spectral_entropy(x) -> float:
    """Entropy Shannon của phân bố biên độ theo bin (gộp D bằng chuẩn Euclid)"""
    x = te.as_tensor(x)
    _, entropy = batch_statistics(x.reshape(1, x.shape[0], -1))
    return entropy.item()


def normalized_statistics(variance: Tensor, entropy: Tensor, length: int) -> Tensor:
    """Chuẩn hóa cố định: log(1 + phương sai), entropy / ln F"""
    bins = length // 2 + 1
    scaled_entropy = entropy * (1.0 / math.log(bins)) if bins > 1 else entropy * 0.0
    batch = variance.shape[0]
    return te.concat([te.log1p(variance).reshape(batch, 1), scaled_entropy.reshape(batch, 1)], axis=1)


def predict_weights(meta: MetaNetwork, variance, entropy) -> Tensor:
    """
    Trọng số nhân α trên đơn hình M chiều

    Args:
        meta: Mạng meta
        variance: Đặc trưng phương sai (số thực hoặc Tensor (B,))
        entropy: Đặc trưng entropy (số thực hoặc Tensor (B,))

    Returns:
        Tensor (M,) nếu đầu vào vô hướng, ngược lại (B, M)
    """
    variance, entropy = te.as_tensor(variance), te.as_tensor(entropy)
    scalar = variance.ndim == 0
    batch = 1 if scalar else variance.shape[0]
    stats = te.concat([variance.reshape(batch, 1), entropy.reshape(batch, 1)], axis=1)
    weights = te.softmax(meta.logits(stats), axis=-1)
    return weights.reshape(meta.n_kernels) if scalar else weights


def _mix(bank: KernelBank, meta: Optional[MetaNetwork], x: Tensor, weights_override=None):
    batch, length, _ = x.shape
    variance, entropy = batch_statistics(x)
    if weights_override is not None:
        override = np.asarray(weights_override, dtype=np.float64)
        weights = te.constant(np.broadcast_to(override, (batch, len(bank.kernels))))
    else:
        stats = normalized_statistics(variance, entropy, length)
        weights = te.softmax(meta.logits(stats), axis=-1)

    aggregate = None
    for m, kernel in enumerate(bank.kernels):
        branch = te.depthwise_causal_conv(x, kernel) * weights[:, m:m + 1].reshape(batch, 1, 1)
        aggregate = branch if aggregate is None else aggregate + branch
    gate = te.sigmoid(te.matmul(x, bank.W_gate))
    return aggregate * gate, weights, variance, entropy


def dynamic_mix(bank: KernelBank, meta: MetaNetwork, x, weights_override=None) -> Tensor:
    """
    Y = (Σ_m α_m·conv(x, K_m)) ⊙ sigmoid(x·W_gate)

    Args:
        bank: Các nhân depthwise và cổng
        meta: Mạng meta tính α từ thống kê của từng mẫu
        x: Tensor (B, T, D)
        weights_override: α cố định (M,) hoặc (B, M)

    Returns:
        Tensor (B, T, D)
    """
    x = te.as_tensor(x)
    if x.ndim != 3 or x.shape[2] != bank.W_gate.shape[0]:
        raise ShapeError(f"dynamic_mix cần (B, T, {bank.W_gate.shape[0]}), nhận {x.shape}")
    out, _, _, _ = _mix(bank, meta, x, weights_override)
    return out


class DynamicBranch(Module):
    """Nhánh nhân động: ngân hàng nhân + mạng meta (hoặc trọng số đều khi fixed_kernels)"""

    def __init__(self, rng: np.random.Generator, features: int, kernel_sizes: Sequence[int],
                 meta_hidden: int = 16, fixed_kernels: bool = False, decay: float = 0.7,
                 noise: float = 0.01):
        super().__init__()
        self.bank = self.add_module("bank", KernelBank(rng, features, kernel_sizes, decay, noise))
        self.meta = self.add_module("meta", MetaNetwork(rng, len(kernel_sizes), meta_hidden))
        self.fixed_kernels = fixed_kernels
        self.weights_override = None
        self.last_kernel_weights: Optional[np.ndarray] = None
        self.last_statistics: Optional[np.ndarray] = None

    def __call__(self, x: Tensor) -> Tensor:
        override = self.weights_override
        if override is None and self.fixed_kernels:
            override = np.full(len(self.bank.kernels), 1.0 / len(self.bank.kernels))
        out, weights, variance, entropy = _mix(self.bank, self.meta, te.as_tensor(x), override)
        self.last_kernel_weights = weights.numpy()
        self.last_statistics = np.stack([variance.numpy(), entropy.numpy()], axis=1)
        return out
