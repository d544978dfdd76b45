#Nhánh phổ: bộ lọc băng Gauss học được, trọng số băng và trộn phức theo từng băng

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from core_logic import tensor_engine as te
from core_logic.errors import ShapeError, TensorError
from core_logic.tensor_engine import ComplexTensor, Module, Tensor

logger = logging.getLogger(__name__)

SQRT_TWO_PI = math.sqrt(2.0 * math.pi)


@dataclass
class SpectralConfig:
    """Cấu hình nhánh phổ"""

    n_bands: int = 4
    sample_rate: float = 250.0
    time_length: Optional[int] = None
    sigma_floor: float = 0.1

    def __post_init__(self):
        if self.n_bands < 1:
            raise ShapeError(f"Số băng phải >= 1, nhận {self.n_bands}")
        if not self.sample_rate > 0:
            raise ShapeError(f"Tần số lấy mẫu phải dương, nhận {self.sample_rate}")


class BandFilter(Module):
    """Một băng Gauss (μ, σ) với ma trận trộn phức W_r + iW_i và cổng W_gate"""

    def __init__(self, rng: np.random.Generator, features: int, mu: float, sigma: float,
                 sigma_floor: float = 0.1, noise: float = 0.01):
        super().__init__()
        if not (mu > 0 and sigma > sigma_floor):
            raise ShapeError(f"Cần μ > 0 và σ > {sigma_floor}, nhận μ={mu}, σ={sigma}")
        self.sigma_floor = sigma_floor
        self.mu_raw = self.add_parameter("mu_raw", te.softplus_inverse([mu]))
        self.sigma_raw = self.add_parameter("sigma_raw", te.softplus_inverse([sigma - sigma_floor]))
        self.W_r = self.add_parameter(
            "W_r", 0.5 * np.eye(features) + noise * rng.standard_normal((features, features)))
        self.W_i = self.add_parameter("W_i", noise * rng.standard_normal((features, features)))
        self.W_gate = self.add_parameter("W_gate", te.uniform_init(rng, (features, 1), features))

    def mu(self) -> Tensor:
        return te.softplus(self.mu_raw)

    def sigma(self) -> Tensor:
        return te.softplus(self.sigma_raw) + self.sigma_floor

    def values(self) -> tuple:
        """(μ, σ) hiện tại dưới dạng số thực"""
        return self.mu().item(), self.sigma().item()


def bin_frequencies(length: int, rate: float) -> np.ndarray:
    """Tần số (Hz) của các bin một phía: f·rate/T"""
    return np.arange(length // 2 + 1) * rate / length


def gaussian_mask(mu, sigma, frequencies: np.ndarray) -> Tensor:
    """Mật độ Gauss 1/(σ√(2π))·exp(-(f-μ)²/(2σ²)) tại các tần số cho trước"""
    z = (te.constant(frequencies) - mu) / sigma
    return te.exp(z * z * -0.5) / (sigma * SQRT_TWO_PI)


def band_mask(band: BandFilter, length: int, rate: float) -> Tensor:
    """
    Mặt nạ Gauss của một băng trên T/2+1 bin

    Args:
        band: Bộ lọc băng
        length: Độ dài chuỗi T (>= 2)
        rate: Tần số lấy mẫu

    Returns:
        Tensor (T/2+1,)
    """
    if length < 2:
        raise ShapeError(f"band_mask cần T >= 2, nhận {length}")
    return gaussian_mask(band.mu(), band.sigma(), bin_frequencies(length, rate))


def _band_gate(band: BandFilter, mask: Tensor, magnitude_t: Tensor) -> Tensor:
    # magnitude_t: (B, D, F); Z_k = Σ_f M_k(f)|X[f]| có kích thước (B, D)
    bins = mask.shape[0]
    z = te.matmul(magnitude_t, mask.reshape(bins, 1)).reshape(magnitude_t.shape[0], magnitude_t.shape[1])
    return te.sigmoid(te.matmul(z, band.W_gate))


def band_importance(bands: Sequence[BandFilter], magnitude: Tensor, rate: float,
                    length: Optional[int] = None) -> Tensor:
    """
    Trọng số quan trọng α_k = sigmoid(Z_k·W_gate) của từng băng cho từng mẫu

    Args:
        bands: Danh sách băng
        magnitude: |FFT(X)| kích thước (B, T/2+1, D)
        rate: Tần số lấy mẫu
        length: Độ dài T của chuỗi gốc (mặc định 2·(F-1))

    Returns:
        Tensor (B, K) với giá trị trong (0, 1)
    """
    magnitude = te.as_tensor(magnitude)
    if magnitude.ndim != 3:
        raise ShapeError(f"band_importance cần (B, F, D), nhận {magnitude.shape}")
    bins = magnitude.shape[1]
    if length is None:
        length = max(2, 2 * (bins - 1))
    if length // 2 + 1 != bins:
        raise ShapeError(f"{bins} bin không khớp độ dài {length}")
    magnitude_t = te.transpose(magnitude, (0, 2, 1))
    gates = [_band_gate(band, band_mask(band, length, rate), magnitude_t) for band in bands]
    return te.concat(gates, axis=1)


def _mix(bands: Sequence[BandFilter], x: Tensor, rate: float, gate_override=None):
    # Trả về (đầu ra, α) để nhánh ghi lại trọng số băng mà không tính FFT lần hai
    if x.ndim != 3:
        raise ShapeError(f"spectral_mix cần (B, T, D), nhận {x.shape}")
    batch, length, _ = x.shape
    spectrum = te.fft_real(x, axis=1)
    bins = spectrum.shape[1]
    frequencies = bin_frequencies(length, rate)
    masks = [gaussian_mask(band.mu(), band.sigma(), frequencies) for band in bands]

    if gate_override is None:
        magnitude_t = te.transpose(spectrum.abs(), (0, 2, 1))
        gates = te.concat([_band_gate(band, mask, magnitude_t) for band, mask in zip(bands, masks)], axis=1)
    else:
        override = np.asarray(gate_override, dtype=np.float64)
        gates = te.constant(np.broadcast_to(override, (batch, len(bands))))

    mixed_re = None
    mixed_im = None
    for k, (band, mask) in enumerate(zip(bands, masks)):
        weight = gates[:, k:k + 1].reshape(batch, 1, 1) * mask.reshape(1, bins, 1)
        band_re = te.matmul(spectrum.re, band.W_r) - te.matmul(spectrum.im, band.W_i)
        band_im = te.matmul(spectrum.re, band.W_i) + te.matmul(spectrum.im, band.W_r)
        mixed_re = weight * band_re if mixed_re is None else mixed_re + weight * band_re
        mixed_im = weight * band_im if mixed_im is None else mixed_im + weight * band_im

    out = te.ifft_real(ComplexTensor(mixed_re, mixed_im), n=length, axis=1)
    if not np.all(np.isfinite(out.data)):
        raise TensorError("spectral_mix cho giá trị không hữu hạn")
    return out, gates


def spectral_mix(bands: Sequence[BandFilter], x, rate: float, gate_override=None) -> Tensor:
    """
    X̃[f] = Σ_k α_k·M_k(f)·(W_r + iW_i)·X[f], đầu ra = Real(IFFT(X̃))

    Args:
        bands: Danh sách băng
        x: Tensor (B, T, D)
        rate: Tần số lấy mẫu dọc trục thời gian
        gate_override: α cố định (B, K) hoặc (K,), bỏ qua cổng học được

    Returns:
        Tensor (B, T, D)
    """
    out, _ = _mix(bands, te.as_tensor(x), rate, gate_override)
    return out


class SpectralBranch(Module):
    """Nhánh phổ: K băng Gauss chồng lấn trộn theo trục thời gian"""

    def __init__(self, rng: np.random.Generator, features: int, config: SpectralConfig,
                 centers: Sequence[float], sigma: float, noise: float = 0.01):
        super().__init__()
        if len(centers) != config.n_bands:
            raise ShapeError(f"Cần {config.n_bands} tâm băng, nhận {len(centers)}")
        self.config = config
        self.bands: List[BandFilter] = []
        for k, center in enumerate(centers):
            band = BandFilter(rng, features, center, sigma, config.sigma_floor, noise)
            self.bands.append(self.add_module(f"bands.{k}", band))
        self.gate_override = None
        self.last_band_gate: Optional[np.ndarray] = None

    def __call__(self, x: Tensor) -> Tensor:
        out, gates = _mix(self.bands, te.as_tensor(x), self.config.sample_rate, self.gate_override)
        self.last_band_gate = gates.numpy()
        return out

    def describe(self) -> List[tuple]:
        """Danh sách (μ, σ) của các băng"""
        return [band.values() for band in self.bands]
