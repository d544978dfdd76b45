#Sinh dữ liệu tổng hợp có băng tần cài sẵn và bộ phân loại tuyến tính theo công suất băng

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from config import DATA_CONFIG, PATH_CONFIG
from core_logic.errors import ConfigError
from core_logic.models import Trial
from core_logic.tensor_engine import SeedStreams

logger = logging.getLogger(__name__)

PROBE_HALF_WIDTH = 1.0  # Hz
PROBE_EPS = 1e-12


@dataclass
class SyntheticSpec:
    """Mô tả tập dữ liệu tổng hợp"""

    n_classes: int = DATA_CONFIG["classes"]
    channels: int = DATA_CONFIG["channels"]
    length: int = DATA_CONFIG["length"]
    rate: float = DATA_CONFIG["rate"]
    class_bands: Tuple[Tuple[float, ...], ...] = DATA_CONFIG["class_bands"]
    class_channels: Tuple[Tuple[int, ...], ...] = DATA_CONFIG["class_channels"]
    noise_sigma: float = DATA_CONFIG["noise_sigma"]
    trials_per_class: int = DATA_CONFIG["trials_per_class"]

    def __post_init__(self):
        self.class_bands = tuple(tuple(float(f) for f in group) for group in self.class_bands)
        self.class_channels = tuple(tuple(int(c) for c in group) for group in self.class_channels)
        if len(self.class_bands) != self.n_classes or len(self.class_channels) != self.n_classes:
            raise ConfigError(f"class_bands/class_channels phải có đúng {self.n_classes} nhóm")
        nyquist = self.rate / 2.0
        for group in self.class_bands:
            if not group or any(not 0 < f < nyquist for f in group):
                raise ConfigError(f"class_bands: tâm băng phải nằm trong (0, {nyquist:g}) Hz")
        for group in self.class_channels:
            if not group or any(not 0 <= c < self.channels for c in group):
                raise ConfigError(f"class_channels: kênh phải nằm trong [0, {self.channels})")

    def describe(self) -> List[str]:
        """Các dòng mô tả dùng cho manifest"""
        return [
            f"classes={self.n_classes}",
            f"channels={self.channels}",
            f"length={self.length}",
            f"rate={self.rate:g}",
            f"trials_per_class={self.trials_per_class}",
            f"noise_sigma={self.noise_sigma:g}",
            "class_bands=" + ";".join(",".join(f"{f:g}" for f in group) for group in self.class_bands),
            "class_channels=" + ";".join(",".join(str(c) for c in group) for group in self.class_channels),
        ]


def generate_synthetic(spec: SyntheticSpec, seed: int) -> List[Trial]:
    """
    Sinh tập dữ liệu cân bằng lớp: tổng các sóng sin biên độ 1, pha ngẫu nhiên tại các băng
    của lớp trên các kênh hoạt động của lớp, cộng nhiễu Gauss trên mọi kênh

    Args:
        spec: Mô tả tập dữ liệu
        seed: Seed gốc

    Returns:
        List[Trial]: Trial thứ i có nhãn i mod n_classes
    """
    rng = SeedStreams(seed).generator("data")
    time = np.arange(spec.length) / spec.rate
    trials = []
    for index in range(spec.n_classes * spec.trials_per_class):
        label = index % spec.n_classes
        signal = spec.noise_sigma * rng.standard_normal((spec.channels, spec.length))
        for frequency in spec.class_bands[label]:
            for channel in spec.class_channels[label]:
                phase = rng.uniform(0.0, 2.0 * math.pi)
                signal[channel] += np.sin(2.0 * math.pi * frequency * time + phase)
        trials.append(Trial(signal, label, spec.rate, PATH_CONFIG["trial_pattern"].format(index=index)))
    logger.info("Đã sinh %d trial (%d lớp)", len(trials), spec.n_classes)
    return trials


class BandPowerProbe:
    """Bộ phân loại tuyến tính (bình phương tối thiểu, một-với-phần-còn-lại) trên log công suất băng"""

    def __init__(self, centers: Sequence[float], rate: float, half_width: float = PROBE_HALF_WIDTH):
        self.centers = sorted(set(float(c) for c in centers))
        self.rate = rate
        self.half_width = half_width
        self.weights = None
        self.mean = None
        self.std = None
        self.n_classes = 0

    @classmethod
    def for_spec(cls, spec: SyntheticSpec) -> "BandPowerProbe":
        return cls([f for group in spec.class_bands for f in group], spec.rate)

    def features(self, signals: np.ndarray) -> np.ndarray:
        """log công suất trong ±1 Hz quanh mỗi tâm băng, cho từng kênh: (N, C·n_tâm)"""
        length = signals.shape[-1]
        power = np.abs(np.fft.rfft(signals, axis=-1)) ** 2
        frequencies = np.arange(power.shape[-1]) * self.rate / length
        columns = []
        for center in self.centers:
            window = np.abs(frequencies - center) <= self.half_width
            columns.append(np.log(power[..., window].sum(axis=-1) + PROBE_EPS))
        return np.stack(columns, axis=-1).reshape(signals.shape[0], -1)

    def _design(self, signals: np.ndarray) -> np.ndarray:
        standardized = (self.features(signals) - self.mean) / self.std
        return np.hstack([standardized, np.ones((standardized.shape[0], 1))])

    def fit(self, signals: np.ndarray, labels: np.ndarray) -> "BandPowerProbe":
        features = self.features(signals)
        self.mean = features.mean(axis=0)
        std = features.std(axis=0)
        self.std = np.where(std > 0, std, 1.0)
        self.n_classes = int(labels.max()) + 1
        targets = -np.ones((labels.shape[0], self.n_classes))
        targets[np.arange(labels.shape[0]), labels] = 1.0
        self.weights, *_ = np.linalg.lstsq(self._design(signals), targets, rcond=None)
        return self

    def predict(self, signals: np.ndarray) -> np.ndarray:
        return np.argmax(self._design(signals) @ self.weights, axis=1)

    def score(self, signals: np.ndarray, labels: np.ndarray) -> float:
        return float(np.mean(self.predict(signals) == labels))
