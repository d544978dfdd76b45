from typing import Sequence, Tuple

import numpy as np


class Trial:
    """Class đại diện cho một lần thử (trial): tín hiệu C×T và nhãn lớp"""

    def __init__(self, signal, label: int, rate: float, filename: str = ""):
        self.signal = np.asarray(signal, dtype=np.float64)
        self.label = int(label)
        self.rate = float(rate)
        self.filename = filename

    @property
    def channels(self) -> int:
        return self.signal.shape[0]

    @property
    def samples(self) -> int:
        return self.signal.shape[1]

    def __repr__(self) -> str:
        return f"Trial({self.filename!r}, label={self.label}, shape={self.signal.shape})"


def stack_trials(trials: Sequence[Trial]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gộp danh sách trial thành mảng

    Returns:
        Tuple: (tín hiệu (N, C, T), nhãn (N,))
    """
    signals = np.stack([trial.signal for trial in trials])
    labels = np.array([trial.label for trial in trials], dtype=np.int64)
    return signals, labels
