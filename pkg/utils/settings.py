#Đọc file cấu hình key=value và dựng các đối tượng cấu hình

import logging
from pathlib import Path
from typing import Any, Callable, Dict, Optional

from config import DATA_CONFIG, MODEL_CONFIG, PATH_CONFIG, TRAIN_CONFIG
from core_logic.errors import ConfigError
from core_logic.nakul_model import ModelConfig
from core_logic.synthetic import SyntheticSpec
from core_logic.training import TrainConfig
from utils.validators import validate_settings

logger = logging.getLogger(__name__)


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"không phải giá trị đúng/sai: {text}")


def _parse_list(cast: Callable[[str], Any]) -> Callable[[str], tuple]:
    return lambda text: tuple(cast(item.strip()) for item in text.split(",") if item.strip())


def _parse_groups(cast: Callable[[str], Any]) -> Callable[[str], tuple]:
    return lambda text: tuple(_parse_list(cast)(group) for group in text.split(";"))


def _parse_int(text: str) -> int:
    return int(text)


def _parse_str(text: str) -> str:
    return text


# Khóa -> hàm chuyển kiểu
KEY_PARSERS: Dict[str, Callable[[str], Any]] = {
    "kernel_sizes": _parse_list(_parse_int),
    "band_centers": _parse_list(float),
    "branches": _parse_list(_parse_str),
    "class_bands": _parse_groups(float),
    "class_channels": _parse_groups(_parse_int),
    "positions_file": _parse_str,
    "data_dir": _parse_str,
    "checkpoint_out": _parse_str,
}

_INT_KEYS = ("d_model", "n_blocks", "n_heads", "n_bands", "k_top", "state_dim", "ffn_hidden", "head_hidden",
             "patch_size", "meta_hidden", "channels", "length", "classes", "trials_per_class", "epochs",
             "batch_size", "patience", "seed")
_BOOL_KEYS = ("fixed_kernels", "zscore", "augment")
_FLOAT_KEYS = ("dropout", "drop_path", "drop_edge", "fusion_scale", "radius", "layout_radius", "band_sigma",
               "rate", "noise_sigma", "lr", "weight_decay", "beta1", "beta2", "warmup_fraction", "final_lr",
               "label_smoothing", "grad_clip", "val_fraction")
KEY_PARSERS.update({key: _parse_int for key in _INT_KEYS})
KEY_PARSERS.update({key: _parse_bool for key in _BOOL_KEYS})
KEY_PARSERS.update({key: float for key in _FLOAT_KEYS})


def default_values() -> Dict[str, Any]:
    values = {key: MODEL_CONFIG[key] for key in KEY_PARSERS if key in MODEL_CONFIG}
    values.update({key: DATA_CONFIG[key] for key in KEY_PARSERS if key in DATA_CONFIG})
    values.update({key: TRAIN_CONFIG[key] for key in KEY_PARSERS if key in TRAIN_CONFIG})
    values.update({key: PATH_CONFIG[key] for key in ("positions_file", "data_dir", "checkpoint_out")})
    return values


class Settings:
    """Cấu hình đã kiểm tra, chia thành nhóm mô hình / dữ liệu / huấn luyện / đường dẫn"""

    def __init__(self, values: Dict[str, Any]):
        self.values = dict(values)

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def model_config(self) -> ModelConfig:
        names = set(ModelConfig.field_names())
        return ModelConfig(**{key: value for key, value in self.values.items() if key in names})

    def synthetic_spec(self) -> SyntheticSpec:
        return SyntheticSpec(
            n_classes=self.values["classes"],
            channels=self.values["channels"],
            length=self.values["length"],
            rate=self.values["rate"],
            class_bands=self.values["class_bands"],
            class_channels=self.values["class_channels"],
            noise_sigma=self.values["noise_sigma"],
            trials_per_class=self.values["trials_per_class"],
        )

    def train_config(self) -> TrainConfig:
        names = set(TrainConfig.__dataclass_fields__)
        return TrainConfig(**{key: value for key, value in self.values.items() if key in names})

    def with_overrides(self, **overrides) -> "Settings":
        """Bản sao với một số khóa bị ghi đè (bỏ qua giá trị None), kiểm tra lại"""
        values = dict(self.values)
        values.update({key: value for key, value in overrides.items() if value is not None})
        return build_settings(values)


def parse_settings_text(text: str) -> Dict[str, Any]:
    """
    Phân tích nội dung key=value; # bắt đầu chú thích, bỏ qua dòng trống

    Raises:
        ConfigError: khóa lạ hoặc giá trị không chuyển được kiểu (thông báo nêu tên khóa)
    """
    parsed = {}
    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"Dòng {number}: thiếu dấu '=' ({raw_line.strip()})")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEY_PARSERS:
            raise ConfigError(f"{key}: khóa cấu hình không được hỗ trợ")
        try:
            parsed[key] = KEY_PARSERS[key](value)
        except ValueError as e:
            raise ConfigError(f"{key}: giá trị không hợp lệ '{value}' ({e})") from e
    return parsed


def build_settings(values: Dict[str, Any]) -> Settings:
    ok, message = validate_settings(values)
    if not ok:
        raise ConfigError(message)
    return Settings(values)


def load_settings(path: Optional[str] = None) -> Settings:
    """
    Đọc file cấu hình (None -> toàn bộ giá trị mặc định)

    Returns:
        Settings
    """
    values = default_values()
    if path:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"Lỗi khi đọc file cấu hình {path}: {e}") from e
        values.update(parse_settings_text(text))
    settings = build_settings(values)
    logger.debug("Đã nạp cấu hình từ %s", path or "mặc định")
    return settings
