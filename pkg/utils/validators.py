#Các hàm kiểm tra dữ liệu cấu hình

from typing import Any, Dict, Sequence, Tuple

from config import BRANCH_NAMES, MODEL_CONFIG, VALIDATION_CONFIG


def validate_positive_int(value: Any, key: str, maximum: int = None) -> Tuple[bool, str]:
    """
    Kiểm tra số nguyên dương

    Args:
        value: Giá trị cần kiểm tra
        key: Tên khóa cấu hình (dùng trong thông báo lỗi)
        maximum: Giới hạn trên (nếu có)

    Returns:
        tuple: (is_valid, error_message)
    """
    if isinstance(value, bool) or not isinstance(value, int):
        return False, f"{key}: phải là số nguyên"
    if value <= 0:
        return False, f"{key}: phải lớn hơn 0"
    if maximum is not None and value > maximum:
        return False, f"{key}: không được vượt quá {maximum}"
    return True, ""


def validate_positive_float(value: Any, key: str) -> Tuple[bool, str]:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        return False, f"{key}: phải là số"
    if not value > 0:
        return False, f"{key}: phải lớn hơn 0"
    return True, ""


def validate_rate(value: Any, key: str, low: float = 0.0, high: float = 1.0,
                  low_inclusive: bool = True) -> Tuple[bool, str]:
    """
    Kiểm tra tỉ lệ nằm trong [low, high) hoặc (low, high)

    Returns:
        tuple: (is_valid, error_message)
    """
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        return False, f"{key}: phải là số"
    above = value >= low if low_inclusive else value > low
    if not (above and value < high):
        bracket = "[" if low_inclusive else "("
        return False, f"{key}: phải nằm trong {bracket}{low:g}, {high:g})"
    return True, ""


def validate_branches(branches: Sequence[str]) -> Tuple[bool, str]:
    if not branches:
        return False, "branches: cần ít nhất một nhánh"
    unknown = [name for name in branches if name not in BRANCH_NAMES]
    if unknown:
        return False, f"branches: nhánh không hợp lệ {', '.join(unknown)} (chỉ nhận {', '.join(BRANCH_NAMES)})"
    return True, ""


def validate_class_groups(values: Dict[str, Any]) -> Tuple[bool, str]:
    """Kiểm tra class_bands/class_channels: đủ số lớp, băng dưới Nyquist, kênh tồn tại"""
    classes = values["classes"]
    nyquist = values["rate"] / 2.0
    if len(values["class_bands"]) != classes:
        return False, f"class_bands: cần {classes} nhóm, nhận {len(values['class_bands'])}"
    if len(values["class_channels"]) != classes:
        return False, f"class_channels: cần {classes} nhóm, nhận {len(values['class_channels'])}"
    for group in values["class_bands"]:
        if not group:
            return False, "class_bands: nhóm rỗng"
        for center in group:
            if not 0 < center < nyquist:
                return False, f"class_bands: tâm băng {center:g} Hz phải nằm trong (0, {nyquist:g}) (Nyquist)"
    for group in values["class_channels"]:
        if not group:
            return False, "class_channels: nhóm rỗng"
        for channel in group:
            if not 0 <= channel < values["channels"]:
                return False, f"class_channels: kênh {channel} phải nằm trong [0, {values['channels']})"
    return True, ""


def validate_settings(values: Dict[str, Any]) -> Tuple[bool, str]:
    """
    Kiểm tra toàn bộ cấu hình, dừng ở lỗi đầu tiên

    Args:
        values: Dictionary khóa -> giá trị đã chuyển kiểu

    Returns:
        tuple: (is_valid, error_message) - thông báo lỗi bắt đầu bằng tên khóa
    """
    limits = {"channels": VALIDATION_CONFIG["max_channels"], "d_model": VALIDATION_CONFIG["max_d_model"]}
    for key in ("d_model", "n_heads", "n_bands", "k_top", "state_dim", "ffn_hidden", "head_hidden",
                "patch_size", "channels", "length", "classes", "trials_per_class", "batch_size",
                "patience", "meta_hidden"):
        ok, message = validate_positive_int(values[key], key, limits.get(key))
        if not ok:
            return ok, message
    for key in ("n_blocks", "epochs", "seed"):
        if isinstance(values[key], bool) or not isinstance(values[key], int) or values[key] < 0:
            return False, f"{key}: phải là số nguyên không âm"
    for key in ("rate", "radius", "layout_radius", "band_sigma", "lr", "fusion_scale"):
        ok, message = validate_positive_float(values[key], key)
        if not ok:
            return ok, message
    for key in ("dropout", "drop_path", "drop_edge", "label_smoothing", "weight_decay", "final_lr",
                "noise_sigma", "grad_clip"):
        high = 1.0 if key in ("dropout", "drop_path", "drop_edge", "label_smoothing") else float("inf")
        ok, message = validate_rate(values[key], key, 0.0, high)
        if not ok:
            return ok, message
    for key in ("warmup_fraction", "val_fraction", "beta1", "beta2"):
        ok, message = validate_rate(values[key], key, 0.0, 1.0, low_inclusive=False)
        if not ok:
            return ok, message

    if values["d_model"] % values["n_heads"] != 0:
        return False, f"n_heads: {values['n_heads']} phải chia hết d_model={values['d_model']}"
    if values["length"] < values["patch_size"]:
        return False, f"length: {values['length']} phải >= patch_size={values['patch_size']}"
    if len(values["band_centers"]) != values["n_bands"]:
        return False, f"band_centers: cần đúng n_bands={values['n_bands']} giá trị"
    if any(not center > 0 for center in values["band_centers"]):
        return False, "band_centers: các tâm băng phải dương"
    if values["band_sigma"] <= MODEL_CONFIG["sigma_floor"]:
        return False, f"band_sigma: phải lớn hơn {MODEL_CONFIG['sigma_floor']:g} Hz"
    if not values["kernel_sizes"]:
        return False, "kernel_sizes: cần ít nhất một nhân"
    for size in values["kernel_sizes"]:
        ok, message = validate_positive_int(size, "kernel_sizes", VALIDATION_CONFIG["max_kernel_size"])
        if not ok:
            return ok, message
    ok, message = validate_branches(values["branches"])
    if not ok:
        return ok, message
    return validate_class_groups(values)
