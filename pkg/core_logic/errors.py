#Các ngoại lệ dùng chung của ứng dụng


class TensorError(ValueError):
    """Lỗi số học của lõi tensor (NaN/Inf, loss không phải vô hướng...)"""


class ShapeError(TensorError):
    """Kích thước tensor không khớp"""


class NakulError(Exception):
    """Lỗi có mã thoát riêng cho dòng lệnh"""

    exit_code = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ConfigError(NakulError):
    """Cấu hình không hợp lệ"""

    exit_code = 2


class TrainingAbort(NakulError):
    """Huấn luyện bị dừng do loss không hữu hạn"""

    exit_code = 3


class ArtifactError(NakulError):
    """Không đọc được checkpoint/dữ liệu hoặc kích thước không khớp"""

    exit_code = 4


class VerificationError(NakulError):
    """Kiểm tra gradient thất bại"""

    exit_code = 5
