"""
NAKUL - Bộ phân loại tín hiệu đa kênh (SSM đa nhân, băng tần Gauss học được, chú ý không gian theo đồ thị)
"""

__version__ = "1.0.0"
__author__ = "NAKUL Team"
__description__ = "Mô hình NAKUL với lõi vi phân tự động trên numpy, huấn luyện và kiểm tra gradient"
