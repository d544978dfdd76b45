"""
Utils Package - Các tiện ích chung: validators và bộ đọc cấu hình
"""

from .validators import validate_positive_int, validate_rate, validate_settings

__all__ = ['validate_positive_int', 'validate_rate', 'validate_settings']
