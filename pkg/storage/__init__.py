"""
Storage Package - Quản lý việc lưu trữ và xử lý file dữ liệu, checkpoint
"""

from .file_handler import FileHandler
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = ['FileHandler', 'load_checkpoint', 'save_checkpoint']
