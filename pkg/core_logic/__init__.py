"""
Core Logic Package - Lõi tensor, các nhánh của khối NAKUL, mô hình và huấn luyện
"""

from .tensor_engine import Tensor, backward
from .nakul_model import ModelConfig, NakulModel
from .training import TrainConfig, Trainer
from .reports import ReportGenerator

__all__ = ['Tensor', 'backward', 'ModelConfig', 'NakulModel', 'TrainConfig', 'Trainer', 'ReportGenerator']
