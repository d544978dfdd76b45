#Các lớp cơ bản: Linear, LayerNorm, FeedForward

from typing import Optional

import numpy as np

from core_logic import tensor_engine as te
from core_logic.tensor_engine import Module, Tensor


class Linear(Module):
    """Phép chiếu affine y = x·W + b (W có kích thước in×out)"""

    def __init__(self, rng: np.random.Generator, in_features: int, out_features: int, bias: bool = True):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = self.add_parameter(
            "weight", te.uniform_init(rng, (in_features, out_features), in_features))
        self.bias = None
        if bias:
            self.bias = self.add_parameter(
                "bias", te.uniform_init(rng, (out_features,), in_features))

    def __call__(self, x: Tensor) -> Tensor:
        out = te.matmul(x, self.weight)
        if self.bias is not None:
            out = out + self.bias
        return out


class LayerNorm(Module):
    """Chuẩn hóa theo trục đặc trưng, scale 1 và shift 0 lúc khởi tạo"""

    def __init__(self, features: int):
        super().__init__()
        self.gamma = self.add_parameter("gamma", np.ones(features))
        self.beta = self.add_parameter("beta", np.zeros(features))

    def __call__(self, x: Tensor) -> Tensor:
        return te.layer_norm(x, self.gamma, self.beta)


class FeedForward(Module):
    """MLP hai lớp D -> hidden -> D với GELU và dropout ở lớp ẩn"""

    def __init__(self, rng: np.random.Generator, features: int, hidden: int, dropout: float = 0.0):
        super().__init__()
        self.fc1 = self.add_module("fc1", Linear(rng, features, hidden))
        self.fc2 = self.add_module("fc2", Linear(rng, hidden, features))
        self.dropout = dropout

    def __call__(self, x: Tensor, rng: Optional[np.random.Generator] = None) -> Tensor:
        hidden = te.gelu(self.fc1(x))
        if self.training:
            hidden = te.dropout(hidden, self.dropout, rng)
        return self.fc2(hidden)
