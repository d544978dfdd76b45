#Nhánh đồ thị: đồ thị điện cực, tích chập đồ thị và chú ý top-k có thiên lệch không gian

import logging
import math
from typing import Optional

import numpy as np

from core_logic import tensor_engine as te
from core_logic.errors import ShapeError
from core_logic.tensor_engine import Module, Tensor

logger = logging.getLogger(__name__)


class ElectrodeGraph:
    """Đồ thị điện cực: tọa độ (mét), ma trận kề có khuyên và ma trận kề chuẩn hóa đối xứng"""

    def __init__(self, positions: np.ndarray, adjacency: np.ndarray):
        self.positions = np.asarray(positions, dtype=np.float64)
        self.adjacency = np.array(adjacency, dtype=np.float64)
        count = self.adjacency.shape[0]
        if self.adjacency.shape != (count, count):
            raise ShapeError(f"Ma trận kề phải vuông, nhận {self.adjacency.shape}")
        if not np.array_equal(self.adjacency, self.adjacency.T):
            raise ShapeError("Ma trận kề phải đối xứng")
        np.fill_diagonal(self.adjacency, 1.0)
        inv_sqrt_degree = 1.0 / np.sqrt(self.adjacency.sum(axis=1))
        self.norm_adjacency = inv_sqrt_degree[:, None] * self.adjacency * inv_sqrt_degree[None, :]

    @property
    def n_channels(self) -> int:
        return self.adjacency.shape[0]

    @classmethod
    def from_adjacency(cls, adjacency: np.ndarray, positions: Optional[np.ndarray] = None) -> "ElectrodeGraph":
        adjacency = np.asarray(adjacency, dtype=np.float64)
        if positions is None:
            positions = np.zeros((adjacency.shape[0], 3))
        return cls(positions, adjacency)

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvalsh(self.norm_adjacency))))

    def drop_edges(self, rate: float, rng: np.random.Generator) -> "ElectrodeGraph":
        """DropEdge: bỏ ngẫu nhiên các cạnh (đối xứng), giữ nguyên khuyên"""
        if rate <= 0.0:
            return self
        keep = np.triu(rng.random(self.adjacency.shape) >= rate, k=1)
        keep = keep | keep.T
        adjacency = self.adjacency * keep
        np.fill_diagonal(adjacency, 1.0)
        return ElectrodeGraph(self.positions, adjacency)


def build_graph(positions, radius: float = 0.05) -> ElectrodeGraph:
    """
    Dựng đồ thị: A_ij = 1 khi khoảng cách <= radius hoặc i == j

    Args:
        positions: Tọa độ (C, 3) theo mét
        radius: Bán kính kết nối (mét)

    Returns:
        ElectrodeGraph
    """
    positions = np.asarray(positions, dtype=np.float64)
    if positions.ndim != 2 or positions.shape[0] < 1 or positions.shape[1] != 3:
        raise ShapeError(f"Tọa độ phải có kích thước (C, 3), nhận {positions.shape}")
    if not np.all(np.isfinite(positions)):
        raise ShapeError("Tọa độ điện cực chứa NaN/Inf")
    distance = np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=-1)
    adjacency = (distance <= radius).astype(np.float64)
    return ElectrodeGraph(positions, adjacency)


def circle_positions(channels: int, radius: float = 0.06) -> np.ndarray:
    """C điện cực cách đều trên đường tròn bán kính radius (mặt phẳng z = 0)"""
    angles = 2.0 * math.pi * np.arange(channels) / channels
    return np.stack([radius * np.cos(angles), radius * np.sin(angles), np.zeros(channels)], axis=1)


def graph_conv(graph: ElectrodeGraph, features, weight) -> Tensor:
    """G(H) = GELU(Â·H·W) với H kích thước (B, C, D)"""
    features = te.as_tensor(features)
    if features.ndim != 3 or features.shape[1] != graph.n_channels:
        raise ShapeError(f"graph_conv: {features.shape} không khớp {graph.n_channels} kênh")
    propagated = te.matmul(te.constant(graph.norm_adjacency), features)
    return te.gelu(te.matmul(propagated, weight))


class SpatialAttention(Module):
    """Chú ý đa đầu theo trục kênh với thiên lệch từ đồ thị và mặt nạ top-k"""

    def __init__(self, rng: np.random.Generator, features: int, channels: int, n_heads: int, k_top: int = 16):
        super().__init__()
        if features % n_heads != 0:
            raise ShapeError(f"Số đầu {n_heads} phải chia hết D={features}")
        self.n_heads = n_heads
        self.head_dim = features // n_heads
        self.channels = channels
        self.k_top = k_top
        for name in ("W_Q", "W_K", "W_V", "W_graph", "W_O"):
            setattr(self, name, self.add_parameter(name, te.uniform_init(rng, (features, features), features)))
        self.W_bias = self.add_parameter("W_bias", te.uniform_init(rng, (n_heads, features, channels), features))
        self.beta_raw = self.add_parameter("beta_raw", te.softplus_inverse([1.0]))
        self.last_attention: Optional[np.ndarray] = None

    def beta(self) -> Tensor:
        return te.softplus(self.beta_raw)

    def _split_heads(self, x: Tensor) -> Tensor:
        batch, channels, _ = x.shape
        return te.transpose(x.reshape(batch, channels, self.n_heads, self.head_dim), (0, 2, 1, 3))

    def __call__(self, x: Tensor, graph: ElectrodeGraph) -> Tensor:
        return topk_masked_attention(self, graph, x)


def spatial_biases(attention: SpatialAttention, graph: ElectrodeGraph, features) -> Tensor:
    """
    Thiên lệch không gian B^(h) = H̃·W_bias^(h) với H̃ = graph_conv(H)

    Returns:
        Tensor (B, H, C, C)
    """
    features = te.as_tensor(features)
    batch, channels, width = features.shape
    if channels != attention.channels:
        raise ShapeError(f"Số kênh {channels} khác {attention.channels} của W_bias")
    smoothed = graph_conv(graph, features, attention.W_graph)
    return te.matmul(smoothed.reshape(batch, 1, channels, width), attention.W_bias)


def attention_scores(attention: SpatialAttention, graph: ElectrodeGraph, x) -> Tensor:
    """S = QKᵀ/√d_k + β·B_spatial, kích thước (B, H, C, C)"""
    x = te.as_tensor(x)
    query = attention._split_heads(te.matmul(x, attention.W_Q))
    key = attention._split_heads(te.matmul(x, attention.W_K))
    raw = te.matmul(query, te.transpose(key, (0, 1, 3, 2))) * (1.0 / math.sqrt(attention.head_dim))
    return raw + attention.beta() * spatial_biases(attention, graph, x)


def topk_indices(scores: np.ndarray, k: int) -> np.ndarray:
    """Chỉ số k điểm lớn nhất mỗi hàng; hòa thì ưu tiên cột có chỉ số nhỏ"""
    return np.argsort(-scores, axis=-1, kind="stable")[..., :k]


def topk_masked_attention(attention: SpatialAttention, graph: ElectrodeGraph, x) -> Tensor:
    """
    Chú ý thưa: chỉ giữ top-k điểm mỗi hàng (phần còn lại coi như -∞), softmax trên k phần tử

    Args:
        attention: Tham số chú ý
        graph: Đồ thị điện cực
        x: Tensor (B, C, D)

    Returns:
        Tensor (B, C, D) = concat_heads(A·V)·W_O
    """
    x = te.as_tensor(x)
    if x.ndim != 3 or x.shape[1] != graph.n_channels:
        raise ShapeError(f"Số kênh của đầu vào {x.shape} không khớp đồ thị ({graph.n_channels})")
    batch, channels, width = x.shape
    k = min(attention.k_top, channels)

    scores = attention_scores(attention, graph, x)
    order = topk_indices(scores.data, k)
    weights = te.softmax(te.take_along_axis(scores, order, axis=-1), axis=-1)
    value = attention._split_heads(te.matmul(x, attention.W_V))
    selected = te.gather_rows(value, order)
    heads = te.matmul(weights.reshape(batch, attention.n_heads, channels, 1, k), selected)
    merged = te.transpose(heads.reshape(batch, attention.n_heads, channels, attention.head_dim), (0, 2, 1, 3))

    dense = np.zeros(scores.shape)
    np.put_along_axis(dense, order, weights.data, axis=-1)
    attention.last_attention = dense
    return te.matmul(merged.reshape(batch, channels, width), attention.W_O)
