#Khối NAKUL (hợp nhất ba nhánh + FFN) và bộ phân loại đầy đủ

import logging
import math
from dataclasses import dataclass, field, fields
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import BRANCH_NAMES, DATA_CONFIG, MODEL_CONFIG
from core_logic import tensor_engine as te
from core_logic.dynamic_branch import DynamicBranch
from core_logic.errors import ShapeError
from core_logic.graph_branch import ElectrodeGraph, SpatialAttention
from core_logic.layers import FeedForward, LayerNorm, Linear
from core_logic.spectral_branch import SpectralBranch, SpectralConfig
from core_logic.tensor_engine import Module, Tensor

logger = logging.getLogger(__name__)


@dataclass
class ModelConfig:
    """Siêu tham số của mô hình (kích thước dữ liệu đi kèm để dựng nhúng vị trí)"""

    d_model: int = MODEL_CONFIG["d_model"]
    n_blocks: int = MODEL_CONFIG["n_blocks"]
    n_heads: int = MODEL_CONFIG["n_heads"]
    n_bands: int = MODEL_CONFIG["n_bands"]
    kernel_sizes: Tuple[int, ...] = MODEL_CONFIG["kernel_sizes"]
    k_top: int = MODEL_CONFIG["k_top"]
    state_dim: int = MODEL_CONFIG["state_dim"]
    ffn_hidden: int = MODEL_CONFIG["ffn_hidden"]
    head_hidden: int = MODEL_CONFIG["head_hidden"]
    patch_size: int = MODEL_CONFIG["patch_size"]
    dropout: float = MODEL_CONFIG["dropout"]
    drop_path: float = MODEL_CONFIG["drop_path"]
    drop_edge: float = MODEL_CONFIG["drop_edge"]
    fusion_scale: float = MODEL_CONFIG["fusion_scale"]
    radius: float = MODEL_CONFIG["radius"]
    layout_radius: float = MODEL_CONFIG["layout_radius"]
    band_centers: Tuple[float, ...] = MODEL_CONFIG["band_centers"]
    band_sigma: float = MODEL_CONFIG["band_sigma"]
    sigma_floor: float = MODEL_CONFIG["sigma_floor"]
    branches: Tuple[str, ...] = MODEL_CONFIG["branches"]
    fixed_kernels: bool = MODEL_CONFIG["fixed_kernels"]
    zscore: bool = MODEL_CONFIG["zscore"]
    meta_hidden: int = MODEL_CONFIG["meta_hidden"]
    kernel_init_decay: float = MODEL_CONFIG["kernel_init_decay"]
    init_noise: float = MODEL_CONFIG["init_noise"]
    pos_init_std: float = MODEL_CONFIG["pos_init_std"]
    channels: int = DATA_CONFIG["channels"]
    length: int = DATA_CONFIG["length"]
    rate: float = DATA_CONFIG["rate"]
    classes: int = DATA_CONFIG["classes"]

    def __post_init__(self):
        self.kernel_sizes = tuple(int(size) for size in self.kernel_sizes)
        self.band_centers = tuple(float(center) for center in self.band_centers)
        self.branches = tuple(name for name in BRANCH_NAMES if name in self.branches)
        if not self.branches:
            raise ShapeError("Cần bật ít nhất một nhánh")
        if self.d_model % self.n_heads != 0:
            raise ShapeError(f"n_heads={self.n_heads} phải chia hết d_model={self.d_model}")
        if self.length < self.patch_size:
            raise ShapeError(f"length={self.length} nhỏ hơn patch_size={self.patch_size}")

    @property
    def tokens(self) -> int:
        return math.ceil(self.length / self.patch_size)

    @property
    def patch_rate(self) -> float:
        return self.rate / self.patch_size

    @property
    def patch_band_centers(self) -> Tuple[float, ...]:
        """Tâm băng ánh xạ tỉ lệ 1/P về tần số mức patch"""
        return tuple(center / self.patch_size for center in self.band_centers)

    @classmethod
    def field_names(cls) -> List[str]:
        return [item.name for item in fields(cls)]


def zscore_channels(x: np.ndarray) -> np.ndarray:
    """Chuẩn hóa z-score từng kênh của từng mẫu; kênh có phương sai 0 chỉ được trừ trung bình"""
    centered = x - x.mean(axis=-1, keepdims=True)
    std = centered.std(axis=-1, keepdims=True)
    return np.where(std > 0, centered / np.where(std > 0, std, 1.0), centered)


def drop_path(x: Tensor, rate: float, rng: Optional[np.random.Generator]) -> Tensor:
    """Stochastic depth: bỏ cả nhánh dư cho từng mẫu"""
    if rate <= 0.0 or rng is None:
        return x
    shape = (x.shape[0],) + (1,) * (x.ndim - 1)
    keep = (rng.random(shape) >= rate) / (1.0 - rate)
    return x * te.constant(keep)


class NakulBlock(Module):
    """Khối NAKUL: LN -> (phổ, động, đồ thị) -> hợp nhất -> chiếu -> FFN, có nối tắt"""

    def __init__(self, rng: np.random.Generator, config: ModelConfig, drop_path_rate: float = 0.0):
        super().__init__()
        width = config.d_model
        self.config = config
        self.branches = config.branches
        self.drop_path_rate = drop_path_rate
        self.norm_mix = self.add_module("norm_mix", LayerNorm(width))
        self.spectral = None
        self.dynamic = None
        self.graph = None
        if "spectral" in self.branches:
            spectral_config = SpectralConfig(config.n_bands, config.patch_rate, config.tokens,
                                             config.sigma_floor / config.patch_size)
            self.spectral = self.add_module("spectral", SpectralBranch(
                rng, width, spectral_config, config.patch_band_centers,
                config.band_sigma / config.patch_size, config.init_noise))
        if "dynamic" in self.branches:
            self.dynamic = self.add_module("dynamic", DynamicBranch(
                rng, width, config.kernel_sizes, config.meta_hidden, config.fixed_kernels,
                config.kernel_init_decay, config.init_noise))
        if "graph" in self.branches:
            self.graph = self.add_module("graph", SpatialAttention(
                rng, width, config.channels, config.n_heads, config.k_top))
        self.fusion_logits = self.add_parameter("fusion_logits", np.zeros(len(BRANCH_NAMES)))
        self.proj = self.add_module("proj", Linear(rng, width, width))
        self.norm_fused = self.add_module("norm_fused", LayerNorm(width))
        self.norm_ffn = self.add_module("norm_ffn", LayerNorm(width))
        self.ffn = self.add_module("ffn", FeedForward(rng, width, config.ffn_hidden, config.dropout))
        self.fusion_override: Optional[np.ndarray] = None
        self.last_fusion_weights: Optional[np.ndarray] = None

    def fusion_weights(self) -> Tensor:
        """Trọng số hợp nhất (3,): softmax trên các nhánh đang bật, nhánh tắt nhận 0"""
        if self.fusion_override is not None:
            return te.constant(np.asarray(self.fusion_override, dtype=np.float64))
        enabled = [BRANCH_NAMES.index(name) for name in self.branches]
        weights = te.softmax(self.fusion_logits[np.array(enabled)], axis=0)
        if len(enabled) == len(BRANCH_NAMES):
            return weights
        scatter = np.zeros((len(enabled), len(BRANCH_NAMES)))
        scatter[np.arange(len(enabled)), enabled] = 1.0
        return te.matmul(weights.reshape(1, len(enabled)), te.constant(scatter)).reshape(len(BRANCH_NAMES))

    def __call__(self, x: Tensor, graph: ElectrodeGraph, rng: Optional[np.random.Generator] = None) -> Tensor:
        return block_forward(self, x, graph, rng)


def block_forward(block: NakulBlock, x, graph: ElectrodeGraph, rng: Optional[np.random.Generator] = None) -> Tensor:
    """
    Một khối NAKUL trên bố cục B×C×T_p×D

    Nhánh phổ và nhánh động trộn theo T_p cho từng kênh, nhánh đồ thị trộn theo C cho từng patch.
    Z = X + s·LN(W_proj·Y_fused), đầu ra = Z + FFN(LN(Z)).
    """
    x = te.as_tensor(x)
    if x.ndim != 4:
        raise ShapeError(f"block_forward cần (B, C, T_p, D), nhận {x.shape}")
    batch, channels, tokens, width = x.shape
    training = block.training and rng is not None
    normed = block.norm_mix(x)
    weights = block.fusion_weights()
    block.last_fusion_weights = weights.numpy()

    outputs = {}
    sequences = normed.reshape(batch * channels, tokens, width)
    if block.spectral is not None:
        outputs["spectral"] = block.spectral(sequences).reshape(batch, channels, tokens, width)
    if block.dynamic is not None:
        outputs["dynamic"] = block.dynamic(sequences).reshape(batch, channels, tokens, width)
    if block.graph is not None:
        active_graph = graph.drop_edges(block.config.drop_edge, rng) if training else graph
        per_patch = te.transpose(normed, (0, 2, 1, 3)).reshape(batch * tokens, channels, width)
        mixed = block.graph(per_patch, active_graph).reshape(batch, tokens, channels, width)
        outputs["graph"] = te.transpose(mixed, (0, 2, 1, 3))

    fused = None
    for index, name in enumerate(BRANCH_NAMES):
        if name not in outputs:
            continue
        term = outputs[name] * weights[index]
        fused = term if fused is None else fused + term

    mixed = block.norm_fused(block.proj(fused)) * block.config.fusion_scale
    z = x + drop_path(mixed, block.drop_path_rate, rng if training else None)
    ffn_out = block.ffn(block.norm_ffn(z), rng if training else None)
    return z + drop_path(ffn_out, block.drop_path_rate, rng if training else None)


class NakulModel(Module):
    """Bộ phân loại: nhúng patch + nhúng vị trí -> các khối NAKUL -> gộp trung bình -> MLP"""

    def __init__(self, rng: np.random.Generator, config: ModelConfig):
        super().__init__()
        self.config = config
        width = config.d_model
        self.patch_embed = self.add_module("patch_embed", Linear(rng, config.patch_size, width))
        self.pos_embedding = self.add_parameter(
            "pos_embedding", config.pos_init_std * rng.standard_normal((config.channels, config.tokens, width)))
        rates = np.linspace(0.0, config.drop_path, config.n_blocks) if config.n_blocks > 1 else [0.0] * config.n_blocks
        self.blocks: List[NakulBlock] = []
        for index in range(config.n_blocks):
            block = NakulBlock(rng, config, float(rates[index]))
            self.blocks.append(self.add_module(f"blocks.{index}", block))
        self.head_fc1 = self.add_module("head_fc1", Linear(rng, width, config.head_hidden))
        self.head_fc2 = self.add_module("head_fc2", Linear(rng, config.head_hidden, config.classes))

    def __call__(self, x, graph: ElectrodeGraph, rng: Optional[np.random.Generator] = None,
                 normalized: bool = False) -> Tensor:
        return model_forward(self, x, graph, rng, normalized)


def embed(model: NakulModel, x) -> Tensor:
    """
    Nhúng patch: chia mỗi kênh thành T_p = ceil(T/P) cửa sổ (cửa sổ cuối thêm 0), chiếu P -> D,
    cộng nhúng vị trí theo (kênh, patch)

    Args:
        model: Mô hình
        x: Tensor (B, C, T)

    Returns:
        Tensor (B, C, T_p, D)
    """
    x = te.as_tensor(x)
    patch = model.config.patch_size
    if x.ndim != 3:
        raise ShapeError(f"embed cần (B, C, T), nhận {x.shape}")
    batch, channels, length = x.shape
    if length < patch:
        raise ShapeError(f"Độ dài T={length} nhỏ hơn kích thước patch P={patch}")
    tokens = math.ceil(length / patch)
    if (channels, tokens) != model.pos_embedding.shape[:2]:
        raise ShapeError(f"Lưới (C={channels}, T_p={tokens}) không khớp nhúng vị trí {model.pos_embedding.shape[:2]}")
    padded = te.pad_axis(x, 2, 0, tokens * patch - length) if tokens * patch != length else x
    patches = padded.reshape(batch, channels, tokens, patch)
    return model.patch_embed(patches) + model.pos_embedding


def model_forward(model: NakulModel, x, graph: ElectrodeGraph, rng: Optional[np.random.Generator] = None,
                  normalized: bool = False) -> Tensor:
    """
    embed -> các khối -> trung bình theo (C, T_p) -> MLP -> logits (B, n_classes)

    normalized=True: x đã qua zscore_channels (bộ huấn luyện chuẩn hóa trước khi tăng cường).
    """
    x = te.as_tensor(x)
    if x.ndim != 3 or x.shape[1] != graph.n_channels or x.shape[1] != model.config.channels:
        raise ShapeError(f"Số kênh của đầu vào {x.shape} không khớp đồ thị ({graph.n_channels})")
    if model.config.zscore and not normalized:
        x = te.constant(zscore_channels(x.data))
    training = model.training and rng is not None
    hidden = embed(model, x)
    for block in model.blocks:
        hidden = block(hidden, graph, rng)
    pooled = te.mean(hidden, axis=(1, 2))
    head = te.gelu(model.head_fc1(pooled))
    if training:
        head = te.dropout(head, model.config.dropout, rng)
    return model.head_fc2(head)


def zero_mixing_parameters(model: NakulModel) -> None:
    """Đặt 0 cho mọi tham số trộn (ba nhánh, W_proj, FFN) của mọi khối"""
    for block in model.blocks:
        for part in (block.spectral, block.dynamic, block.graph, block.proj, block.ffn):
            if part is None:
                continue
            for param in part.parameters():
                param.data = np.zeros_like(param.data)


def count_flops(model: NakulModel, input_shape: Sequence[int]) -> Dict[str, int]:
    """
    Đếm giải tích số phép nhân-cộng theo từng thành phần

    Quy ước giống bộ đếm của tensor_engine: matmul batch·m·k·n, tích chập depthwise phần tử·số tap,
    FFT thực số phép·n·log2 n.

    Args:
        model: Mô hình
        input_shape: (B, C, T)

    Returns:
        Dict: embedding, fft, spectral_mixing, ssm_branches, meta_net, graph_conv, attention,
        projection_ffn, head, total
    """
    batch, channels, length = (int(dim) for dim in input_shape)
    config = model.config
    width, patch = config.d_model, config.patch_size
    tokens = math.ceil(length / patch)
    bins = tokens // 2 + 1
    sequences = batch * channels
    groups = batch * tokens
    heads, head_dim = config.n_heads, width // config.n_heads
    k = min(config.k_top, channels)

    counts = {name: 0 for name in ("embedding", "fft", "spectral_mixing", "ssm_branches", "meta_net",
                                   "graph_conv", "attention", "projection_ffn", "head")}
    counts["embedding"] = batch * channels * tokens * patch * width
    for block in model.blocks:
        if block.spectral is not None:
            n_bands = len(block.spectral.bands)
            counts["fft"] += 2 * te.fft_cost(tokens, sequences * width)
            counts["spectral_mixing"] += n_bands * (sequences * width * bins + sequences * width
                                                    + 4 * sequences * bins * width * width)
        if block.dynamic is not None:
            n_kernels = len(block.dynamic.bank.kernels)
            counts["fft"] += te.fft_cost(tokens, sequences * width)
            counts["ssm_branches"] += sum(sequences * tokens * width * size for size in block.dynamic.bank.kernel_sizes)
            counts["ssm_branches"] += sequences * tokens * width * width
            if not block.dynamic.fixed_kernels:
                hidden = block.dynamic.meta.W1.shape[0]
                counts["meta_net"] += sequences * 2 * hidden + sequences * hidden * n_kernels
        if block.graph is not None:
            counts["graph_conv"] += (groups * channels * channels * width
                                     + groups * channels * width * width
                                     + groups * heads * channels * width * channels)
            counts["attention"] += (3 * groups * channels * width * width
                                    + groups * heads * channels * head_dim * channels
                                    + groups * heads * channels * k * head_dim
                                    + groups * channels * width * width)
        counts["projection_ffn"] += (batch * channels * tokens * width * width
                                     + 2 * batch * channels * tokens * width * config.ffn_hidden)
    counts["head"] = batch * width * config.head_hidden + batch * config.head_hidden * config.classes
    counts["total"] = sum(counts.values())
    return counts
