#Kiểm tra gradient bằng sai phân trung tâm cho từng module

import logging
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from config import GRAD_CHECK_CONFIG
from core_logic import tensor_engine as te
from core_logic.dynamic_branch import DynamicBranch
from core_logic.graph_branch import SpatialAttention, build_graph, circle_positions
from core_logic.layers import LayerNorm, Linear
from core_logic.nakul_model import ModelConfig, NakulModel
from core_logic.spectral_branch import SpectralBranch, SpectralConfig
from core_logic.ssm_core import SelectiveParams, init_ssm_params, selective_scan
from core_logic.tensor_engine import SeedStreams, Tensor
from core_logic.training import smoothed_cross_entropy

logger = logging.getLogger(__name__)

MODULE_NAMES = ("tensor_engine", "ssm_core", "spectral_branch", "dynamic_branch", "graph_branch",
                "nakul_model", "training_harness", "cli")

LossFn = Callable[[], Tensor]


@dataclass
class ModuleCheck:
    """Kết quả kiểm tra gradient của một module"""

    module: str
    max_error: float
    samples: int
    worst_parameter: str

    def passed(self, tolerance: float = GRAD_CHECK_CONFIG["tolerance"]) -> bool:
        return self.max_error < tolerance


def relative_error(analytic: float, numeric: float, floor: float = GRAD_CHECK_CONFIG["floor"]) -> float:
    """|a - n| / max(|a|, |n|, floor)"""
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def check_gradients(module: str, loss_fn: LossFn, named_params: Sequence[Tuple[str, Tensor]],
                    samples: int, rng: np.random.Generator, step: float = GRAD_CHECK_CONFIG["step"]) -> ModuleCheck:
    """
    So sánh gradient ngược với sai phân trung tâm tại các phần tử tham số được lấy mẫu

    Args:
        module: Tên module
        loss_fn: Hàm trả về loss vô hướng (xây lại đồ thị mỗi lần gọi)
        named_params: (tên, tham số)
        samples: Số phần tử lấy mẫu (lấy tất cả nếu ít hơn)
        rng: Bộ sinh số ngẫu nhiên chọn phần tử
        step: Bước h của sai phân

    Returns:
        ModuleCheck
    """
    params = [param for _, param in named_params]
    grads = te.backward(loss_fn(), params)
    locations = [(index, flat) for index, param in enumerate(params) for flat in range(param.size)]
    chosen = rng.choice(len(locations), size=min(samples, len(locations)), replace=False)

    worst_error, worst_name = 0.0, ""
    with te.no_grad():
        for pick in chosen:
            index, flat = locations[pick]
            name, param = named_params[index]
            position = np.unravel_index(flat, param.shape)
            original = param.data[position]
            param.data[position] = original + step
            plus = loss_fn().item()
            param.data[position] = original - step
            minus = loss_fn().item()
            param.data[position] = original
            numeric = (plus - minus) / (2.0 * step)
            error = relative_error(float(grads[param][position]), numeric)
            if error > worst_error:
                worst_error, worst_name = error, f"{name}{list(position)}"
    return ModuleCheck(module, worst_error, len(chosen), worst_name)


def _tensor_engine_case(rng: np.random.Generator):
    linear = Linear(rng, 6, 8)
    norm = LayerNorm(8)
    x = te.constant(rng.standard_normal((3, 16, 6)))
    weights = rng.standard_normal((3, 16, 8))

    def loss_fn():
        hidden = te.gelu(linear(x))
        spectrum = te.fft_real(hidden, axis=1)
        filtered = te.ifft_real(te.ComplexTensor(spectrum.re * 0.5, spectrum.im * 1.5), n=16, axis=1)
        mixed = norm(filtered) * te.softmax(hidden, axis=-1) + te.sigmoid(hidden) * te.softplus(hidden)
        return te.sum_(mixed * te.constant(weights)) + te.sum_(te.log_softmax(hidden, axis=-1)) * 0.01

    return loss_fn, linear.named_parameters("linear.") + norm.named_parameters("norm.")


def _ssm_case(rng: np.random.Generator):
    params = SelectiveParams(rng, 6, 4)
    base = init_ssm_params(4)
    base.D_skip = 0.5
    x = te.constant(rng.standard_normal((12, 6)))
    weights = te.constant(rng.standard_normal(12))
    return (lambda: te.sum_(selective_scan(params, base, x) * weights)), params.named_parameters()


def _spectral_case(rng: np.random.Generator):
    branch = SpectralBranch(rng, 6, SpectralConfig(2, 250.0, 32), (10.0, 40.0), 8.0, noise=0.1)
    x = te.constant(rng.standard_normal((2, 32, 6)))
    weights = te.constant(rng.standard_normal((2, 32, 6)))
    return (lambda: te.sum_(branch(x) * weights)), branch.named_parameters()


def _dynamic_case(rng: np.random.Generator):
    branch = DynamicBranch(rng, 6, (3, 5), meta_hidden=8, noise=0.1)
    x = te.constant(rng.standard_normal((2, 20, 6)))
    weights = te.constant(rng.standard_normal((2, 20, 6)))
    return (lambda: te.sum_(branch(x) * weights)), branch.named_parameters()


def _graph_case(rng: np.random.Generator):
    graph = build_graph(circle_positions(5, 0.04), 0.05)
    attention = SpatialAttention(rng, 8, 5, 2, k_top=3)
    x = te.constant(rng.standard_normal((3, 5, 8)))
    weights = te.constant(rng.standard_normal((3, 5, 8)))
    return (lambda: te.sum_(attention(x, graph) * weights)), attention.named_parameters()


def grad_check_config(config: Optional[ModelConfig] = None) -> ModelConfig:
    """Phiên bản thu nhỏ của cấu hình mô hình cho kiểm tra gradient"""
    config = config or ModelConfig()
    width = 2 * config.n_heads if config.d_model > 2 * config.n_heads else config.d_model
    return replace(config, d_model=width, n_blocks=min(config.n_blocks, 2), ffn_hidden=2 * width,
                   head_hidden=min(config.head_hidden, 8), length=min(config.length, 4 * config.patch_size))


def _model_case(rng: np.random.Generator, model: NakulModel, graph):
    config = model.config
    signals = Tensor(rng.standard_normal((2, config.channels, config.length)))
    labels = rng.integers(0, config.classes, size=2)
    model.eval()
    return (lambda: smoothed_cross_entropy(model(signals, graph), labels, 0.1)), model.named_parameters()


def _training_case(rng: np.random.Generator):
    linear = Linear(rng, 12, 5)
    x = te.constant(rng.standard_normal((8, 12)))
    labels = rng.integers(0, 5, size=8)
    return (lambda: smoothed_cross_entropy(linear(x), labels, 0.1)), linear.named_parameters()


def run_grad_check(samples: int = GRAD_CHECK_CONFIG["samples"], seed: int = 0,
                   config: Optional[ModelConfig] = None,
                   reload_model: Optional[Callable[[NakulModel, object], Tuple[NakulModel, object]]] = None
                   ) -> List[ModuleCheck]:
    """
    Chạy kiểm tra gradient trên cả 8 module

    Args:
        samples: Số phần tử tham số lấy mẫu cho mỗi module
        seed: Seed gốc
        config: Cấu hình mô hình (được thu nhỏ cho nhanh)
        reload_model: Hàm ghi/đọc lại mô hình qua checkpoint (module cli); None thì dùng chính mô hình

    Returns:
        List[ModuleCheck]: theo thứ tự MODULE_NAMES
    """
    streams = SeedStreams(seed)
    small = grad_check_config(config)
    graph = build_graph(circle_positions(small.channels, small.layout_radius), small.radius)
    model = NakulModel(streams.generator("init"), small)
    reloaded, reloaded_graph = reload_model(model, graph) if reload_model else (model, graph)

    cases = {
        "tensor_engine": lambda rng: _tensor_engine_case(rng),
        "ssm_core": lambda rng: _ssm_case(rng),
        "spectral_branch": lambda rng: _spectral_case(rng),
        "dynamic_branch": lambda rng: _dynamic_case(rng),
        "graph_branch": lambda rng: _graph_case(rng),
        "nakul_model": lambda rng: _model_case(rng, model, graph),
        "training_harness": lambda rng: _training_case(rng),
        "cli": lambda rng: _model_case(rng, reloaded, reloaded_graph),
    }
    results = []
    for name in MODULE_NAMES:
        rng = streams.generator(f"grad_check.{name}")
        loss_fn, named_params = cases[name](rng)
        result = check_gradients(name, loss_fn, named_params, samples, rng)
        logger.info("grad-check %s: max_rel_error=%.3e (%d mẫu)", name, result.max_error, result.samples)
        results.append(result)
    return results
