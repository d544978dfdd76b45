#Huấn luyện: AdamW, lịch OneCycle, cross-entropy làm mượt nhãn, tăng cường dữ liệu, vòng lặp huấn luyện

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import AUGMENT_CONFIG, TRAIN_CONFIG
from core_logic import tensor_engine as te
from core_logic.errors import TensorError, TrainingAbort
from core_logic.graph_branch import ElectrodeGraph
from core_logic.nakul_model import NakulModel, model_forward, zscore_channels
from core_logic.tensor_engine import SeedStreams, Tensor

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """Siêu tham số huấn luyện"""

    lr: float = TRAIN_CONFIG["lr"]
    weight_decay: float = TRAIN_CONFIG["weight_decay"]
    beta1: float = TRAIN_CONFIG["beta1"]
    beta2: float = TRAIN_CONFIG["beta2"]
    eps: float = TRAIN_CONFIG["eps"]
    epochs: int = TRAIN_CONFIG["epochs"]
    batch_size: int = TRAIN_CONFIG["batch_size"]
    warmup_fraction: float = TRAIN_CONFIG["warmup_fraction"]
    final_lr: float = TRAIN_CONFIG["final_lr"]
    start_divisor: float = TRAIN_CONFIG["start_divisor"]
    label_smoothing: float = TRAIN_CONFIG["label_smoothing"]
    patience: int = TRAIN_CONFIG["patience"]
    seed: int = TRAIN_CONFIG["seed"]
    grad_clip: float = TRAIN_CONFIG["grad_clip"]
    val_fraction: float = TRAIN_CONFIG["val_fraction"]
    augment: bool = TRAIN_CONFIG["augment"]


class AdamState:
    """Mô-men bậc một/bậc hai cho từng tham số, khởi tạo bằng 0"""

    def __init__(self, params: Sequence[Tensor]):
        self.step = 0
        self.skipped = 0
        self.m = [np.zeros_like(param.data) for param in params]
        self.v = [np.zeros_like(param.data) for param in params]


def clip_gradients(grads: Sequence[np.ndarray], max_norm: float) -> Tuple[List[np.ndarray], float]:
    """Cắt gradient theo chuẩn toàn cục: nhân với max_norm/‖g‖ khi ‖g‖ > max_norm"""
    norm = math.sqrt(sum(float(np.sum(grad * grad)) for grad in grads))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        return [grad * scale for grad in grads], norm
    return list(grads), norm


def adamw_step(params: Sequence[Tensor], grads: Sequence[np.ndarray], state: AdamState,
               cfg: TrainConfig, lr_t: float) -> Tuple[Sequence[Tensor], AdamState]:
    """
    Một bước AdamW (weight decay tách rời, hiệu chỉnh độ lệch), sau khi cắt gradient

    Gradient không hữu hạn: bỏ qua bước và tăng bộ đếm state.skipped.

    Returns:
        Tuple: (tham số đã cập nhật, trạng thái)
    """
    if not all(np.all(np.isfinite(grad)) for grad in grads):
        state.skipped += 1
        logger.warning("Gradient không hữu hạn, bỏ qua bước cập nhật (%d lần)", state.skipped)
        return params, state

    grads, _ = clip_gradients(grads, cfg.grad_clip)
    state.step += 1
    correction1 = 1.0 - cfg.beta1 ** state.step
    correction2 = 1.0 - cfg.beta2 ** state.step
    for index, (param, grad) in enumerate(zip(params, grads)):
        state.m[index] = cfg.beta1 * state.m[index] + (1.0 - cfg.beta1) * grad
        state.v[index] = cfg.beta2 * state.v[index] + (1.0 - cfg.beta2) * grad * grad
        m_hat = state.m[index] / correction1
        v_hat = state.v[index] / correction2
        decayed = param.data - lr_t * cfg.weight_decay * param.data
        param.data = decayed - lr_t * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return params, state


def onecycle_lr(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """
    Lịch OneCycle: tăng tuyến tính từ lr/25 tới lr trong warmup_fraction đầu,
    sau đó cosine giảm từ lr tới final_lr tại bước cuối
    """
    if not 0 <= step < total_steps:
        raise ValueError(f"Bước {step} ngoài khoảng [0, {total_steps})")
    start = cfg.lr / cfg.start_divisor
    boundary = cfg.warmup_fraction * total_steps
    if step <= boundary:
        return start + (cfg.lr - start) * step / boundary if boundary > 0 else cfg.lr
    span = max(total_steps - 1 - boundary, 1e-12)
    progress = min(1.0, (step - boundary) / span)
    return cfg.final_lr + (cfg.lr - cfg.final_lr) * 0.5 * (1.0 + math.cos(math.pi * progress))


def smoothed_cross_entropy(logits, labels, eps: float = 0.1) -> Tensor:
    """
    Cross-entropy với nhãn làm mượt q = (1 - eps)·onehot + eps/n, trung bình theo batch

    Args:
        logits: Tensor (B, n)
        labels: Nhãn nguyên trong [0, n)
        eps: Hệ số làm mượt
    """
    logits = te.as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    batch, n_classes = logits.shape
    if labels.shape[0] != batch:
        raise TensorError(f"Số nhãn {labels.shape[0]} khác batch {batch}")
    if np.any(labels < 0) or np.any(labels >= n_classes):
        raise TensorError(f"Nhãn ngoài khoảng [0, {n_classes})")
    target = np.full((batch, n_classes), eps / n_classes)
    target[np.arange(batch), labels] += 1.0 - eps
    return -te.sum_(te.log_softmax(logits, axis=-1) * te.constant(target)) * (1.0 / batch)


def max_shift(rate: float) -> int:
    """Độ dịch thời gian tối đa: round(0.05 s · rate) mẫu"""
    return int(round(AUGMENT_CONFIG["jitter_seconds"] * rate))


def augment(x: np.ndarray, rng: np.random.Generator, rate: float, jitter: bool = True,
            scale: bool = True, noise: bool = True) -> np.ndarray:
    """
    Tăng cường một trial (C, T): dịch vòng ±round(0.05·rate) mẫu, nhân biên độ trong [0.9, 1.1],
    cộng nhiễu Gauss σ = 0.05. Mỗi phần có thể tắt riêng; số lần rút ngẫu nhiên không đổi.
    """
    limit = max_shift(rate)
    shift = int(rng.integers(-limit, limit + 1))
    low, high = AUGMENT_CONFIG["scale_range"]
    factor = rng.uniform(low, high)
    perturbation = AUGMENT_CONFIG["noise_sigma"] * rng.standard_normal(x.shape)
    out = np.roll(x, shift, axis=-1) if jitter else x.copy()
    if scale:
        out = out * factor
    if noise:
        out = out + perturbation
    return out


def stratified_split(labels: np.ndarray, fraction: float, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Tách train/val phân tầng theo lớp, cố định theo rng"""
    train, val = [], []
    for label in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == label))
        count = int(round(fraction * members.size))
        if members.size > 1:
            count = min(max(count, 1), members.size - 1)
        else:
            count = 0
        val.extend(members[:count])
        train.extend(members[count:])
    return np.sort(np.array(train, dtype=np.int64)), np.sort(np.array(val, dtype=np.int64))


def predict_logits(model: NakulModel, graph: ElectrodeGraph, signals: np.ndarray, batch_size: int = 16) -> np.ndarray:
    """Logits của toàn bộ tập (chế độ eval, không ghi đồ thị)"""
    model.eval()
    outputs = []
    with te.no_grad():
        for start in range(0, signals.shape[0], batch_size):
            outputs.append(model(Tensor(signals[start:start + batch_size]), graph).numpy())
    return np.concatenate(outputs, axis=0)


def evaluate(model: NakulModel, graph: ElectrodeGraph, signals: np.ndarray, labels: np.ndarray,
             batch_size: int = 16) -> Tuple[float, float]:
    """(loss cross-entropy, độ chính xác) trên một tập"""
    logits = predict_logits(model, graph, signals, batch_size)
    loss = smoothed_cross_entropy(logits, labels, 0.0).item()
    return loss, float(np.mean(np.argmax(logits, axis=1) == labels))


@dataclass
class TrainResult:
    """Kết quả huấn luyện"""

    history: List[Dict[str, float]] = field(default_factory=list)
    best_epoch: int = 0
    best_val_acc: float = 0.0
    best_val_loss: float = math.inf
    skipped_steps: int = 0
    stopped_early: bool = False
    val_indices: Optional[np.ndarray] = None
    train_indices: Optional[np.ndarray] = None


class Trainer:
    """Class điều khiển vòng lặp huấn luyện"""

    def __init__(self, model: NakulModel, graph: ElectrodeGraph, cfg: TrainConfig,
                 on_epoch: Optional[Callable[[Dict[str, float]], None]] = None):
        self.model = model
        self.graph = graph
        self.cfg = cfg
        self.on_epoch = on_epoch
        streams = SeedStreams(cfg.seed)
        self.split_rng = streams.generator("split")
        self.shuffle_rng = streams.generator("shuffle")
        self.augment_rng = streams.generator("augmentation")
        self.dropout_rng = streams.generator("dropout")

    def fit(self, signals: np.ndarray, labels: np.ndarray) -> TrainResult:
        """
        Huấn luyện và khôi phục checkpoint tốt nhất (val_acc cao nhất, hòa thì val_loss thấp hơn)

        Args:
            signals: (N, C, T)
            labels: (N,)

        Returns:
            TrainResult
        """
        cfg = self.cfg
        train_idx, val_idx = stratified_split(labels, cfg.val_fraction, self.split_rng)
        if val_idx.size == 0:
            val_idx = train_idx
        result = TrainResult(train_indices=train_idx, val_indices=val_idx)
        params = self.model.parameters()
        state = AdamState(params)
        steps_per_epoch = math.ceil(train_idx.size / cfg.batch_size)
        total_steps = max(1, cfg.epochs * steps_per_epoch)
        rate = self.model.config.rate
        normalize = self.model.config.zscore

        best_state = self.model.state_dict()
        best_acc = -math.inf
        stale_epochs = 0
        step = 0
        for epoch in range(1, cfg.epochs + 1):
            self.model.train()
            order = self.shuffle_rng.permutation(train_idx)
            losses = []
            lr_t = cfg.lr
            for start in range(0, order.size, cfg.batch_size):
                batch = order[start:start + cfg.batch_size]
                inputs = signals[batch]
                # z-score trước augment; model_forward không chuẩn hóa lại
                if normalize:
                    inputs = zscore_channels(inputs)
                if cfg.augment:
                    inputs = np.stack([augment(trial, self.augment_rng, rate) for trial in inputs])
                lr_t = onecycle_lr(step, total_steps, cfg)
                logits = model_forward(self.model, Tensor(inputs), self.graph, self.dropout_rng, normalized=normalize)
                loss = smoothed_cross_entropy(logits, labels[batch], cfg.label_smoothing)
                value = loss.item()
                if not math.isfinite(value):
                    raise TrainingAbort(f"Loss không hữu hạn ({value}) tại epoch {epoch}, bước {step}")
                grads = te.backward(loss, params)
                adamw_step(params, [grads[param] for param in params], state, cfg, lr_t)
                losses.append(value)
                step += 1

            val_loss, val_acc = evaluate(self.model, self.graph, signals[val_idx], labels[val_idx], cfg.batch_size)
            row = {"epoch": epoch, "train_loss": float(np.mean(losses)), "val_loss": val_loss,
                   "val_acc": val_acc, "lr": lr_t}
            result.history.append(row)
            if self.on_epoch is not None:
                self.on_epoch(row)
            logger.info("Epoch %d: train_loss=%.4f val_loss=%.4f val_acc=%.4f lr=%.2e",
                        epoch, row["train_loss"], val_loss, val_acc, lr_t)

            if val_acc > result.best_val_acc or (val_acc == result.best_val_acc and val_loss < result.best_val_loss) \
                    or result.best_epoch == 0:
                result.best_epoch = epoch
                result.best_val_acc = val_acc
                result.best_val_loss = val_loss
                best_state = self.model.state_dict()
            if val_acc > best_acc:
                best_acc = val_acc
                stale_epochs = 0
            else:
                stale_epochs += 1
                if stale_epochs >= cfg.patience:
                    result.stopped_early = True
                    logger.info("Dừng sớm tại epoch %d (không cải thiện trong %d epoch)", epoch, cfg.patience)
                    break

        self.model.load_state_dict(best_state)
        self.model.eval()
        result.skipped_steps = state.skipped
        return result


def train(model: NakulModel, signals: np.ndarray, labels: np.ndarray, cfg: TrainConfig, graph: ElectrodeGraph,
          on_epoch: Optional[Callable[[Dict[str, float]], None]] = None) -> TrainResult:
    """Huấn luyện mô hình, trả về nhật ký từng epoch (mô hình giữ checkpoint tốt nhất)"""
    return Trainer(model, graph, cfg, on_epoch).fit(signals, labels)
