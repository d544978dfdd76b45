#Class chính điều khiển ứng dụng

import logging
import statistics
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from config import BENCH_CONFIG, CSV_CONFIG, GRAD_CHECK_CONFIG, PATH_CONFIG
from core_logic import tensor_engine as te
from core_logic.errors import ArtifactError, ConfigError, ShapeError, VerificationError
from core_logic.grad_check import run_grad_check
from core_logic.graph_branch import ElectrodeGraph, build_graph, circle_positions
from core_logic.models import stack_trials
from core_logic.nakul_model import ModelConfig, NakulModel, count_flops
from core_logic.reports import ReportGenerator
from core_logic.synthetic import BandPowerProbe, generate_synthetic
from core_logic.tensor_engine import SeedStreams, Tensor
from core_logic.training import Trainer, predict_logits
from storage.checkpoint import decode_checkpoint, encode_checkpoint, model_from_tensors, model_to_tensors
from storage.checkpoint import load_checkpoint, save_checkpoint
from storage.file_handler import FileHandler
from utils.settings import Settings, load_settings

logger = logging.getLogger(__name__)


class AppController:
    """Class chính điều khiển các lệnh của ứng dụng"""

    def __init__(self, stream: Optional[TextIO] = None):
        """
        Args:
            stream: Luồng nhận CSV (mặc định stdout)
        """
        self.stream = stream if stream is not None else sys.stdout
        self.file_handler = FileHandler()

    # ----- Tiện ích nội bộ -----
    def _emit(self, rows: Sequence[Sequence[Any]]) -> None:
        self.file_handler.write_csv(self.stream, rows)

    def build_graph(self, settings: Settings, channels: int) -> ElectrodeGraph:
        """Đồ thị điện cực từ positions_file, hoặc bố trí trên đường tròn khi không có file"""
        if settings["positions_file"]:
            _, positions = self.file_handler.read_positions(settings["positions_file"])
            if positions.shape[0] != channels:
                raise ConfigError(f"positions_file: có {positions.shape[0]} điện cực, dữ liệu có {channels} kênh")
        else:
            positions = circle_positions(channels, settings["layout_radius"])
        return build_graph(positions, settings["radius"])

    def _load_signals(self, data_dir) -> Tuple[np.ndarray, np.ndarray, float]:
        trials = self.file_handler.load_dataset(data_dir)
        signals, labels = stack_trials(trials)
        return signals, labels, trials[0].rate

    @staticmethod
    def _check_data(model: NakulModel, signals: np.ndarray, labels: Optional[np.ndarray] = None) -> None:
        config = model.config
        if signals.shape[1:] != (config.channels, config.length):
            raise ArtifactError(f"Dữ liệu (C, T)={signals.shape[1:]} không khớp checkpoint "
                                f"({config.channels}, {config.length})")
        if labels is not None and labels.size and int(labels.max()) >= config.classes:
            raise ArtifactError(f"Nhãn {int(labels.max())} vượt quá số lớp của checkpoint ({config.classes})")

    @staticmethod
    def _block(model: NakulModel, index: int):
        if not 0 <= index < len(model.blocks):
            raise ConfigError(f"block: chỉ số {index} phải nằm trong [0, {len(model.blocks)})")
        return model.blocks[index]

    @staticmethod
    def _collect(model: NakulModel, graph: ElectrodeGraph, signals: np.ndarray, capture, batch_size: int = 16) -> List:
        """Chạy suy luận theo lô, sau mỗi lô gọi capture() để lấy giá trị trung gian"""
        model.eval()
        captured = []
        try:
            with te.no_grad():
                for start in range(0, signals.shape[0], batch_size):
                    model(Tensor(signals[start:start + batch_size]), graph)
                    captured.append(capture())
        except ShapeError as e:
            raise ArtifactError(f"Dữ liệu không khớp mô hình: {e}") from e
        return captured

    # ----- Các lệnh -----
    def gen_data(self, config_path: Optional[str], out_dir, seed: Optional[int] = None) -> Path:
        """
        Sinh tập dữ liệu tổng hợp

        Args:
            config_path: File cấu hình (None -> mặc định)
            out_dir: Thư mục ghi dữ liệu
            seed: Seed (None -> seed trong cấu hình)

        Returns:
            Path: Thư mục dữ liệu
        """
        settings = load_settings(config_path).with_overrides(seed=seed)
        spec = settings.synthetic_spec()
        trials = generate_synthetic(spec, settings["seed"])
        manifest = spec.describe() + [f"seed={settings['seed']}"]
        return self.file_handler.save_dataset(trials, out_dir, manifest)

    def train(self, config_path: Optional[str], data_dir=None, out_path=None, epochs: Optional[int] = None,
              seed: Optional[int] = None) -> Dict[str, Any]:
        """
        Huấn luyện mô hình, ghi checkpoint và metrics.csv cạnh checkpoint

        Returns:
            Dict: checkpoint, metrics, best_epoch, best_val_acc, probe_val_acc
        """
        settings = load_settings(config_path).with_overrides(epochs=epochs, seed=seed)
        data_dir = data_dir or settings["data_dir"]
        out_path = Path(out_path or settings["checkpoint_out"])
        signals, labels, rate = self._load_signals(data_dir)
        if int(labels.max()) >= settings["classes"]:
            raise ConfigError(f"classes: dữ liệu có nhãn {int(labels.max())} nhưng classes={settings['classes']}")

        try:
            model_config = replace(settings.model_config(), channels=signals.shape[1], length=signals.shape[2],
                                   rate=rate)
        except ShapeError as e:
            raise ConfigError(f"patch_size: {e}") from e
        graph = self.build_graph(settings, signals.shape[1])
        train_config = settings.train_config()
        model = NakulModel(SeedStreams(train_config.seed).generator("init"), model_config)

        metrics_path = self.file_handler.create_metrics_file(out_path.parent / PATH_CONFIG["metrics_file"])
        trainer = Trainer(model, graph, train_config,
                          on_epoch=lambda row: self.file_handler.append_metrics_row(metrics_path, row))
        result = trainer.fit(signals, labels)
        save_checkpoint(out_path, model, graph)

        probe = BandPowerProbe([f for group in settings["class_bands"] for f in group], rate)
        probe.fit(signals[result.train_indices], labels[result.train_indices])
        probe_acc = probe.score(signals[result.val_indices], labels[result.val_indices])
        logger.info("Kết thúc huấn luyện: best_epoch=%d val_acc=%.4f, band-power probe val_acc=%.4f",
                    result.best_epoch, result.best_val_acc, probe_acc)
        if result.skipped_steps:
            logger.warning("Đã bỏ qua %d bước cập nhật do gradient không hữu hạn", result.skipped_steps)
        return {"checkpoint": out_path, "metrics": metrics_path, "best_epoch": result.best_epoch,
                "best_val_acc": result.best_val_acc, "probe_val_acc": probe_acc}

    def evaluate(self, ckpt_path, data_dir) -> Dict[str, float]:
        """In accuracy, macro-F1, bảng từng lớp và ma trận nhầm lẫn ra CSV"""
        model, graph = load_checkpoint(ckpt_path)
        signals, labels, _ = self._load_signals(data_dir)
        self._check_data(model, signals, labels)
        try:
            logits = predict_logits(model, graph, signals)
        except ShapeError as e:
            raise ArtifactError(f"Dữ liệu không khớp mô hình: {e}") from e
        report = ReportGenerator(labels, np.argmax(logits, axis=1), model.config.classes)
        for index, block in enumerate(report.get_csv_blocks()):
            if index:
                self._emit([[]])
            self._emit(block)
        return report.get_summary()

    def grad_check(self, config_path: Optional[str], samples: int = GRAD_CHECK_CONFIG["samples"],
                   seed: Optional[int] = None) -> list:
        """
        Kiểm tra gradient của 8 module, in bảng CSV

        Raises:
            VerificationError: khi có module vượt ngưỡng (nêu tham số tệ nhất)
        """
        settings = load_settings(config_path).with_overrides(seed=seed)

        def reload_model(model, graph):
            return model_from_tensors(decode_checkpoint(encode_checkpoint(model_to_tensors(model, graph))))

        results = run_grad_check(samples, settings["seed"], settings.model_config(), reload_model)
        rows = [CSV_CONFIG["grad_check_header"]]
        rows += [[item.module, f"{item.max_error:.6e}", item.samples, item.worst_parameter, int(item.passed())]
                 for item in results]
        self._emit(rows)
        failed = [item for item in results if not item.passed()]
        if failed:
            worst = max(failed, key=lambda item: item.max_error)
            raise VerificationError(f"Kiểm tra gradient thất bại: {worst.module} sai số {worst.max_error:.3e} "
                                    f"tại {worst.worst_parameter}")
        return results

    def dump_bands(self, ckpt_path, data_dir=None, block_index: int = 0) -> List[list]:
        """CSV band_index,mu_hz,sigma_hz,mean_alpha của khối block_index (tần số mức patch)"""
        model, graph = load_checkpoint(ckpt_path)
        block = self._block(model, block_index)
        if block.spectral is None:
            raise ArtifactError("Checkpoint không có nhánh phổ")
        if data_dir:
            signals, _, _ = self._load_signals(data_dir)
            self._check_data(model, signals)
        else:
            signals = np.zeros((1, model.config.channels, model.config.length))
        gates = np.concatenate(self._collect(model, graph, signals, lambda: block.spectral.last_band_gate), axis=0)
        mean_alpha = gates.mean(axis=0)
        rows = [CSV_CONFIG["bands_header"]]
        for index, (mu, sigma) in enumerate(block.spectral.describe()):
            rows.append([index, repr(mu), repr(sigma), repr(float(mean_alpha[index]))])
        self._emit(rows)
        return rows

    def dump_kernel_weights(self, ckpt_path, data_dir, block_index: int = 0) -> List[list]:
        """CSV sample,alpha_<k>...,variance,entropy: trọng số nhân của từng trial, trung bình theo kênh"""
        model, graph = load_checkpoint(ckpt_path)
        block = self._block(model, block_index)
        if block.dynamic is None:
            raise ArtifactError("Checkpoint không có nhánh động")
        signals, _, _ = self._load_signals(data_dir)
        self._check_data(model, signals)
        channels = model.config.channels

        def capture():
            weights = block.dynamic.last_kernel_weights
            stats = block.dynamic.last_statistics
            return (weights.reshape(-1, channels, weights.shape[-1]).mean(axis=1),
                    stats.reshape(-1, channels, 2).mean(axis=1))

        captured = self._collect(model, graph, signals, capture)
        weights = np.concatenate([item[0] for item in captured], axis=0)
        stats = np.concatenate([item[1] for item in captured], axis=0)
        header = (["sample"] + [f"{CSV_CONFIG['kernel_prefix']}{size}" for size in model.config.kernel_sizes]
                  + ["variance", "entropy"])
        rows = [header]
        for sample in range(weights.shape[0]):
            rows.append([sample] + [repr(float(value)) for value in weights[sample]]
                        + [repr(float(stats[sample, 0])), repr(float(stats[sample, 1]))])
        self._emit(rows)
        return rows

    def dump_attention(self, ckpt_path, data_dir, block_index: int = 0) -> List[list]:
        """CSV head,row,col,weight: ma trận chú ý không gian trung bình trên mọi trial và patch"""
        model, graph = load_checkpoint(ckpt_path)
        block = self._block(model, block_index)
        if block.graph is None:
            raise ArtifactError("Checkpoint không có nhánh đồ thị")
        signals, _, _ = self._load_signals(data_dir)
        self._check_data(model, signals)
        captured = self._collect(model, graph, signals, lambda: block.graph.last_attention)
        mean_attention = np.concatenate(captured, axis=0).mean(axis=0)
        rows = [CSV_CONFIG["attention_header"]]
        heads, channels, _ = mean_attention.shape
        for head in range(heads):
            for row in range(channels):
                for col in range(channels):
                    rows.append([head, row, col, repr(float(mean_attention[head, row, col]))])
        self._emit(rows)
        return rows

    def bench(self, config_path: Optional[str], lengths: Sequence[int] = BENCH_CONFIG["lengths"],
              repeats: int = BENCH_CONFIG["repeats"], warmup: int = BENCH_CONFIG["warmup"],
              batch: int = BENCH_CONFIG["batch"], seed: Optional[int] = None) -> List[Dict[str, Any]]:
        """
        Đo thời gian suy luận (trung vị của repeats lần sau warmup lần chạy khởi động)
        và số phép tính giải tích cho từng độ dài T_p

        Args:
            lengths: Các số patch T_p; độ dài tín hiệu là T_p·patch_size

        Returns:
            List[Dict]: t_p, samples, median_seconds, flops
        """
        if repeats < 1 or warmup < 0 or batch < 1:
            raise ConfigError("bench: repeats >= 1, warmup >= 0, batch >= 1")
        if not lengths or any(length < 1 for length in lengths):
            raise ConfigError("lengths: cần các số nguyên dương")
        settings = load_settings(config_path).with_overrides(seed=seed)
        streams = SeedStreams(settings["seed"])
        base = settings.model_config()
        graph = self.build_graph(settings, base.channels)
        results = []
        for tokens in lengths:
            config = replace(base, length=tokens * base.patch_size)
            model = NakulModel(streams.generator(f"bench.init.{tokens}"), config)
            model.eval()
            signals = Tensor(streams.generator(f"bench.data.{tokens}").standard_normal(
                (batch, config.channels, config.length)))
            timings = []
            with te.no_grad():
                for run in range(warmup + repeats):
                    start = time.perf_counter()
                    model(signals, graph)
                    elapsed = time.perf_counter() - start
                    if run >= warmup:
                        timings.append(elapsed)
            flops = count_flops(model, (batch, config.channels, config.length))["total"]
            row = {"t_p": tokens, "samples": config.length, "median_seconds": statistics.median(timings),
                   "flops": flops}
            logger.info("bench T_p=%d: %.4fs, %d FLOP", tokens, row["median_seconds"], flops)
            results.append(row)
        self._emit([CSV_CONFIG["bench_header"]] + [[row["t_p"], row["samples"], f"{row['median_seconds']:.6e}",
                                                     row["flops"]] for row in results])
        return results
