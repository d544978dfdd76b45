#Đọc/ghi checkpoint nhị phân NAKL

import logging
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Dict, Tuple

import numpy as np

from config import BRANCH_NAMES, CHECKPOINT_CONFIG
from core_logic.errors import ArtifactError, ShapeError
from core_logic.graph_branch import ElectrodeGraph
from core_logic.nakul_model import ModelConfig, NakulModel
from core_logic.tensor_engine import SeedStreams

logger = logging.getLogger(__name__)

META = CHECKPOINT_CONFIG["meta_prefix"]
_INT_FIELDS = ("d_model", "n_blocks", "n_heads", "n_bands", "k_top", "state_dim", "ffn_hidden",
               "head_hidden", "patch_size", "meta_hidden", "channels", "length", "classes")
_BOOL_FIELDS = ("fixed_kernels", "zscore")
_TUPLE_FIELDS = ("kernel_sizes", "band_centers")


def encode_checkpoint(tensors: Dict[str, np.ndarray]) -> bytes:
    """
    Mã hóa: magic NAKL, u32 phiên bản, u32 số tensor; mỗi tensor: u16 độ dài tên, tên UTF-8,
    u8 hạng, các chiều u32, giá trị float32. Mọi số nguyên little-endian.
    """
    parts = [CHECKPOINT_CONFIG["magic"], struct.pack("<II", CHECKPOINT_CONFIG["version"], len(tensors))]
    for name, value in tensors.items():
        array = np.asarray(value, dtype=np.float64)
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", array.ndim))
        parts.append(struct.pack(f"<{array.ndim}I", *array.shape))
        parts.append(array.astype("<f4").tobytes(order="C"))
    return b"".join(parts)


def decode_checkpoint(payload: bytes) -> "OrderedDict[str, np.ndarray]":
    """Giải mã checkpoint NAKL thành các mảng float64 theo đúng thứ tự ghi"""
    try:
        if payload[:4] != CHECKPOINT_CONFIG["magic"]:
            raise ArtifactError("Sai magic bytes (không phải checkpoint NAKL)")
        version, count = struct.unpack_from("<II", payload, 4)
        if version != CHECKPOINT_CONFIG["version"]:
            raise ArtifactError(f"Phiên bản checkpoint {version} không được hỗ trợ")
        offset = 12
        tensors = OrderedDict()
        for _ in range(count):
            (name_length,) = struct.unpack_from("<H", payload, offset)
            offset += 2
            name = payload[offset:offset + name_length].decode("utf-8")
            offset += name_length
            (rank,) = struct.unpack_from("<B", payload, offset)
            offset += 1
            shape = struct.unpack_from(f"<{rank}I", payload, offset)
            offset += 4 * rank
            size = int(np.prod(shape, dtype=np.int64))
            if offset + 4 * size > len(payload):
                raise ArtifactError(f"Checkpoint bị cắt cụt tại tensor {name}")
            values = np.frombuffer(payload, dtype="<f4", count=size, offset=offset)
            offset += 4 * size
            tensors[name] = values.astype(np.float64).reshape(shape)
        if offset != len(payload):
            raise ArtifactError("Checkpoint có dữ liệu thừa ở cuối")
        return tensors
    except (struct.error, UnicodeDecodeError, ValueError) as e:
        raise ArtifactError(f"Lỗi khi đọc checkpoint: {e}") from e


def _meta_value(value: float) -> float:
    # Giá trị float32 đọc lại được làm tròn về 7 chữ số có nghĩa
    return float(f"{value:.7g}")


def model_to_tensors(model: NakulModel, graph: ElectrodeGraph) -> "OrderedDict[str, np.ndarray]":
    """Tham số mô hình + siêu tham số (meta.*) + đồ thị điện cực"""
    config = model.config
    tensors = OrderedDict(model.state_dict())
    for name in ModelConfig.field_names():
        value = getattr(config, name)
        if name == "branches":
            tensors[META + name] = np.array([1.0 if branch in value else 0.0 for branch in BRANCH_NAMES])
        elif name in _TUPLE_FIELDS:
            tensors[META + name] = np.array(value, dtype=np.float64)
        else:
            tensors[META + name] = np.array(float(value))
    tensors[META + "adjacency"] = graph.adjacency
    tensors[META + "positions"] = graph.positions
    return tensors


def model_from_tensors(tensors: Dict[str, np.ndarray]) -> Tuple[NakulModel, ElectrodeGraph]:
    """Dựng lại mô hình và đồ thị chỉ từ nội dung checkpoint"""
    values = {}
    for name in ModelConfig.field_names():
        key = META + name
        if key not in tensors:
            raise ArtifactError(f"Checkpoint thiếu {key}")
        raw = tensors[key]
        if name == "branches":
            values[name] = tuple(branch for branch, flag in zip(BRANCH_NAMES, raw) if flag > 0.5)
        elif name == "kernel_sizes":
            values[name] = tuple(int(round(size)) for size in raw)
        elif name == "band_centers":
            values[name] = tuple(_meta_value(center) for center in raw)
        elif name in _INT_FIELDS:
            values[name] = int(round(float(raw)))
        elif name in _BOOL_FIELDS:
            values[name] = bool(float(raw) > 0.5)
        else:
            values[name] = _meta_value(float(raw))
    try:
        config = ModelConfig(**values)
        model = NakulModel(SeedStreams(0).generator("init"), config)
        state = {name: value for name, value in tensors.items() if not name.startswith(META)}
        extra = sorted(set(state) - {name for name, _ in model.named_parameters()})
        if extra:
            raise ArtifactError(f"Checkpoint có tham số lạ: {', '.join(extra[:5])}")
        model.load_state_dict(state)
        graph = ElectrodeGraph(tensors[META + "positions"], tensors[META + "adjacency"])
    except ShapeError as e:
        raise ArtifactError(f"Checkpoint không khớp kích thước: {e}") from e
    except KeyError as e:
        raise ArtifactError(f"Checkpoint thiếu {e}") from e
    model.eval()
    return model, graph


def save_checkpoint(path, model: NakulModel, graph: ElectrodeGraph) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_checkpoint(model_to_tensors(model, graph)))
    except OSError as e:
        raise ArtifactError(f"Lỗi khi ghi checkpoint {path}: {e}") from e
    logger.info("Đã lưu checkpoint %s", path)
    return path


def load_checkpoint(path) -> Tuple[NakulModel, ElectrodeGraph]:
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise ArtifactError(f"Lỗi khi đọc checkpoint {path}: {e}") from e
    return model_from_tensors(decode_checkpoint(payload))
