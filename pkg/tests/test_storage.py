import unittest
import sys
import os
import io
import shutil
import struct
import tempfile
from pathlib import Path

import numpy as np

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core_logic.errors import ArtifactError, ConfigError
from core_logic.graph_branch import build_graph, circle_positions
from core_logic.models import Trial, stack_trials
from core_logic.nakul_model import ModelConfig, NakulModel
from storage.checkpoint import (decode_checkpoint, encode_checkpoint, load_checkpoint, model_from_tensors,
                                model_to_tensors, save_checkpoint)
from storage.file_handler import FileHandler


class TestCheckpoint(unittest.TestCase):
    def setUp(self):
        """
        Thiết lập thư mục tạm và mô hình nhỏ
        """
        self.test_dir = tempfile.mkdtemp()
        self.config = ModelConfig(d_model=8, n_blocks=1, n_heads=2, kernel_sizes=(3, 5), k_top=4, ffn_hidden=16,
                                  head_hidden=8, patch_size=10, channels=4, length=40, rate=100.0, classes=3,
                                  band_centers=(5.0, 10.0, 20.0, 30.0), band_sigma=3.0,
                                  branches=("spectral", "graph"))
        self.model = NakulModel(np.random.default_rng(0), self.config)
        self.graph = build_graph(circle_positions(4, 0.03), 0.05)

    def tearDown(self):
        """
        Dọn dẹp sau khi test
        """
        shutil.rmtree(self.test_dir)

    def test_encode_layout(self):
        """
        Test bố cục nhị phân: magic, phiên bản, số tensor, tên, hạng, chiều, float32
        """
        payload = encode_checkpoint({"w": np.array([[1.0, 2.0, 3.0]])})
        self.assertEqual(payload[:4], b"NAKL")
        self.assertEqual(struct.unpack_from("<II", payload, 4), (1, 1))
        self.assertEqual(struct.unpack_from("<H", payload, 12), (1,))
        self.assertEqual(payload[14:15], b"w")
        self.assertEqual(payload[15], 2)
        self.assertEqual(struct.unpack_from("<II", payload, 16), (1, 3))
        self.assertEqual(len(payload), 24 + 12)
        decoded = decode_checkpoint(payload)
        np.testing.assert_array_equal(decoded["w"], [[1.0, 2.0, 3.0]])

    def test_scalar_tensor(self):
        """
        Test tensor hạng 0
        """
        decoded = decode_checkpoint(encode_checkpoint({"s": np.array(2.5)}))
        self.assertEqual(decoded["s"].shape, ())
        self.assertEqual(float(decoded["s"]), 2.5)

    def test_bad_magic(self):
        """
        Test sai magic bytes
        """
        payload = b"XXXX" + encode_checkpoint({"w": np.ones(2)})[4:]
        with self.assertRaises(ArtifactError):
            decode_checkpoint(payload)

    def test_truncated_payload(self):
        """
        Test checkpoint bị cắt cụt hoặc có dữ liệu thừa
        """
        payload = encode_checkpoint({"w": np.ones((3, 3))})
        for broken in (payload[:-4], payload[:13], payload + b"\x00"):
            with self.assertRaises(ArtifactError):
                decode_checkpoint(broken)

    def test_save_load_save_identical(self):
        """
        Test lưu -> tải -> lưu cho file giống hệt từng byte
        """
        first = save_checkpoint(Path(self.test_dir) / "a.ckpt", self.model, self.graph)
        model, graph = load_checkpoint(first)
        second = save_checkpoint(Path(self.test_dir) / "b.ckpt", model, graph)
        self.assertEqual(first.read_bytes(), second.read_bytes())
        self.assertEqual(model.config, self.config)
        np.testing.assert_array_equal(graph.adjacency, self.graph.adjacency)
        self.assertIsNone(model.blocks[0].dynamic)

    def test_reloaded_model_predicts_same(self):
        """
        Test mô hình tải lại cho logits gần như trùng (sai số float32)
        """
        model, graph = model_from_tensors(decode_checkpoint(encode_checkpoint(model_to_tensors(self.model,
                                                                                               self.graph))))
        x = np.random.default_rng(1).standard_normal((2, 4, 40))
        np.testing.assert_allclose(model(x, graph).data, self.model.eval()(x, self.graph).data, atol=1e-4)

    def test_missing_or_extra_tensors(self):
        """
        Test checkpoint thiếu siêu tham số hoặc có tham số lạ
        """
        tensors = model_to_tensors(self.model, self.graph)
        missing = dict(tensors)
        del missing["meta.d_model"]
        with self.assertRaises(ArtifactError):
            model_from_tensors(missing)
        extra = dict(tensors)
        extra["unknown.weight"] = np.ones(3)
        with self.assertRaises(ArtifactError):
            model_from_tensors(extra)

    def test_missing_file(self):
        """
        Test file checkpoint không tồn tại
        """
        with self.assertRaises(ArtifactError):
            load_checkpoint(Path(self.test_dir) / "none.ckpt")


class TestFileHandler(unittest.TestCase):
    def setUp(self):
        """
        Thiết lập thư mục tạm và FileHandler
        """
        self.test_dir = tempfile.mkdtemp()
        self.handler = FileHandler()
        rng = np.random.default_rng(2)
        self.trials = [Trial(rng.standard_normal((3, 20)), index % 2, 100.0, f"trial_{index:05d}.csv")
                       for index in range(4)]

    def tearDown(self):
        """
        Dọn dẹp sau khi test
        """
        shutil.rmtree(self.test_dir)

    def test_trial_file_roundtrip(self):
        """
        Test ghi và đọc trial giữ nguyên giá trị, nhãn và tần số
        """
        path = Path(self.test_dir) / "trial.csv"
        self.handler.write_trial(path, self.trials[1])
        self.assertTrue(path.read_text(encoding="utf-8").startswith("# channels=3 samples=20 rate=100 label=1"))
        trial = self.handler.read_trial(path)
        np.testing.assert_array_equal(trial.signal, self.trials[1].signal)
        self.assertEqual((trial.label, trial.rate), (1, 100.0))

    def test_trial_shape_mismatch(self):
        """
        Test header khai báo sai kích thước
        """
        path = Path(self.test_dir) / "bad.csv"
        path.write_text("# channels=2 samples=3 rate=100 label=0\n1,2,3\n", encoding="utf-8")
        with self.assertRaises(ArtifactError):
            self.handler.read_trial(path)

    def test_dataset_roundtrip(self):
        """
        Test lưu và tải tập dữ liệu theo labels.csv
        """
        self.handler.save_dataset(self.trials, self.test_dir, ["seed=0"])
        loaded = self.handler.load_dataset(self.test_dir)
        signals, labels = stack_trials(loaded)
        np.testing.assert_array_equal(signals, stack_trials(self.trials)[0])
        np.testing.assert_array_equal(labels, [0, 1, 0, 1])
        self.assertEqual((Path(self.test_dir) / "manifest.txt").read_text(encoding="utf-8"), "seed=0\n")

    def test_label_mismatch(self):
        """
        Test nhãn trong labels.csv khác nhãn trong file trial
        """
        self.handler.save_dataset(self.trials, self.test_dir)
        labels_path = Path(self.test_dir) / "labels.csv"
        labels_path.write_text("filename,label\ntrial_00000.csv,1\n", encoding="utf-8")
        with self.assertRaises(ArtifactError):
            self.handler.load_dataset(self.test_dir)

    def test_missing_dataset(self):
        """
        Test thư mục dữ liệu không có labels.csv
        """
        with self.assertRaises(ArtifactError):
            self.handler.load_dataset(Path(self.test_dir) / "none")

    def test_read_positions(self):
        """
        Test đọc tọa độ điện cực, bỏ qua chú thích và dòng trống
        """
        path = Path(self.test_dir) / "positions.txt"
        path.write_text("# name x y z\nFz 0 0.05 0.08\n\nCz 0 0 0.09\n", encoding="utf-8")
        names, positions = self.handler.read_positions(path)
        self.assertEqual(names, ["Fz", "Cz"])
        self.assertEqual(positions.shape, (2, 3))

    def test_read_positions_invalid(self):
        """
        Test file tọa độ sai định dạng, rỗng hoặc không tồn tại
        """
        path = Path(self.test_dir) / "positions.txt"
        for text in ("Fz 0 0\n", "Fz a b c\n", "# only comments\n"):
            path.write_text(text, encoding="utf-8")
            with self.assertRaises(ConfigError):
                self.handler.read_positions(path)
        with self.assertRaises(ConfigError):
            self.handler.read_positions(Path(self.test_dir) / "none.txt")

    def test_metrics_file(self):
        """
        Test file metrics có header cố định và giá trị đọc lại chính xác
        """
        path = self.handler.create_metrics_file(Path(self.test_dir) / "metrics.csv")
        self.handler.append_metrics_row(path, {"epoch": 1, "train_loss": 1.25, "val_loss": 0.5,
                                               "val_acc": 0.75, "lr": 1e-3})
        self.assertEqual(path.read_text(encoding="utf-8").splitlines()[0], "epoch,train_loss,val_loss,val_acc,lr")
        rows = self.handler.load_metrics(path)
        self.assertEqual(rows[0]["epoch"], "1")
        self.assertEqual(float(rows[0]["lr"]), 1e-3)

    def test_write_csv(self):
        """
        Test ghi CSV ra luồng với dòng kết thúc \\n
        """
        stream = io.StringIO()
        self.handler.write_csv(stream, [["a", "b"], [1, 2]])
        self.assertEqual(stream.getvalue(), "a,b\n1,2\n")


if __name__ == '__main__':
    unittest.main()
