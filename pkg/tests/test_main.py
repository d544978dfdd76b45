import unittest
import sys
import os
import csv
import io
import shutil
import tempfile
from contextlib import redirect_stdout
from pathlib import Path
from unittest import mock

import numpy as np

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core_logic.grad_check import MODULE_NAMES
from core_logic.graph_branch import build_graph, circle_positions
from core_logic.nakul_model import ModelConfig, NakulModel
from main import main
from storage.checkpoint import save_checkpoint

TINY_CONFIG = """\
# cấu hình rất nhỏ cho test dòng lệnh
channels = 4
length = 40
rate = 100
classes = 2
class_bands = 10;30
class_channels = 0,1;2,3
trials_per_class = 4
d_model = 8
n_blocks = 1
n_heads = 2
kernel_sizes = 3,5
k_top = 4
ffn_hidden = 16
head_hidden = 8
patch_size = 10
layout_radius = 0.03
epochs = 1
batch_size = 4
"""


class TestMain(unittest.TestCase):
    def setUp(self):
        """
        Thiết lập thư mục tạm và file cấu hình nhỏ
        """
        self.test_dir = Path(tempfile.mkdtemp())
        self.config = self.test_dir / "tiny.cfg"
        self.config.write_text(TINY_CONFIG, encoding="utf-8")
        self.data = self.test_dir / "data"
        self.ckpt = self.test_dir / "model" / "nakul.ckpt"

    def tearDown(self):
        """
        Dọn dẹp sau mỗi test case
        """
        shutil.rmtree(self.test_dir)

    def run_main(self, *argv):
        stream = io.StringIO()
        code = main(["--log-level", "WARNING"] + [str(item) for item in argv], stream)
        return code, list(csv.reader(io.StringIO(stream.getvalue())))

    def prepare(self):
        self.assertEqual(self.run_main("gen-data", "--config", self.config, "--out", self.data, "--seed", 1)[0], 0)
        code, _ = self.run_main("train", "--config", self.config, "--data", self.data, "--out", self.ckpt)
        self.assertEqual(code, 0)

    def test_gen_data_is_reproducible(self):
        """
        Test gen-data cùng seed cho các file giống hệt từng byte
        """
        other = self.test_dir / "other"
        self.run_main("gen-data", "--config", self.config, "--out", self.data, "--seed", 3)
        self.run_main("gen-data", "--config", self.config, "--out", other, "--seed", 3)
        names = sorted(path.name for path in self.data.iterdir())
        self.assertEqual(names, sorted(path.name for path in other.iterdir()))
        self.assertEqual(len(names), 8 + 2)
        for name in names:
            self.assertEqual((self.data / name).read_bytes(), (other / name).read_bytes())
        manifest = (self.data / "manifest.txt").read_text(encoding="utf-8")
        self.assertIn("seed=3", manifest)

    def test_train_and_eval(self):
        """
        Test huấn luyện 1 epoch ghi checkpoint, metrics.csv và eval in ba khối CSV
        """
        self.prepare()
        self.assertTrue(self.ckpt.exists())
        metrics = (self.ckpt.parent / "metrics.csv").read_text(encoding="utf-8").splitlines()
        self.assertEqual(metrics[0], "epoch,train_loss,val_loss,val_acc,lr")
        self.assertEqual(len(metrics), 2)

        code, rows = self.run_main("eval", "--ckpt", self.ckpt, "--data", self.data)
        self.assertEqual(code, 0)
        self.assertEqual(rows[0], ["metric", "value"])
        self.assertEqual(rows[1][0], "accuracy")
        self.assertIn(["class", "precision", "recall", "f1", "support"], rows)
        self.assertEqual(rows[-1][0], "true_1")

    def test_eval_uniform_random_predictor(self):
        """
        Test eval với bộ dự đoán ngẫu nhiên đều trên 1000 trial 4 lớp cân bằng: accuracy ≈ 0.25 ± 0.05
        """
        config = self.test_dir / "four.cfg"
        config.write_text(TINY_CONFIG + "classes = 4\nclass_bands = 5;15;25;35\nclass_channels = 0;1;2;3\n"
                          "trials_per_class = 250\n", encoding="utf-8")
        self.assertEqual(self.run_main("gen-data", "--config", config, "--out", self.data)[0], 0)
        model_config = ModelConfig(d_model=8, n_blocks=1, n_heads=2, kernel_sizes=(3, 5), k_top=4, ffn_hidden=16,
                                   head_hidden=8, patch_size=10, channels=4, length=40, rate=100.0, classes=4,
                                   band_centers=(5.0, 10.0, 20.0, 30.0), band_sigma=3.0)
        model = NakulModel(np.random.default_rng(0), model_config)
        save_checkpoint(self.ckpt, model, build_graph(circle_positions(4, 0.03), 0.05))

        rng = np.random.default_rng(12)
        with mock.patch("app_controller.predict_logits",
                        side_effect=lambda model, graph, signals: rng.random((signals.shape[0], 4))):
            code, rows = self.run_main("eval", "--ckpt", self.ckpt, "--data", self.data)
        self.assertEqual(code, 0)
        self.assertEqual(rows[1][0], "accuracy")
        self.assertLess(abs(float(rows[1][1]) - 0.25), 0.05)
        confusion = [row for row in rows if row and row[0].startswith("true_")]
        self.assertEqual([sum(int(value) for value in row[1:]) for row in confusion], [250] * 4)

    def test_training_is_bitwise_reproducible(self):
        """
        Test hai lần train cùng seed cho checkpoint và metrics giống hệt từng byte
        """
        self.prepare()
        second = self.test_dir / "second" / "nakul.ckpt"
        code, _ = self.run_main("train", "--config", self.config, "--data", self.data, "--out", second)
        self.assertEqual(code, 0)
        self.assertEqual(self.ckpt.read_bytes(), second.read_bytes())
        self.assertEqual((self.ckpt.parent / "metrics.csv").read_bytes(), (second.parent / "metrics.csv").read_bytes())

    def test_invalid_config_exit_code(self):
        """
        Test cấu hình sai trả về mã thoát 2
        """
        bad = self.test_dir / "bad.cfg"
        bad.write_text("unknown_key = 1\n", encoding="utf-8")
        self.assertEqual(self.run_main("gen-data", "--config", bad, "--out", self.data)[0], 2)
        bad.write_text(TINY_CONFIG + "n_heads = 3\n", encoding="utf-8")
        self.assertEqual(self.run_main("bench", "--config", bad, "--lengths", "4")[0], 2)

    def test_bad_checkpoint_exit_code(self):
        """
        Test checkpoint hỏng hoặc dữ liệu không khớp trả về mã thoát 4
        """
        self.run_main("gen-data", "--config", self.config, "--out", self.data)
        broken = self.test_dir / "broken.ckpt"
        broken.write_bytes(b"NOPE" + bytes(16))
        self.assertEqual(self.run_main("eval", "--ckpt", broken, "--data", self.data)[0], 4)
        self.assertEqual(self.run_main("eval", "--ckpt", self.test_dir / "none.ckpt", "--data", self.data)[0], 4)

    def test_grad_check_passes(self):
        """
        Test grad-check trên cấu hình nhỏ: mã thoát 0 và đủ 8 module
        """
        code, rows = self.run_main("grad-check", "--config", self.config, "--samples", 20)
        self.assertEqual(code, 0)
        self.assertEqual(rows[0], ["module", "max_rel_error", "samples", "worst_parameter", "passed"])
        self.assertEqual([row[0] for row in rows[1:]], list(MODULE_NAMES))
        self.assertTrue(all(row[4] == "1" for row in rows[1:]))

    def test_grad_check_detects_wrong_derivative(self):
        """
        Test đạo hàm GELU bị sai: grad-check trả về mã thoát 5
        """
        with mock.patch("core_logic.tensor_engine.gelu_derivative", lambda x: np.ones_like(x)):
            code, rows = self.run_main("grad-check", "--config", self.config, "--samples", 20)
        self.assertEqual(code, 5)
        self.assertEqual(rows[1][0], "tensor_engine")
        self.assertEqual(rows[1][4], "0")

    def test_dump_bands(self):
        """
        Test dump-bands không cần dữ liệu: tâm băng khởi tạo theo tỉ lệ 1/P, alpha trong (0, 1)
        """
        self.prepare()
        code, rows = self.run_main("dump-bands", "--ckpt", self.ckpt)
        self.assertEqual(code, 0)
        self.assertEqual(rows[0], ["band_index", "mu_hz", "sigma_hz", "mean_alpha"])
        self.assertEqual(len(rows), 5)
        for row in rows[1:]:
            self.assertGreater(float(row[1]), 0.0)
            self.assertTrue(0.0 < float(row[3]) < 1.0)
        self.assertEqual(self.run_main("dump-bands", "--ckpt", self.ckpt, "--block", 3)[0], 2)

    def test_dump_kernel_weights(self):
        """
        Test dump-kernel-weights: mỗi trial một dòng, trọng số nhân có tổng bằng 1
        """
        self.prepare()
        code, rows = self.run_main("dump-kernel-weights", "--ckpt", self.ckpt, "--data", self.data)
        self.assertEqual(code, 0)
        self.assertEqual(rows[0], ["sample", "alpha_3", "alpha_5", "variance", "entropy"])
        self.assertEqual(len(rows), 1 + 8)
        for row in rows[1:]:
            self.assertAlmostEqual(float(row[1]) + float(row[2]), 1.0, places=9)

    def test_dump_attention(self):
        """
        Test dump-attention: mỗi hàng chú ý trung bình có tổng bằng 1
        """
        self.prepare()
        code, rows = self.run_main("dump-attention", "--ckpt", self.ckpt, "--data", self.data)
        self.assertEqual(code, 0)
        self.assertEqual(rows[0], ["head", "row", "col", "weight"])
        self.assertEqual(len(rows), 1 + 2 * 4 * 4)
        totals = {}
        for head, row, _, weight in rows[1:]:
            totals[(head, row)] = totals.get((head, row), 0.0) + float(weight)
        for total in totals.values():
            self.assertAlmostEqual(total, 1.0, places=9)

    def test_bench(self):
        """
        Test bench: số FLOP tăng theo T_p, thời gian dương
        """
        code, rows = self.run_main("bench", "--config", self.config, "--lengths", "4,8,16",
                                   "--repeats", 2, "--warmup", 1)
        self.assertEqual(code, 0)
        self.assertEqual(rows[0], ["t_p", "samples", "median_seconds", "flops"])
        self.assertEqual([int(row[1]) for row in rows[1:]], [40, 80, 160])
        flops = [int(row[3]) for row in rows[1:]]
        self.assertTrue(flops[0] < flops[1] < flops[2])
        self.assertTrue(all(float(row[2]) > 0 for row in rows[1:]))

    @unittest.skipUnless(os.environ.get("NAKUL_SLOW_TESTS"), "Đo thời gian chạy lâu")
    def test_bench_time_grows_near_linearithmic(self):
        """
        Test thời gian suy luận T_p=2048 chậm hơn T_p=256 dưới 12 lần
        """
        code, rows = self.run_main("bench", "--config", self.config, "--lengths", "256,2048",
                                   "--repeats", 5, "--warmup", 2)
        self.assertEqual(code, 0)
        self.assertLess(float(rows[2][2]) / float(rows[1][2]), 12.0)

    def test_config_help_names_layout_default(self):
        """
        Test --help của lệnh train nêu bố trí điện cực mặc định layout_radius=0.06 m
        """
        output = io.StringIO()
        with redirect_stdout(output), self.assertRaises(SystemExit) as context:
            main(["train", "--help"])
        self.assertEqual(context.exception.code, 0)
        self.assertIn("layout_radius=0.06", output.getvalue())
        self.assertIn("radius=0.05", output.getvalue())

    def test_bench_rejects_bad_arguments(self):
        """
        Test bench với repeats = 0 trả về mã thoát 2
        """
        self.assertEqual(self.run_main("bench", "--config", self.config, "--lengths", "4", "--repeats", 0)[0], 2)


if __name__ == '__main__':
    unittest.main()
