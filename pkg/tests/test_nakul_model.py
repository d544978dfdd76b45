import unittest
import sys
import os
from dataclasses import replace

import numpy as np

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core_logic import tensor_engine as te
from core_logic.errors import ShapeError
from core_logic.graph_branch import build_graph, circle_positions
from core_logic.nakul_model import (ModelConfig, NakulModel, block_forward, count_flops, embed,
                                    zero_mixing_parameters, zscore_channels)
from core_logic.tensor_engine import SeedStreams, Tensor


def small_config(**overrides):
    config = ModelConfig(d_model=8, n_blocks=2, n_heads=2, kernel_sizes=(3, 5), k_top=4, ffn_hidden=16,
                         head_hidden=8, patch_size=10, channels=4, length=40, rate=100.0, classes=3,
                         band_centers=(5.0, 10.0, 20.0, 30.0), band_sigma=3.0)
    return replace(config, **overrides)


class TestNakulModel(unittest.TestCase):
    def setUp(self):
        """
        Thiết lập mô hình nhỏ 4 kênh, 2 khối
        """
        self.rng = np.random.default_rng(11)
        self.config = small_config()
        self.graph = build_graph(circle_positions(4, 0.03), 0.05)
        self.model = NakulModel(np.random.default_rng(0), self.config).eval()

    def test_forward_shape(self):
        """
        Test logits có kích thước (B, n_classes) và hữu hạn
        """
        logits = self.model(self.rng.standard_normal((3, 4, 40)), self.graph)
        self.assertEqual(logits.shape, (3, 3))
        self.assertTrue(np.all(np.isfinite(logits.data)))

    def test_last_patch_is_zero_padded(self):
        """
        Test T không chia hết cho P: T_p = ceil(T/P)
        """
        config = small_config(length=35)
        self.assertEqual(config.tokens, 4)
        model = NakulModel(np.random.default_rng(0), config)
        self.assertEqual(embed(model, self.rng.standard_normal((2, 4, 35))).shape, (2, 4, 4, 8))

    def test_fusion_weights_on_simplex(self):
        """
        Test trọng số hợp nhất là phân bố trên ba nhánh
        """
        for block in self.model.blocks:
            weights = block.fusion_weights().data
            self.assertAlmostEqual(weights.sum(), 1.0, places=12)
            np.testing.assert_allclose(weights, np.full(3, 1.0 / 3.0))

    def test_disabled_branches_get_zero_weight(self):
        """
        Test chỉ bật nhánh phổ: trọng số hợp nhất [1, 0, 0]
        """
        model = NakulModel(np.random.default_rng(0), small_config(branches=("spectral",)))
        block = model.blocks[0]
        self.assertIsNone(block.dynamic)
        self.assertIsNone(block.graph)
        np.testing.assert_allclose(block.fusion_weights().data, [1.0, 0.0, 0.0])
        self.assertEqual(model(self.rng.standard_normal((2, 4, 40)), self.graph).shape, (2, 3))

        pair = NakulModel(np.random.default_rng(0), small_config(branches=("graph", "dynamic")))
        np.testing.assert_allclose(pair.blocks[0].fusion_weights().data, [0.0, 0.5, 0.5])

    def test_no_branches_rejected(self):
        """
        Test cấu hình không bật nhánh nào
        """
        with self.assertRaises(ShapeError):
            small_config(branches=())

    def test_heads_must_divide_width(self):
        """
        Test n_heads không chia hết d_model
        """
        with self.assertRaises(ShapeError):
            small_config(n_heads=3)

    def test_zero_mixing_gives_identity_blocks(self):
        """
        Test đặt 0 tham số trộn: 6 khối xếp chồng là ánh xạ đồng nhất
        """
        model = NakulModel(np.random.default_rng(1), small_config(n_blocks=6))
        zero_mixing_parameters(model)
        hidden = Tensor(self.rng.standard_normal((2, 4, 4, 8)))
        out = hidden
        for block in model.blocks:
            out = block_forward(block, out, self.graph)
        np.testing.assert_allclose(out.data, hidden.data, atol=1e-12)

    def test_saturated_fusion_logits_select_one_branch(self):
        """
        Test logits hợp nhất (50, −50, −50): đầu ra khối trùng với ép w = (1, 0, 0)
        """
        block = self.model.blocks[0]
        hidden = self.rng.standard_normal((2, 4, 4, 8))
        block.fusion_logits.data = np.array([50.0, -50.0, -50.0])
        saturated = block_forward(block, hidden, self.graph).data
        block.fusion_override = np.array([1.0, 0.0, 0.0])
        forced = block_forward(block, hidden, self.graph).data
        block.fusion_override = None
        block.fusion_logits.data = np.zeros(3)
        np.testing.assert_allclose(saturated, forced, rtol=0, atol=1e-6)

    def test_branch_axes_are_separate(self):
        """
        Test nhánh đồ thị chỉ trộn theo C (cùng patch), nhánh phổ và động chỉ trộn theo T_p (cùng kênh)
        """
        hidden = self.rng.standard_normal((1, 4, 4, 8))
        changed = hidden.copy()
        changed[0, 1, 2, :] += 1.0

        graph_only = NakulModel(np.random.default_rng(2), small_config(branches=("graph",))).eval()
        diff = np.abs(block_forward(graph_only.blocks[0], changed, self.graph).data
                      - block_forward(graph_only.blocks[0], hidden, self.graph).data).max(axis=-1)
        outside = np.ones((4, 4), dtype=bool)
        outside[:, 2] = False
        self.assertLess(diff[0][outside].max(), 1e-12)
        self.assertTrue(np.all(diff[0][:, 2] > 1e-9))

        sequence_only = NakulModel(np.random.default_rng(2), small_config(branches=("spectral", "dynamic"))).eval()
        diff = np.abs(block_forward(sequence_only.blocks[0], changed, self.graph).data
                      - block_forward(sequence_only.blocks[0], hidden, self.graph).data).max(axis=-1)
        outside = np.ones((4, 4), dtype=bool)
        outside[1, :] = False
        self.assertLess(diff[0][outside].max(), 1e-12)
        self.assertGreater(diff[0][1].max(), 1e-9)

    def test_flop_count_matches_counter(self):
        """
        Test số FLOP giải tích bằng đúng số nhân-cộng đếm khi chạy thật
        """
        x = self.rng.standard_normal((2, 4, 40))
        with te.no_grad(), te.count_macs() as counter:
            self.model(x, self.graph)
        self.assertEqual(count_flops(self.model, x.shape)["total"], counter.total)

    def test_flops_grow_with_length(self):
        """
        Test số FLOP tăng theo độ dài tín hiệu
        """
        totals = []
        for tokens in (4, 8, 16):
            model = NakulModel(np.random.default_rng(0), small_config(length=10 * tokens))
            totals.append(count_flops(model, (1, 4, 10 * tokens))["total"])
        self.assertLess(totals[0], totals[1])
        self.assertLess(totals[1], totals[2])

    def test_channel_mismatch(self):
        """
        Test số kênh đầu vào khác đồ thị
        """
        with self.assertRaises(ShapeError):
            self.model(np.zeros((1, 5, 40)), self.graph)

    def test_length_mismatch(self):
        """
        Test số patch khác nhúng vị trí
        """
        with self.assertRaises(ShapeError):
            self.model(np.zeros((1, 4, 80)), self.graph)

    def test_deterministic_initialization(self):
        """
        Test cùng seed cho cùng tham số
        """
        first = NakulModel(SeedStreams(7).generator("init"), self.config).state_dict()
        second = NakulModel(SeedStreams(7).generator("init"), self.config).state_dict()
        self.assertEqual(list(first), list(second))
        for name in first:
            np.testing.assert_array_equal(first[name], second[name])

    def test_eval_mode_is_deterministic(self):
        """
        Test chế độ eval không dùng dropout: hai lần chạy cho cùng kết quả
        """
        x = self.rng.standard_normal((2, 4, 40))
        first = self.model(x, self.graph, np.random.default_rng(1)).data
        second = self.model(x, self.graph, np.random.default_rng(2)).data
        np.testing.assert_array_equal(first, second)

    def test_normalized_input_skips_zscore(self):
        """
        Test normalized=True bỏ qua z-score: hệ số biên độ chỉ có tác dụng khi đầu vào đã chuẩn hóa
        """
        x = self.rng.standard_normal((2, 4, 40))
        plain = self.model(x, self.graph).data
        np.testing.assert_allclose(self.model(1.1 * x, self.graph).data, plain, atol=1e-10)
        normalized = zscore_channels(x)
        np.testing.assert_allclose(self.model(normalized, self.graph, normalized=True).data, plain, atol=1e-12)
        scaled = self.model(1.1 * normalized, self.graph, normalized=True).data
        self.assertGreater(np.abs(scaled - plain).max(), 1e-9)

    def test_zscore_channels(self):
        """
        Test z-score từng kênh; kênh hằng chỉ được trừ trung bình
        """
        x = self.rng.standard_normal((2, 3, 50)) * 4.0 + 2.0
        x[0, 1] = 5.0
        normalized = zscore_channels(x)
        np.testing.assert_allclose(normalized.mean(axis=-1), np.zeros((2, 3)), atol=1e-12)
        np.testing.assert_array_equal(normalized[0, 1], np.zeros(50))
        self.assertAlmostEqual(normalized[1, 2].std(), 1.0, places=12)


if __name__ == '__main__':
    unittest.main()
