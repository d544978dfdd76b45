import unittest
import sys
import os

import numpy as np

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core_logic import tensor_engine as te
from core_logic.dynamic_branch import (DynamicBranch, batch_statistics, dynamic_mix, normalized_statistics,
                                       predict_weights, spectral_entropy, temporal_variance)
from core_logic.errors import ShapeError
from core_logic.tensor_engine import Tensor


class TestDynamicBranch(unittest.TestCase):
    def setUp(self):
        """
        Thiết lập nhánh động với 4 nhân (3, 5, 7, 11)
        """
        self.rng = np.random.default_rng(21)
        self.sizes = (3, 5, 7, 11)
        self.branch = DynamicBranch(self.rng, 4, self.sizes)

    def test_kernel_weights_on_simplex(self):
        """
        Test α là phân bố xác suất cho đầu vào vô hướng và theo batch
        """
        single = predict_weights(self.branch.meta, 1.5, 0.7).data
        self.assertEqual(single.shape, (4,))
        self.assertAlmostEqual(single.sum(), 1.0, places=12)
        self.assertTrue(np.all(single >= 0))

        batch = predict_weights(self.branch.meta, self.rng.uniform(0, 3, 5), self.rng.uniform(0, 1, 5)).data
        self.assertEqual(batch.shape, (5, 4))
        np.testing.assert_allclose(batch.sum(axis=1), np.ones(5), atol=1e-12)

    def test_kernel_initialization_from_ssm(self):
        """
        Test nhân khởi tạo từ SSM vô hướng Ā=0.7: phần tử cuối (độ trễ 0) bằng 1, giảm theo 0.7^trễ
        """
        branch = DynamicBranch(self.rng, 2, (5,), noise=0.0)
        kernel = branch.bank.kernels[0].data
        np.testing.assert_allclose(kernel[:, 0], 0.7 ** np.arange(5)[::-1], atol=1e-12)
        np.testing.assert_array_equal(kernel[:, 0], kernel[:, 1])

    def test_statistics_of_zero_signal(self):
        """
        Test tín hiệu toàn 0: phương sai 0 và entropy 0
        """
        variance, entropy = batch_statistics(np.zeros((2, 16, 3)))
        np.testing.assert_array_equal(variance.data, np.zeros(2))
        np.testing.assert_array_equal(entropy.data, np.zeros(2))

    def test_variance_matches_numpy(self):
        """
        Test phương sai theo thời gian khớp np.var trên toàn bộ phần tử
        """
        x = self.rng.standard_normal((32, 3)) * 2.0 + 1.0
        self.assertAlmostEqual(temporal_variance(x), float(np.var(x)), places=12)

    def test_entropy_tone_lower_than_noise(self):
        """
        Test entropy phổ của sóng sin thấp hơn nhiều so với nhiễu trắng
        """
        t = np.arange(128)
        tone = np.sin(2 * np.pi * 8 * t / 128)[:, None]
        noise = self.rng.standard_normal((128, 1))
        self.assertLess(spectral_entropy(tone), 0.1)
        self.assertGreater(spectral_entropy(noise), 0.8 * np.log(65))

    def test_normalized_statistics(self):
        """
        Test chuẩn hóa cố định log(1 + phương sai), entropy / ln F
        """
        stats = normalized_statistics(te.constant([3.0]), te.constant([np.log(9.0)]), 16).data
        self.assertAlmostEqual(stats[0, 0], np.log(4.0), places=12)
        self.assertAlmostEqual(stats[0, 1], 1.0, places=12)

    def test_one_hot_weights_select_single_kernel(self):
        """
        Test α one-hot cho đúng tích chập của một nhân nhân với cổng
        """
        x = self.rng.standard_normal((2, 20, 4))
        out = dynamic_mix(self.branch.bank, self.branch.meta, x, weights_override=[0.0, 1.0, 0.0, 0.0]).data
        kernel = self.branch.bank.kernels[1]
        expected = te.depthwise_causal_conv(x, kernel).data * te.sigmoid(x @ self.branch.bank.W_gate.data).data
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_fixed_kernels_use_uniform_weights(self):
        """
        Test chế độ fixed_kernels dùng trọng số đều 1/M
        """
        branch = DynamicBranch(self.rng, 4, self.sizes, fixed_kernels=True)
        branch(Tensor(self.rng.standard_normal((3, 20, 4))))
        np.testing.assert_allclose(branch.last_kernel_weights, np.full((3, 4), 0.25))

    def test_statistics_are_per_sample(self):
        """
        Test đầu ra của một mẫu không phụ thuộc các mẫu khác trong batch
        """
        x = self.rng.standard_normal((3, 20, 4))
        alone = self.branch(Tensor(x[:1])).data
        together = self.branch(Tensor(x)).data
        np.testing.assert_allclose(together[:1], alone, atol=1e-12)
        self.assertEqual(self.branch.last_statistics.shape, (3, 2))

    def test_causality(self):
        """
        Test đầu ra tại t không phụ thuộc đầu vào sau t khi cố định α
        """
        x = self.rng.standard_normal((1, 20, 4))
        changed = x.copy()
        changed[:, 15:, :] += 5.0
        weights = [0.25, 0.25, 0.25, 0.25]
        first = dynamic_mix(self.branch.bank, self.branch.meta, x, weights).data
        second = dynamic_mix(self.branch.bank, self.branch.meta, changed, weights).data
        np.testing.assert_allclose(first[:, :15], second[:, :15], atol=1e-12)

    def test_time_reversal_keeps_kernel_weights(self):
        """
        Test đảo ngược thời gian giữ nguyên phương sai và phổ biên độ nên α không đổi
        """
        x = self.rng.standard_normal((3, 24, 4))
        self.branch(Tensor(x))
        forward = self.branch.last_kernel_weights.copy()
        forward_stats = self.branch.last_statistics.copy()
        self.branch(Tensor(x[:, ::-1, :].copy()))
        np.testing.assert_allclose(self.branch.last_statistics, forward_stats, atol=1e-10)
        np.testing.assert_allclose(self.branch.last_kernel_weights, forward, atol=1e-10)
        np.testing.assert_array_equal(np.argmax(self.branch.last_kernel_weights, axis=1), np.argmax(forward, axis=1))

    def test_feature_permutation_equivariance(self):
        """
        Test hoán vị đặc trưng (cùng cột nhân và hàng/cột W_gate) hoán vị đầu ra tương ứng
        """
        branch = DynamicBranch(np.random.default_rng(5), 4, self.sizes)
        permuted = DynamicBranch(np.random.default_rng(5), 4, self.sizes)
        order = np.array([2, 0, 3, 1])
        for source, target in zip(branch.bank.kernels, permuted.bank.kernels):
            target.data = source.data[:, order]
        permuted.bank.W_gate.data = branch.bank.W_gate.data[order][:, order]
        x = self.rng.standard_normal((2, 20, 4))
        out = dynamic_mix(branch.bank, branch.meta, x).data
        permuted_out = dynamic_mix(permuted.bank, permuted.meta, x[:, :, order]).data
        np.testing.assert_allclose(permuted_out, out[:, :, order], atol=1e-12)

    def test_saturated_gate_passes_input_through(self):
        """
        Test nhân đơn vị tại độ trễ 0 và W_gate chéo dương lớn: cổng bão hòa, đầu ra xấp xỉ x
        """
        branch = DynamicBranch(self.rng, 4, self.sizes)
        for kernel in branch.bank.kernels:
            identity = np.zeros_like(kernel.data)
            identity[-1] = 1.0
            kernel.data = identity
        branch.bank.W_gate.data = 50.0 * np.eye(4)
        x = self.rng.uniform(0.5, 2.0, size=(2, 20, 4))
        out = dynamic_mix(branch.bank, branch.meta, x).data
        np.testing.assert_allclose(out, x, atol=1e-3)

    def test_shape_mismatch(self):
        """
        Test số đặc trưng không khớp W_gate
        """
        with self.assertRaises(ShapeError):
            dynamic_mix(self.branch.bank, self.branch.meta, np.zeros((1, 10, 5)))


if __name__ == '__main__':
    unittest.main()
