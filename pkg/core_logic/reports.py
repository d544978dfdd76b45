#Tạo báo cáo đánh giá phân loại

from typing import Any, Dict, List, Sequence

import numpy as np


class ReportGenerator:
    """Class tạo báo cáo đánh giá: accuracy, precision/recall/F1 từng lớp, macro-F1, ma trận nhầm lẫn"""

    def __init__(self, labels: Sequence[int], predictions: Sequence[int], n_classes: int):
        self.labels = np.asarray(labels, dtype=np.int64)
        self.predictions = np.asarray(predictions, dtype=np.int64)
        self.n_classes = n_classes

    def confusion_matrix(self) -> np.ndarray:
        """Hàng là nhãn thật, cột là nhãn dự đoán"""
        matrix = np.zeros((self.n_classes, self.n_classes), dtype=np.int64)
        np.add.at(matrix, (self.labels, self.predictions), 1)
        return matrix

    def get_class_report(self) -> List[Dict[str, Any]]:
        """
        Precision, recall, F1 của từng lớp (0 khi mẫu số bằng 0)

        Returns:
            List[Dict]: Mỗi lớp một dictionary
        """
        matrix = self.confusion_matrix()
        rows = []
        for label in range(self.n_classes):
            true_positive = matrix[label, label]
            predicted = matrix[:, label].sum()
            support = matrix[label, :].sum()
            precision = true_positive / predicted if predicted else 0.0
            recall = true_positive / support if support else 0.0
            f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
            rows.append({
                "class": label,
                "precision": float(precision),
                "recall": float(recall),
                "f1": float(f1),
                "support": int(support),
            })
        return rows

    def get_summary(self) -> Dict[str, float]:
        """Accuracy và macro-F1"""
        accuracy = float(np.mean(self.labels == self.predictions)) if self.labels.size else 0.0
        macro_f1 = float(np.mean([row["f1"] for row in self.get_class_report()]))
        return {"accuracy": accuracy, "macro_f1": macro_f1}

    def get_csv_blocks(self) -> List[List[List[Any]]]:
        """Ba khối CSV: tổng quan, từng lớp, ma trận nhầm lẫn"""
        summary = self.get_summary()
        summary_block = [["metric", "value"]] + [[name, repr(value)] for name, value in summary.items()]
        class_block = [["class", "precision", "recall", "f1", "support"]]
        for row in self.get_class_report():
            class_block.append([row["class"], repr(row["precision"]), repr(row["recall"]),
                                repr(row["f1"]), row["support"]])
        matrix = self.confusion_matrix()
        confusion_block = [["true\\pred"] + [f"pred_{label}" for label in range(self.n_classes)]]
        for label in range(self.n_classes):
            confusion_block.append([f"true_{label}"] + matrix[label].tolist())
        return [summary_block, class_block, confusion_block]
