#Xử lý việc lưu trữ và đọc file dữ liệu

import csv
import logging
from pathlib import Path
from typing import Any, Iterable, List, Sequence, TextIO, Tuple

import numpy as np

from config import CSV_CONFIG, PATH_CONFIG
from core_logic.errors import ArtifactError, ConfigError
from core_logic.models import Trial

logger = logging.getLogger(__name__)


class FileHandler:
    """Class xử lý việc lưu trữ và đọc file dữ liệu (trial, nhãn, metrics, tọa độ điện cực)"""

    def __init__(self):
        self.encoding = CSV_CONFIG["encoding"]
        self.delimiter = CSV_CONFIG["delimiter"]

    # ----- Trial -----
    def write_trial(self, path: Path, trial: Trial) -> None:
        """
        Ghi một trial: dòng đầu `# channels=C samples=T rate=R label=L`, sau đó C dòng giá trị

        Args:
            path: Đường dẫn file
            trial: Trial cần ghi
        """
        lines = [f"# channels={trial.channels} samples={trial.samples} rate={trial.rate:g} label={trial.label}"]
        for row in trial.signal:
            lines.append(self.delimiter.join(repr(float(value)) for value in row))
        with open(path, "w", encoding=self.encoding, newline="\n") as file:
            file.write("\n".join(lines) + "\n")

    def read_trial(self, path: Path) -> Trial:
        """
        Đọc một trial

        Returns:
            Trial
        """
        path = Path(path)
        try:
            with open(path, "r", encoding=self.encoding) as file:
                header = file.readline().strip()
                fields = dict(item.split("=", 1) for item in header.lstrip("#").split())
                channels, samples = int(fields["channels"]), int(fields["samples"])
                rows = [[float(value) for value in line.split(self.delimiter)]
                        for line in file if line.strip()]
            signal = np.array(rows, dtype=np.float64)
            if signal.shape != (channels, samples):
                raise ArtifactError(f"{path.name}: kích thước {signal.shape} khác header ({channels}, {samples})")
            return Trial(signal, int(fields["label"]), float(fields["rate"]), path.name)
        except ArtifactError:
            raise
        except (OSError, KeyError, ValueError) as e:
            raise ArtifactError(f"Lỗi khi đọc trial {path}: {e}") from e

    # ----- Tập dữ liệu -----
    def save_dataset(self, trials: Sequence[Trial], out_dir, manifest_lines: Iterable[str] = ()) -> Path:
        """Ghi toàn bộ trial, labels.csv và manifest.txt vào out_dir"""
        out_dir = Path(out_dir)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            for trial in trials:
                self.write_trial(out_dir / trial.filename, trial)
            with open(out_dir / PATH_CONFIG["labels_file"], "w", newline="", encoding=self.encoding) as file:
                writer = csv.writer(file, delimiter=self.delimiter, lineterminator="\n")
                writer.writerow(CSV_CONFIG["labels_header"])
                for trial in trials:
                    writer.writerow([trial.filename, trial.label])
            with open(out_dir / PATH_CONFIG["manifest_file"], "w", encoding=self.encoding, newline="\n") as file:
                file.write("\n".join(manifest_lines) + "\n")
        except OSError as e:
            raise ArtifactError(f"Lỗi khi ghi tập dữ liệu vào {out_dir}: {e}") from e
        logger.info("Đã ghi %d trial vào %s", len(trials), out_dir)
        return out_dir

    def load_dataset(self, data_dir) -> List[Trial]:
        """
        Tải tập dữ liệu theo labels.csv

        Returns:
            List[Trial]: Theo thứ tự trong labels.csv
        """
        data_dir = Path(data_dir)
        labels_path = data_dir / PATH_CONFIG["labels_file"]
        try:
            with open(labels_path, "r", newline="", encoding=self.encoding) as file:
                reader = csv.DictReader(file, delimiter=self.delimiter)
                entries = [(row["filename"], int(row["label"])) for row in reader]
        except (OSError, KeyError, ValueError) as e:
            raise ArtifactError(f"Lỗi khi đọc {labels_path}: {e}") from e
        if not entries:
            raise ArtifactError(f"{labels_path} không có trial nào")
        trials = []
        for filename, label in entries:
            trial = self.read_trial(data_dir / filename)
            if trial.label != label:
                raise ArtifactError(f"{filename}: nhãn {trial.label} khác labels.csv ({label})")
            trials.append(trial)
        shapes = {trial.signal.shape for trial in trials}
        if len(shapes) != 1:
            raise ArtifactError(f"Các trial có kích thước khác nhau: {sorted(shapes)}")
        return trials

    # ----- Metrics -----
    def create_metrics_file(self, path) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="", encoding=self.encoding) as file:
                csv.writer(file, delimiter=self.delimiter, lineterminator="\n").writerow(CSV_CONFIG["metrics_header"])
        except OSError as e:
            raise ArtifactError(f"Lỗi khi tạo file metrics {path}: {e}") from e
        return path

    def append_metrics_row(self, path, row: dict) -> None:
        values = [int(row["epoch"])] + [repr(float(row[name])) for name in CSV_CONFIG["metrics_header"][1:]]
        try:
            with open(path, "a", newline="", encoding=self.encoding) as file:
                csv.writer(file, delimiter=self.delimiter, lineterminator="\n").writerow(values)
        except OSError as e:
            raise ArtifactError(f"Lỗi khi ghi metrics {path}: {e}") from e

    def load_metrics(self, path) -> List[dict]:
        try:
            with open(path, "r", newline="", encoding=self.encoding) as file:
                return [dict(row) for row in csv.DictReader(file, delimiter=self.delimiter)]
        except OSError as e:
            raise ArtifactError(f"Lỗi khi đọc metrics {path}: {e}") from e

    # ----- Tọa độ điện cực -----
    def read_positions(self, path) -> Tuple[List[str], np.ndarray]:
        """
        Đọc file tọa độ: mỗi dòng `name x y z` (mét), bỏ qua dòng bắt đầu bằng #

        Returns:
            Tuple: (tên kênh, tọa độ (C, 3))
        """
        names, coordinates = [], []
        try:
            with open(path, "r", encoding=self.encoding) as file:
                for number, line in enumerate(file, start=1):
                    stripped = line.strip()
                    if not stripped or stripped.startswith("#"):
                        continue
                    parts = stripped.split()
                    if len(parts) != 4:
                        raise ConfigError(f"positions_file dòng {number}: cần `name x y z`")
                    names.append(parts[0])
                    coordinates.append([float(value) for value in parts[1:]])
        except OSError as e:
            raise ConfigError(f"positions_file: không đọc được {path}: {e}") from e
        except ValueError as e:
            raise ConfigError(f"positions_file: tọa độ không hợp lệ ({e})") from e
        if not coordinates:
            raise ConfigError(f"positions_file: {path} không có điện cực nào")
        return names, np.array(coordinates, dtype=np.float64)

    # ----- CSV ra luồng -----
    def write_csv(self, stream: TextIO, rows: Iterable[Sequence[Any]]) -> None:
        writer = csv.writer(stream, delimiter=self.delimiter, lineterminator="\n")
        for row in rows:
            writer.writerow(row)
