#Cấu hình cho ứng dụng

from pathlib import Path

# Đường dẫn cơ bản
BASE_DIR = Path(__file__).parent

# Cấu hình mô hình (cấu hình chính D=128, 6 khối)
MODEL_CONFIG = {
    "d_model": 128,
    "n_blocks": 6,
    "n_heads": 8,
    "n_bands": 4,
    "kernel_sizes": (3, 5, 7, 11),
    "k_top": 16,
    "state_dim": 4,
    "ffn_hidden": 512,
    "head_hidden": 64,
    "patch_size": 50,
    "dropout": 0.1,
    "drop_path": 0.1,
    "drop_edge": 0.2,
    "fusion_scale": 0.5,
    "radius": 0.05,          # mét
    "layout_radius": 0.06,   # mét; 8 điện cực cạnh nhau cách 2·r·sin(π/8) <= radius
    "band_centers": (4.0, 10.0, 20.0, 40.0),  # Hz (theta, alpha, beta, gamma)
    "band_sigma": 2.0,       # Hz
    "sigma_floor": 0.1,      # Hz
    "branches": ("spectral", "dynamic", "graph"),
    "fixed_kernels": False,
    "zscore": True,
    "meta_hidden": 16,
    "kernel_init_decay": 0.7,
    "init_noise": 0.01,
    "pos_init_std": 0.02,
}

BRANCH_NAMES = ("spectral", "dynamic", "graph")

# Cấu hình dữ liệu tổng hợp
DATA_CONFIG = {
    "channels": 8,
    "length": 1000,
    "rate": 250.0,
    "classes": 4,
    "trials_per_class": 200,
    "noise_sigma": 0.2,
    "class_bands": ((6.0,), (10.0,), (20.0,), (30.0,)),
    "class_channels": ((0, 1), (2, 3), (4, 5), (6, 7)),
}

# Cấu hình huấn luyện
TRAIN_CONFIG = {
    "lr": 1e-3,
    "weight_decay": 1e-2,
    "beta1": 0.9,
    "beta2": 0.999,
    "eps": 1e-8,
    "epochs": 200,
    "batch_size": 16,
    "warmup_fraction": 0.3,
    "final_lr": 1e-6,
    "start_divisor": 25.0,
    "label_smoothing": 0.1,
    "patience": 25,
    "seed": 0,
    "grad_clip": 1.0,
    "val_fraction": 0.2,
    "augment": True,
}

# Cấu hình tăng cường dữ liệu
AUGMENT_CONFIG = {
    "jitter_seconds": 0.05,
    "scale_range": (0.9, 1.1),
    "noise_sigma": 0.05,
}

# Đường dẫn mặc định
PATH_CONFIG = {
    "positions_file": "",
    "data_dir": "data",
    "checkpoint_out": "nakul.ckpt",
    "metrics_file": "metrics.csv",
    "labels_file": "labels.csv",
    "manifest_file": "manifest.txt",
    "trial_pattern": "trial_{index:05d}.csv",
}

# Cấu hình CSV
CSV_CONFIG = {
    "encoding": "utf-8",
    "delimiter": ",",
    "metrics_header": ["epoch", "train_loss", "val_loss", "val_acc", "lr"],
    "labels_header": ["filename", "label"],
    "bands_header": ["band_index", "mu_hz", "sigma_hz", "mean_alpha"],
    "kernel_prefix": "alpha_",
    "attention_header": ["head", "row", "col", "weight"],
    "bench_header": ["t_p", "samples", "median_seconds", "flops"],
    "grad_check_header": ["module", "max_rel_error", "samples", "worst_parameter", "passed"],
}

# Cấu hình checkpoint nhị phân
CHECKPOINT_CONFIG = {
    "magic": b"NAKL",
    "version": 1,
    "meta_prefix": "meta.",
}

# Kiểm tra gradient bằng sai phân trung tâm
GRAD_CHECK_CONFIG = {
    "step": 1e-4,
    "tolerance": 1e-3,
    "floor": 1e-4,
    "samples": 50,
}

# Đo thời gian chạy
BENCH_CONFIG = {
    "lengths": (128, 256, 512, 1024, 2048),
    "repeats": 20,
    "warmup": 5,
    "batch": 1,
}

# Mã thoát của dòng lệnh
EXIT_CODES = {
    "ok": 0,
    "config": 2,
    "training_abort": 3,
    "artifact": 4,
    "verification": 5,
}

# Cấu hình validation
VALIDATION_CONFIG = {
    "max_channels": 4096,
    "max_d_model": 4096,
    "max_kernel_size": 1024,
}

# Cấu hình logging (ghi ra stderr, stdout chỉ dành cho CSV)
LOG_CONFIG = {
    "level": "INFO",
    "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
}
