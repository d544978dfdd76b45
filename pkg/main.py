"""
NAKUL - Bộ phân loại tín hiệu đa kênh: dòng lệnh
"""

import os

# Cố định một luồng BLAS trước khi import numpy để thời gian đo ổn định
for _variable in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_variable, "1")

import argparse
import logging
import sys
from typing import List, Optional

from app_controller import AppController
from config import BENCH_CONFIG, EXIT_CODES, GRAD_CHECK_CONFIG, LOG_CONFIG, MODEL_CONFIG
from core_logic.errors import NakulError

logger = logging.getLogger("nakul")


def _int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"danh sách số nguyên không hợp lệ: {text}") from e


CONFIG_HELP = (
    "File cấu hình key=value (bỏ trống: giá trị mặc định). Không có positions_file thì điện cực "
    f"đặt đều trên đường tròn layout_radius={MODEL_CONFIG['layout_radius']:g} m (không phải 9 cm): "
    f"với 8 kênh, hai điện cực cạnh nhau cách 2·r·sin(π/8) ≈ 4.6 cm, nằm trong radius={MODEL_CONFIG['radius']:g} m"
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nakul", description="Huấn luyện và kiểm tra mô hình NAKUL")
    parser.add_argument("--log-level", default=LOG_CONFIG["level"], help="Mức log (ghi ra stderr)")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen-data", help="Sinh tập dữ liệu tổng hợp")
    gen.add_argument("--config", help=CONFIG_HELP)
    gen.add_argument("--out", required=True)
    gen.add_argument("--seed", type=int)

    train = commands.add_parser("train", help="Huấn luyện mô hình")
    train.add_argument("--config", help=CONFIG_HELP)
    train.add_argument("--data")
    train.add_argument("--out")
    train.add_argument("--epochs", type=int)
    train.add_argument("--seed", type=int)

    evaluate = commands.add_parser("eval", help="Đánh giá checkpoint trên tập dữ liệu")
    evaluate.add_argument("--ckpt", required=True)
    evaluate.add_argument("--data", required=True)

    grad = commands.add_parser("grad-check", help="Kiểm tra gradient bằng sai phân trung tâm")
    grad.add_argument("--config", help=CONFIG_HELP)
    grad.add_argument("--samples", type=int, default=GRAD_CHECK_CONFIG["samples"])
    grad.add_argument("--seed", type=int)

    bands = commands.add_parser("dump-bands", help="Xuất các băng tần đã học")
    bands.add_argument("--ckpt", required=True)
    bands.add_argument("--data")
    bands.add_argument("--block", type=int, default=0)

    kernels = commands.add_parser("dump-kernel-weights", help="Xuất trọng số nhân của từng trial")
    kernels.add_argument("--ckpt", required=True)
    kernels.add_argument("--data", required=True)
    kernels.add_argument("--block", type=int, default=0)

    attention = commands.add_parser("dump-attention", help="Xuất ma trận chú ý không gian trung bình")
    attention.add_argument("--ckpt", required=True)
    attention.add_argument("--data", required=True)
    attention.add_argument("--block", type=int, default=0)

    bench = commands.add_parser("bench", help="Đo thời gian suy luận theo độ dài")
    bench.add_argument("--config", help=CONFIG_HELP)
    bench.add_argument("--lengths", type=_int_list, default=list(BENCH_CONFIG["lengths"]))
    bench.add_argument("--repeats", type=int, default=BENCH_CONFIG["repeats"])
    bench.add_argument("--warmup", type=int, default=BENCH_CONFIG["warmup"])
    bench.add_argument("--batch", type=int, default=BENCH_CONFIG["batch"])
    bench.add_argument("--seed", type=int)
    return parser


def run_command(app: AppController, args: argparse.Namespace) -> None:
    if args.command == "gen-data":
        app.gen_data(args.config, args.out, args.seed)
    elif args.command == "train":
        app.train(args.config, args.data, args.out, args.epochs, args.seed)
    elif args.command == "eval":
        app.evaluate(args.ckpt, args.data)
    elif args.command == "grad-check":
        app.grad_check(args.config, args.samples, args.seed)
    elif args.command == "dump-bands":
        app.dump_bands(args.ckpt, args.data, args.block)
    elif args.command == "dump-kernel-weights":
        app.dump_kernel_weights(args.ckpt, args.data, args.block)
    elif args.command == "dump-attention":
        app.dump_attention(args.ckpt, args.data, args.block)
    elif args.command == "bench":
        app.bench(args.config, args.lengths, args.repeats, args.warmup, args.batch, args.seed)


def main(argv: Optional[List[str]] = None, stream=None) -> int:
    """Hàm main của ứng dụng, trả về mã thoát"""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format=LOG_CONFIG["format"], stream=sys.stderr)
    try:
        run_command(AppController(stream), args)
    except NakulError as e:
        logger.error("%s", e.message)
        return e.exit_code
    except Exception as e:
        logger.exception("Lỗi không mong đợi: %s", e)
        raise
    return EXIT_CODES["ok"]


if __name__ == "__main__":
    sys.exit(main())
