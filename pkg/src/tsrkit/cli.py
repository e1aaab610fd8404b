import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from . import __version__
from .errors import TsrKitError
from .parsers.docx_parser import read_docx_grids
from .parsers.docx_writer import write_grid_to_docx
from .parsers.html_table import grid_to_html, html_from_string, html_to_grid, html_to_string
from .parsers.otsl import grid_to_otsl, otsl_parse, otsl_to_grid
from .pointer.diagnostics import all_ones_breakdown, loss_report
from .pointer.layout import Temperature
from .pointer.layout_filter import SELECTIVE_IOU, FilterParams
from .pointer.losses import LossWeights
from .pointer.pipeline import evaluate_watermark_corpus, run_pointer_pipeline
from .schemas import TableGrid
from .scoring.teds import TedsScorer, teds, teds_struct
from .synth.corpus import CorpusConfig, generate_corpus
from .synth.corpus_io import corpus_digest, read_corpus, write_corpus
from .synth.oracle import DEFAULT_MARGIN, oracle_features, oracle_filter_params, with_oracle_features
from .synth.watermarks import WatermarkConfig

logger = logging.getLogger("tsrkit")

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2


class _MissingInput(Exception):
    pass


def _load_env_file() -> None:
    """从当前目录或项目根目录读取 .env，不覆盖已存在的环境变量。
    支持 KEY=VALUE 与 export KEY=VALUE，# 开头为注释。
    """
    candidates = [
        Path.cwd() / ".env",
        Path(__file__).resolve().parents[2] / ".env",
    ]
    for env_path in candidates:
        if not env_path.is_file():
            continue
        try:
            lines = env_path.read_text(encoding="utf-8").splitlines()
        except OSError:
            return
        for raw in lines:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("export "):
                line = line[len("export "):].strip()
            if "=" not in line:
                continue
            key, value = line.split("=", 1)
            key = key.strip()
            value = value.strip().strip('"').strip("'")
            if key and key not in os.environ:
                os.environ[key] = value
        # 只读第一个存在的 .env
        break


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"不是整数: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"必须 >= 1，得到 {value}")
    return value


def _apply_env_defaults(args: argparse.Namespace) -> None:
    """环境变量只提供不影响输出内容的默认值：
      - TSRKIT_LOG_LEVEL
      - TSRKIT_N_JOBS
    """
    env = os.environ
    if hasattr(args, "n_jobs") and args.n_jobs is None:
        raw = env.get("TSRKIT_N_JOBS", "").strip()
        args.n_jobs = int(raw) if raw.isdigit() and int(raw) > 0 else 1


def _configure_logging(verbose: int) -> None:
    if verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = getattr(logging, os.environ.get("TSRKIT_LOG_LEVEL", "WARNING").upper(), logging.WARNING)
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s")


def _ok(message: str) -> None:
    print(f"✅ {message}", file=sys.stderr)


def _warn(message: str) -> None:
    print(f"⚠️ {message}", file=sys.stderr)


def _fail(message: str) -> None:
    print(f"❌ {message}", file=sys.stderr)


def _emit_json(obj: Any) -> None:
    print(json.dumps(obj, ensure_ascii=False, indent=2))


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise _MissingInput(f"找不到输入文件: {p}")
    return p


def _read_text(path: str) -> str:
    return _require_file(path).read_text(encoding="utf-8")


def _write_text(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
        _ok(f"已写出: {out}")
    else:
        sys.stdout.write(text)


# ---- convert ----

def _load_grid(args: argparse.Namespace) -> TableGrid:
    if args.src == "otsl":
        return otsl_to_grid(otsl_parse(_read_text(args.input)))
    if args.src == "html":
        return html_to_grid(html_from_string(_read_text(args.input), with_content=not args.structure_only))
    grids = read_docx_grids(_require_file(args.input))
    if not 0 <= args.table_index < len(grids):
        raise TsrKitError(f"文档中只有 {len(grids)} 个表格，无法选择第 {args.table_index} 个")
    grid = grids[args.table_index]
    return grid.structure() if args.structure_only else grid


def _cmd_convert(args: argparse.Namespace) -> int:
    grid = _load_grid(args)
    if args.dst == "otsl":
        _write_text(grid_to_otsl(grid).to_text() + "\n", args.out)
    elif args.dst == "html":
        has_content = any(c.content is not None or c.is_empty for c in grid.cells)
        _write_text(html_to_string(grid_to_html(grid, include_content=has_content)) + "\n", args.out)
    else:
        if not args.out:
            _fail("--to docx 需要 --out")
            return EXIT_USAGE
        write_grid_to_docx(grid, Path(args.out))
        _ok(f"已写出 DOCX: {args.out}")
    return EXIT_OK


# ---- score ----

def _read_pairs(path: str) -> List[Sequence[str]]:
    pairs = []
    for line_no, line in enumerate(_read_text(path).splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            pairs.append((obj.get("pred") or "", obj["gt"]))
        except (json.JSONDecodeError, KeyError, AttributeError) as e:
            raise TsrKitError(f"{path} 第 {line_no} 行不是合法的 {{pred, gt}} 对象: {e}") from e
    return pairs


def _cmd_score(args: argparse.Namespace) -> int:
    key = "teds_struct" if args.struct_only else "teds"
    if args.pairs:
        scorer = TedsScorer(structure_only=args.struct_only, n_jobs=args.n_jobs)
        scores = scorer.batch_evaluate(_read_pairs(args.pairs))
        mean = sum(scores) / len(scores) if scores else 0.0
        _emit_json({key: scores, "mean": mean, "n": len(scores)})
        return EXIT_OK
    if not (args.pred and args.gt):
        _fail("请提供 --pred 与 --gt，或使用 --pairs")
        return EXIT_USAGE
    pred = html_from_string(_read_text(args.pred))
    gt = html_from_string(_read_text(args.gt))
    value = teds_struct(pred, gt) if args.struct_only else teds(pred, gt)
    _emit_json({key: value})
    return EXIT_OK


# ---- gen ----

def _cmd_gen(args: argparse.Namespace) -> int:
    config = CorpusConfig(
        seed=args.seed,
        n_samples=args.n,
        max_rows=args.max_rows,
        max_cols=args.max_cols,
        span_probability=args.span_prob,
        max_span=args.max_span,
        empty_cell_probability=args.empty_prob,
        watermark=WatermarkConfig(enabled=args.watermark_prob > 0, probability=args.watermark_prob,
                                  min_iou=args.min_iou),
        feature_dim=args.feature_dim,
        box_slots=args.box_slots,
    )
    samples = generate_corpus(config, n_jobs=args.n_jobs)
    if args.with_features:
        samples = [with_oracle_features(s, _oracle_dim(s, config.feature_dim), args.margin) for s in samples]
    n = write_corpus(Path(args.out), samples)
    digest = corpus_digest(Path(args.out))
    _ok(f"已生成 {n} 个样本: {args.out}")
    _emit_json({"out": args.out, "n_samples": n, "sha256": digest})
    return EXIT_OK


# ---- assemble / eval-losses / filter-eval ----

def _select(samples: List[Any], index: Optional[int]) -> List[Any]:
    if index is None:
        return samples
    chosen = [s for s in samples if s.index == index]
    if not chosen:
        raise TsrKitError(f"语料中没有 index={index} 的样本")
    return chosen


def _oracle_dim(sample: Any, feature_dim: int) -> int:
    return max(feature_dim, len(sample.data_tags) + 2)


def _cmd_assemble(args: argparse.Namespace) -> int:
    samples = _select(read_corpus(_require_file(args.corpus)), args.index)
    tau = Temperature(args.tau)
    results: List[Dict[str, Any]] = []
    for sample in samples:
        features = sample.features
        if features is None:
            features = oracle_features(sample, _oracle_dim(sample, args.feature_dim), args.margin, tau)
        params = oracle_filter_params(features.dim) if args.filter == "oracle" else None
        result = run_pointer_pipeline(sample, features, tau, params)
        gt = sample.html_gt
        results.append({
            "index": sample.index,
            "html": html_to_string(result.tree),
            "assignment": result.assignment.to_json_obj(),
            "teds": teds(result.tree, gt),
            "teds_struct": teds_struct(result.tree, gt),
        })
    n = len(results)
    _emit_json({
        "results": results,
        "mean_teds": sum(r["teds"] for r in results) / n if n else 0.0,
        "mean_teds_struct": sum(r["teds_struct"] for r in results) / n if n else 0.0,
    })
    return EXIT_OK


def _cmd_eval_losses(args: argparse.Namespace) -> int:
    weights = LossWeights.from_sequence(args.weights) if args.weights else LossWeights()
    if args.all_ones:
        _emit_json(all_ones_breakdown(weights).to_json_obj())
        return EXIT_OK
    if not args.corpus:
        _fail("请提供 --corpus，或使用 --all-ones")
        return EXIT_USAGE
    samples = _select(read_corpus(_require_file(args.corpus)), args.index)
    reports = [loss_report(s, seed=args.seed, weights=weights, tau=Temperature(args.tau)).to_json_obj()
               for s in samples]
    worst = max((r["max_gradient_rel_error"] for r in reports), default=0.0)
    if worst >= args.grad_tol:
        _warn(f"梯度相对误差 {worst:.3e} 超过阈值 {args.grad_tol:.0e}")
    _emit_json({"reports": reports, "max_gradient_rel_error": worst})
    return EXIT_OK


def _cmd_filter_eval(args: argparse.Namespace) -> int:
    samples = read_corpus(_require_file(args.corpus))
    params = None
    if args.params:
        params = FilterParams.from_json_obj(json.loads(_read_text(args.params)))
    report = evaluate_watermark_corpus(samples, params, args.iou, args.feature_dim, args.margin, Temperature(args.tau))
    if report.n_distractors == 0:
        _warn("语料中没有水印干扰框，三种方法的结果将相同")
    _emit_json(report.to_json_obj())
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsrkit",
        description="tsrkit: 表格结构识别的编解码、评测与布局指针工具",
    )
    parser.add_argument("--version", action="version", version=f"tsrkit {__version__}", help="显示版本信息")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="输出更多日志（-vv 为调试级别）")
    subparsers = parser.add_subparsers(dest="command")

    convert = subparsers.add_parser("convert", help="在 OTSL / HTML / DOCX 表格表示之间转换")
    convert.add_argument("--from", dest="src", choices=["otsl", "html", "docx"], required=True, help="输入格式")
    convert.add_argument("--to", dest="dst", choices=["otsl", "html", "docx"], required=True, help="输出格式")
    convert.add_argument("--in", dest="input", required=True, help="输入文件路径")
    convert.add_argument("--out", required=False, help="输出文件路径（默认打印到标准输出；docx 必填）")
    convert.add_argument("--table-index", type=int, default=0, help="DOCX 输入时选择第几个表格（从 0 开始）")
    convert.add_argument("--structure-only", action="store_true", help="丢弃单元格文本，只保留结构")

    score = subparsers.add_parser("score", help="计算 TEDS / TEDS-Struct")
    score.add_argument("--pred", required=False, help="预测 HTML 文件")
    score.add_argument("--gt", required=False, help="真值 HTML 文件")
    score.add_argument("--pairs", required=False, help="批量模式：每行 {\"pred\": html, \"gt\": html} 的 JSON-lines 文件")
    score.add_argument("--struct-only", action="store_true", help="只比较结构（TEDS-Struct）")
    score.add_argument("--n-jobs", type=_positive_int, default=None, help="批量模式的并行进程数（默认读取 TSRKIT_N_JOBS 或 1）")

    gen = subparsers.add_parser("gen", help="生成合成表格语料（JSON-lines）")
    gen.add_argument("--seed", type=int, default=0, help="随机种子")
    gen.add_argument("--n", type=int, default=100, help="样本数")
    gen.add_argument("--max-rows", type=int, default=8, help="最大行数")
    gen.add_argument("--max-cols", type=int, default=8, help="最大列数")
    gen.add_argument("--span-prob", type=float, default=0.2, help="单元格尝试合并的概率")
    gen.add_argument("--max-span", type=int, default=4, help="最大合并跨度")
    gen.add_argument("--empty-prob", type=float, default=0.1, help="空单元格概率")
    gen.add_argument("--watermark-prob", type=float, default=0.0, help="每个文本框生成水印干扰框的概率（0 表示不加水印）")
    gen.add_argument("--min-iou", type=float, default=0.8, help="水印与原文本框的最小 IOU")
    gen.add_argument("--feature-dim", type=int, default=64, help="神谕特征维度 d")
    gen.add_argument("--box-slots", type=int, default=None, help="框序列长度 B（默认按 32 对齐自动选择）")
    gen.add_argument("--with-features", action="store_true", help="在每行中写入神谕特征")
    gen.add_argument("--margin", type=float, default=DEFAULT_MARGIN, help="神谕特征的间隔")
    gen.add_argument("--n-jobs", type=_positive_int, default=None, help="并行进程数（不影响输出内容）")
    gen.add_argument("--out", required=True, help="输出 JSON-lines 文件")

    assemble = subparsers.add_parser("assemble", help="用语料中的（或神谕）特征解析指针并组装整表 HTML")
    assemble.add_argument("--corpus", required=True, help="语料 JSON-lines 文件")
    assemble.add_argument("--index", type=int, required=False, help="只处理该 index 的样本")
    assemble.add_argument("--tau", type=float, default=0.1, help="温度 τ")
    assemble.add_argument("--filter", choices=["none", "oracle"], default="none", help="指针之前是否使用布局过滤器")
    assemble.add_argument("--feature-dim", type=int, default=64, help="样本无特征时神谕特征的维度")
    assemble.add_argument("--margin", type=float, default=DEFAULT_MARGIN, help="神谕特征的间隔")

    losses = subparsers.add_parser("eval-losses", help="计算全部损失项与梯度自检报告")
    losses.add_argument("--corpus", required=False, help="语料 JSON-lines 文件")
    losses.add_argument("--index", type=int, required=False, help="只处理该 index 的样本")
    losses.add_argument("--all-ones", action="store_true", help="所有损失分量取 1 时的加权总损失")
    losses.add_argument("--weights", type=float, nargs=5, metavar="λ", help="λ1..λ5（默认 1 1 1 0.5 0.5）")
    losses.add_argument("--seed", type=int, default=0, help="随机特征的种子")
    losses.add_argument("--tau", type=float, default=0.1, help="温度 τ")
    losses.add_argument("--grad-tol", type=float, default=1e-4, help="梯度相对误差告警阈值")

    filt = subparsers.add_parser("filter-eval", help="在水印语料上比较 greedy / selective / 过滤器")
    filt.add_argument("--corpus", required=True, help="语料 JSON-lines 文件")
    filt.add_argument("--params", required=False, help="过滤器参数 JSON（默认使用神谕参数）")
    filt.add_argument("--iou", type=float, default=SELECTIVE_IOU, help="selective 基线的 IOU 阈值")
    filt.add_argument("--tau", type=float, default=0.1, help="温度 τ")
    filt.add_argument("--feature-dim", type=int, default=None, help="样本无特征时神谕特征的维度")
    filt.add_argument("--margin", type=float, default=DEFAULT_MARGIN, help="神谕特征的间隔")
    return parser


COMMANDS = {
    "convert": _cmd_convert,
    "score": _cmd_score,
    "gen": _cmd_gen,
    "assemble": _cmd_assemble,
    "eval-losses": _cmd_eval_losses,
    "filter-eval": _cmd_filter_eval,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    # 先加载 .env，使其中的变量对后续读取生效
    _load_env_file()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    _apply_env_defaults(args)
    _configure_logging(args.verbose)

    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except _MissingInput as e:
        _fail(str(e))
        return EXIT_USAGE
    except TsrKitError as e:
        _fail(f"{type(e).__name__}: {e}")
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
