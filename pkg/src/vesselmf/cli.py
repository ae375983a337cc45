"""Batch command-line surface: dataset discovery, per-image runs, reports.

Subcommands: ``segment`` (write vessel maps and optional stage dumps),
``eval`` (metrics report against ground truth), ``roc`` (curve points and
AUC), ``sweep`` (parameter search), ``kernel dump`` (inspect the filter
bank).  Reports are byte-identical for identical configurations: data rows
carry no timestamps, and the single metadata header line only restates the
run parameters.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .image import GrayImage, load_mask
from .kernels import KernelParams, build_bank
from .metrics import auc, evaluate_pair, roc_curve
from .pnm import read_pnm, write_pnm
from .preprocess import ClaheParams, clahe, luma_grayscale, pca_grayscale
from .response import max_response, normalize_response
from .segment import (
    PipelineParams,
    binarize,
    build_histogram,
    complement,
    default_min_component_size,
    length_filter,
    apply_mask,
    otsu_threshold,
    run_pipeline,
)
from .sweep import GridSpec, SweepError, length_search, three_round_search


class DatasetError(RuntimeError):
    pass


@dataclass
class ManifestEntry:
    id: str
    image_path: Path
    fov_mask_path: Path
    ground_truth_path: Path | None = None


@dataclass
class DatasetManifest:
    entries: list

    def __len__(self):
        return len(self.entries)


@dataclass
class RunConfig:
    """One reproducible batch run; ``outputs`` is created and must be writable."""

    pipeline: PipelineParams
    dataset: DatasetManifest
    outputs: Path
    report_format: str = "csv"

    def __post_init__(self):
        if self.report_format not in ("csv", "json"):
            raise ValueError(f"unknown report format {self.report_format!r}")
        self.outputs = Path(self.outputs)
        self.outputs.mkdir(parents=True, exist_ok=True)
        if not os.access(self.outputs, os.W_OK):
            raise ValueError(f"output directory {self.outputs} not writable")
        ids = [e.id for e in self.dataset.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("dataset ids are not unique")


_IMAGE_SUFFIXES = (".ppm", ".pgm")


def _index_by_pattern(root: Path, pattern: re.Pattern) -> dict:
    found: dict[str, Path] = {}
    for path in sorted(root.rglob("*")):
        if path.suffix.lower() not in _IMAGE_SUFFIXES:
            continue
        m = pattern.match(path.name.lower())
        if m:
            found.setdefault(m.group(1), path)
    return found


def discover_dataset(root, layout: str) -> DatasetManifest:
    """Pair images with FOV masks and ground truth under a known layout.

    drive  NN_test.ppm / NN_test_mask.* / NN_manual1.*
    stare  imNNNN.ppm / imNNNN.mask.* (or imNNNN_mask.*) / imNNNN.ah.*
    flat   a manifest file of image,fov[,gt] paths (root may be the file
           itself or a directory containing manifest.csv)

    Missing FOV masks are an error naming the affected ids; missing ground
    truth just leaves the entry without one.
    """
    root = Path(root)
    if layout == "flat":
        return _discover_flat(root)
    if layout not in ("drive", "stare"):
        raise DatasetError(f"unknown layout {layout!r}")
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a directory")

    if layout == "drive":
        images = _index_by_pattern(root, re.compile(r"^(\d+_test)\.(?:ppm|pgm)$"))
        masks = _index_by_pattern(root, re.compile(r"^(\d+_test)_mask\.(?:ppm|pgm)$"))
        truths = _index_by_pattern(root, re.compile(r"^(\d+)_manual1\.(?:ppm|pgm)$"))
        truths = {f"{k}_test": v for k, v in truths.items()}
    else:
        images = _index_by_pattern(
            root, re.compile(r"^(im\d+)\.(?:ppm|pgm)$"))
        masks = _index_by_pattern(
            root, re.compile(r"^(im\d+)[._-]mask\.(?:ppm|pgm)$"))
        truths = _index_by_pattern(
            root, re.compile(r"^(im\d+)\.ah\.(?:ppm|pgm)$"))

    if not images:
        print(f"warning: no {layout} images found under {root}", file=sys.stderr)
        return DatasetManifest(entries=[])

    missing = sorted(set(images) - set(masks))
    if missing:
        raise DatasetError(f"missing FOV mask for: {', '.join(missing)}")

    entries = [
        ManifestEntry(
            id=name,
            image_path=images[name],
            fov_mask_path=masks[name],
            ground_truth_path=truths.get(name),
        )
        for name in sorted(images)
    ]
    return DatasetManifest(entries=entries)


def _discover_flat(root: Path) -> DatasetManifest:
    manifest_path = root if root.is_file() else root / "manifest.csv"
    if not manifest_path.is_file():
        raise DatasetError(f"flat layout manifest not found at {manifest_path}")
    base = manifest_path.parent
    entries = []
    seen = set()
    for line_no, raw in enumerate(manifest_path.read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) < 2:
            raise DatasetError(
                f"{manifest_path}:{line_no}: expected image,fov[,gt]"
            )
        image = base / parts[0]
        fov = base / parts[1]
        gt = base / parts[2] if len(parts) > 2 and parts[2] else None
        name = image.stem
        if name in seen:
            raise DatasetError(f"duplicate dataset id {name!r}")
        seen.add(name)
        entries.append(ManifestEntry(
            id=name, image_path=image, fov_mask_path=fov,
            ground_truth_path=gt,
        ))
    if not entries:
        print(f"warning: empty manifest {manifest_path}", file=sys.stderr)
    missing = sorted(
        e.id for e in entries
        if not e.image_path.is_file() or not e.fov_mask_path.is_file()
    )
    if missing:
        raise DatasetError(f"missing files for: {', '.join(missing)}")
    return DatasetManifest(entries=entries)


def _load_entry(entry: ManifestEntry, with_gt: bool):
    image = read_pnm(entry.image_path.read_bytes())
    if isinstance(image, GrayImage):
        raise DatasetError(f"{entry.id}: expected a color image")
    fov = load_mask(read_pnm(entry.fov_mask_path.read_bytes()))
    gt = None
    if with_gt:
        if entry.ground_truth_path is None:
            raise DatasetError(f"{entry.id}: no ground truth available")
        gt = load_mask(read_pnm(entry.ground_truth_path.read_bytes()))
    return image, fov, gt


# ---------------------------------------------------------------------------
# argument plumbing

def _add_pipeline_flags(parser):
    g = parser.add_argument_group("pipeline")
    g.add_argument("--sigma", type=float, default=None,
                   help="Gaussian profile scale (default 0.57)")
    g.add_argument("--length", type=float, default=None,
                   help="vessel segment length L (default 8)")
    g.add_argument("--x-limit", type=float, default=None,
                   help="profile truncation half-width (default 6.99)")
    g.add_argument("--orientations", type=int, default=None,
                   help="number of kernel orientations (default 12)")
    g.add_argument("--min-size", type=int, default=None,
                   help="small-component cutoff in pixels "
                        "(default 30 scaled by image area)")
    g.add_argument("--otsu-scope", choices=["full-image", "fov-only"],
                   default=None, help="histogram scope for the threshold")
    g.add_argument("--gray", choices=["pca", "luma"], default=None,
                   help="gray conversion (luma is an unevaluated fallback)")
    g.add_argument("--clahe-tiles", type=int, default=None,
                   help="tile grid size per side (default 8)")
    g.add_argument("--clahe-clip", type=float, default=None,
                   help="clip limit as a tile-count fraction (default 0.01)")
    g.add_argument("--clahe-bins", type=int, default=None,
                   help="histogram bins per tile (default 256)")
    parser.add_argument("--config", type=Path, default=None,
                        help="key = value file of the flags above")


def _add_dataset_flags(parser):
    parser.add_argument("--dataset-dir", type=Path, required=True,
                        help="dataset root (or manifest file for --layout flat)")
    parser.add_argument("--layout", choices=["drive", "stare", "flat"],
                        default="flat")


_CONFIG_KEYS = {
    "sigma": float, "length": float, "x-limit": float, "orientations": int,
    "min-size": int, "otsu-scope": str, "gray": str, "clahe-tiles": int,
    "clahe-clip": float, "clahe-bins": int,
}


def _read_config(path: Path) -> dict:
    values = {}
    for line_no, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{line_no}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{line_no}: unknown key {key!r}")
        values[key] = _CONFIG_KEYS[key](value.strip())
    return values


def _setting(args, config, key, default):
    arg = getattr(args, key.replace("-", "_"))
    if arg is not None:
        return arg
    if key in config:
        return config[key]
    return default


def resolve_pipeline_params(args, image_size=None) -> PipelineParams:
    """Merge flags over config-file values over defaults."""
    config = _read_config(args.config) if args.config else {}
    tiles = _setting(args, config, "clahe-tiles", 8)
    min_size = _setting(args, config, "min-size", None)
    if min_size is None:
        if image_size is not None:
            min_size = default_min_component_size(*image_size)
        else:
            min_size = 30
    return PipelineParams(
        kernel=KernelParams(
            sigma=_setting(args, config, "sigma", 0.57),
            length=_setting(args, config, "length", 8),
            x_limit=_setting(args, config, "x-limit", 6.99),
            n_orientations=_setting(args, config, "orientations", 12),
        ),
        clahe=ClaheParams(
            tiles_x=tiles,
            tiles_y=tiles,
            clip_limit=_setting(args, config, "clahe-clip", 0.01),
            bins=_setting(args, config, "clahe-bins", 256),
        ),
        min_component_size=min_size,
        otsu_scope=_setting(args, config, "otsu-scope", "full-image"),
        gray_mode=_setting(args, config, "gray", "pca"),
    )


def _params_meta(params: PipelineParams) -> str:
    k = params.kernel
    return (f"sigma={k.sigma} length={k.length} x_limit={k.x_limit} "
            f"orientations={k.n_orientations} min_size={params.min_component_size} "
            f"otsu_scope={params.otsu_scope} gray={params.gray_mode}")


def _thread_count(args) -> int:
    if getattr(args, "threads", None):
        return max(1, args.threads)
    env = os.environ.get("VESSELMF_THREADS", "")
    return max(1, int(env)) if env.isdigit() else 1


def _fmt(value, digits=4) -> str:
    return "NA" if value is None else f"{value:.{digits}f}"


def _process_entries(manifest, worker, threads):
    """Run ``worker`` per entry, preserving manifest order in the results."""
    if threads <= 1:
        return [worker(e) for e in manifest.entries]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, manifest.entries))


# ---------------------------------------------------------------------------
# subcommands

def cmd_segment(args) -> int:
    manifest = discover_dataset(args.dataset_dir, args.layout)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    failures = []

    for entry in manifest.entries:
        try:
            image, fov, _ = _load_entry(entry, with_gt=False)
            params = resolve_pipeline_params(args, (image.width, image.height))
            bank = build_bank(params.kernel)
            result = run_pipeline(image, fov, params, bank)
            (out_dir / f"{entry.id}_vessels.pgm").write_bytes(
                write_pnm(result.vessel_map))
            if args.dump_mfr:
                (out_dir / f"{entry.id}_mfr.pgm").write_bytes(
                    write_pnm(normalize_response(result.mfr)))
            if args.dump_stages:
                _dump_stages(out_dir / f"{entry.id}_stages", image, fov,
                             params, bank)
        except Exception as exc:
            failures.append(entry.id)
            print(f"error: {entry.id}: {exc}", file=sys.stderr)

    if failures:
        print(f"failed: {', '.join(failures)}", file=sys.stderr)
        return 1
    return 0


def _dump_stages(stage_dir: Path, image, fov, params, bank):
    """Write every intermediate image, including the inverted display map."""
    stage_dir.mkdir(parents=True, exist_ok=True)
    gray = luma_grayscale(image) if params.gray_mode == "luma" \
        else pca_grayscale(image)
    enhanced = clahe(gray, params.clahe)
    resp = max_response(enhanced, bank)
    norm = normalize_response(resp)
    hist_mask = fov if params.otsu_scope == "fov-only" else None
    diag = otsu_threshold(build_histogram(norm, hist_mask))
    thresholded = binarize(norm, diag.k_star)
    cleaned = length_filter(thresholded, params.min_component_size)
    masked = apply_mask(cleaned, fov)
    for name, img in [
        ("01_gray", gray), ("02_enhanced", enhanced), ("03_mfr", norm),
        ("04_threshold", thresholded), ("05_length_filtered", cleaned),
        ("06_masked", masked), ("07_complement", complement(masked)),
    ]:
        (stage_dir / f"{name}.pgm").write_bytes(write_pnm(img))


def cmd_eval(args) -> int:
    manifest = discover_dataset(args.dataset_dir, args.layout)
    threads = _thread_count(args)
    scope_fov = args.metrics_scope == "fov"
    failures = []

    def worker(entry):
        try:
            image, fov, gt = _load_entry(entry, with_gt=True)
            params = resolve_pipeline_params(args, (image.width, image.height))
            bank = build_bank(params.kernel)
            result = run_pipeline(image, fov, params, bank)
            report = evaluate_pair(
                result.vessel_map, gt,
                response=normalize_response(result.mfr),
                scope=fov if scope_fov else None,
            )
            return entry.id, report, params
        except Exception as exc:
            return entry.id, exc, None

    rows = []
    params_meta = ""
    for entry_id, outcome, params in _process_entries(manifest, worker, threads):
        if isinstance(outcome, Exception):
            failures.append(entry_id)
            print(f"error: {entry_id}: {outcome}", file=sys.stderr)
            continue
        if params is not None:
            params_meta = _params_meta(params)
        rows.append((entry_id, outcome))

    report_path = Path(args.report)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    if args.format == "json":
        _write_eval_json(report_path, rows, params_meta)
    else:
        _write_eval_csv(report_path, rows, params_meta)

    if failures:
        print(f"failed: {', '.join(failures)}", file=sys.stderr)
        return 1
    return 0


def _average(values):
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


def _eval_table(rows):
    table = [
        (name, r.specificity, r.sensitivity, r.accuracy, r.rmsd,
         r.mad_diff, r.auc)
        for name, r in rows
    ]
    if table:
        cols = list(zip(*[row[1:] for row in table]))
        table.append(("Average",) + tuple(_average(c) for c in cols))
    return table


def _write_eval_csv(path: Path, rows, meta: str):
    lines = [f"# vesselmf eval {meta}".rstrip(),
             "image,specificity,sensitivity,accuracy,rmsd,mad_diff,auc"]
    for name, *vals in _eval_table(rows):
        lines.append(",".join([name] + [_fmt(v) for v in vals]))
    path.write_text("\n".join(lines) + "\n")


def _write_eval_json(path: Path, rows, meta: str):
    table = _eval_table(rows)
    payload = {
        "meta": meta,
        "rows": [
            {
                "image": name,
                "specificity": spec, "sensitivity": sens, "accuracy": acc,
                "rmsd": rmsd_, "mad_diff": mad_diff, "auc": auc_,
            }
            for name, spec, sens, acc, rmsd_, mad_diff, auc_ in table
        ],
    }
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def cmd_roc(args) -> int:
    manifest = discover_dataset(args.dataset_dir, args.layout)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    failures = []
    summary = []
    params_meta = ""

    for entry in manifest.entries:
        try:
            image, fov, gt = _load_entry(entry, with_gt=True)
            params = resolve_pipeline_params(args, (image.width, image.height))
            params_meta = _params_meta(params)
            bank = build_bank(params.kernel)
            result = run_pipeline(image, fov, params, bank)
            curve = roc_curve(normalize_response(result.mfr), gt)
            curve_lines = ["fpr,tpr"] + [
                f"{fpr:.6f},{tpr:.6f}" for fpr, tpr in curve.points
            ]
            (out_dir / f"{entry.id}_roc.csv").write_text(
                "\n".join(curve_lines) + "\n")
            summary.append((entry.id, auc(curve)))
        except Exception as exc:
            failures.append(entry.id)
            print(f"error: {entry.id}: {exc}", file=sys.stderr)

    lines = [f"# vesselmf roc {params_meta}".rstrip(), "image,auc"]
    lines += [f"{name},{_fmt(a)}" for name, a in summary]
    if summary:
        lines.append(f"Average,{_fmt(_average([a for _, a in summary]))}")
    (out_dir / "roc_summary.csv").write_text("\n".join(lines) + "\n")

    if failures:
        print(f"failed: {', '.join(failures)}", file=sys.stderr)
        return 1
    return 0


def _parse_grid(spec: str) -> GridSpec:
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid {spec!r} must be lo:hi:step")
    return GridSpec(lo=float(parts[0]), hi=float(parts[1]),
                    step=float(parts[2]))


def cmd_sweep(args) -> int:
    manifest = discover_dataset(args.dataset_dir, args.layout)
    if len(manifest) == 0:
        print("error: sweep needs a non-empty dataset", file=sys.stderr)
        return 2
    dataset = []
    for entry in manifest.entries:
        image, fov, gt = _load_entry(entry, with_gt=True)
        dataset.append((image, fov, gt))
    base = resolve_pipeline_params(
        args, (dataset[0][0].width, dataset[0][0].height))

    if args.l_grid:
        lo, _, hi = args.l_grid.partition(":")
        lengths = range(int(lo), int(hi) + 1)
        result = length_search(dataset, lengths, base)
    else:
        result = three_round_search(
            dataset,
            _parse_grid(args.round1_x),
            _parse_grid(args.round1_sigma),
            length=base.kernel.length,
            base=base,
        )

    report_path = Path(args.report)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["x_limit,sigma,L,mean_accuracy"]
    lines += [
        f"{x:.6g},{s:.6g},{length:.6g},{acc:.6f}"
        for x, s, length, acc in result.evaluations
    ]
    report_path.write_text("\n".join(lines) + "\n")
    bx, bs, bl, bacc = result.best
    print(f"best: x_limit={bx:.6g} sigma={bs:.6g} L={bl:.6g} "
          f"mean_accuracy={bacc:.6f}")
    return 0


def cmd_kernel(args) -> int:
    if args.action != "dump":
        print(f"unknown kernel action {args.action!r}", file=sys.stderr)
        return 2
    params = resolve_pipeline_params(args).kernel
    bank = build_bank(params)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, kernel in enumerate(bank.kernels):
        text = "\n".join(
            " ".join(f"{w: .10e}" for w in row) for row in kernel.weights
        )
        (out_dir / f"kernel_{i:02d}.txt").write_text(
            f"# theta = {kernel.theta} degrees\n{text}\n")
        lo, hi = kernel.weights.min(), kernel.weights.max()
        heat = (kernel.weights - lo) / (hi - lo) if hi > lo \
            else np.zeros_like(kernel.weights)
        (out_dir / f"kernel_{i:02d}.pgm").write_bytes(
            write_pnm(GrayImage.from_array(heat)))
    print(f"wrote {len(bank.kernels)} kernels to {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vesselmf",
        description="Matched-filter retinal vessel segmentation. Images "
                    "must be PNM (P2/P3/P5/P6); convert TIFF/GIF datasets "
                    "first, e.g. with ImageMagick.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="write per-image vessel maps")
    _add_dataset_flags(p)
    _add_pipeline_flags(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--dump-mfr", action="store_true",
                   help="also write the normalized filter response")
    p.add_argument("--dump-stages", action="store_true",
                   help="write every intermediate stage image")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("eval", help="metrics report against ground truth")
    _add_dataset_flags(p)
    _add_pipeline_flags(p)
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--metrics-scope", choices=["full", "fov"], default="full")
    p.add_argument("--threads", type=int, default=None,
                   help="worker pool size (or VESSELMF_THREADS)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("roc", help="ROC curve points and AUC per image")
    _add_dataset_flags(p)
    _add_pipeline_flags(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_roc)

    p = sub.add_parser("sweep", help="parameter grid search")
    _add_dataset_flags(p)
    _add_pipeline_flags(p)
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--round1-x", default="0.5:10:0.5",
                   help="round-1 x_limit grid as lo:hi:step")
    p.add_argument("--round1-sigma", default="0.5:10:0.5",
                   help="round-1 sigma grid as lo:hi:step")
    p.add_argument("--l-grid", default=None,
                   help="integer length scan lo:hi instead of the (x, sigma) search")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("kernel", help="inspect the kernel bank")
    p.add_argument("action", choices=["dump"])
    _add_pipeline_flags(p)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_kernel)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DatasetError, SweepError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
