"""Command-line entry point: ``sts simulate | sweep | eval | scene``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import synthworld
from .bev import GridConfig, bev_norm, lift, splat
from .config import RunConfig, load_config
from .costvol import RegularizerWeights, StereoConfig, stereo_pipeline
from .errors import ContractError, InputError, ShapeError, StsError
from .fileio import read_scene, read_tensor, write_pgm, write_scene, write_tensor
from .fusion import bce_depth_loss, decode_depth, fuse, to_distribution
from .hypotheses import make_bins
from .metrics import RangeBins, abs_error, bin_accuracy, range_binned, range_counts, silog
from .sweep import SourceView

log = logging.getLogger("sts")


def thread_count() -> int:
    raw = os.environ.get("STS_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"STS_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise InputError("STS_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def load_scene(config: RunConfig) -> synthworld.SceneSpec:
    if not config.scene:
        raise InputError("no scene given (config key 'scene')")
    if config.scene.startswith("preset:"):
        spec = synthworld.preset(config.scene[len("preset:"):])
    else:
        spec = read_scene(config.scene)
    if config.seed is not None:
        spec = replace(spec, seed=config.seed)
    if config.feature_stride is not None:
        spec = replace(spec, feature_stride=config.feature_stride)
    return spec


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(out: Path, config: RunConfig, files: List[str], extra=None):
    manifest = {
        # the output directory is left out so runs into different directories compare equal
        "config": [line for line in config.to_text().splitlines() if not line.startswith("out =")],
        "files": {name: _sha256(out / name) for name in sorted(files)},
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def cmd_simulate(config: RunConfig) -> List[str]:
    """Render every frame of the scene trajectory into ``config.out``."""
    spec = load_scene(config)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for frame in range(len(spec.trajectory)):
        for r in synthworld.render(spec, frame):
            stem = f"frame{frame:03d}_{r.camera_id}"
            write_tensor(out / f"{stem}_features.stst", r.features.data)
            write_tensor(out / f"{stem}_depth.stst", r.gt_depth)
            write_pgm(out / f"{stem}_depth.pgm", r.gt_depth, 0.0, config.d_max)
            write_pgm(out / f"{stem}_moving.pgm", r.moving_mask.astype(float), 0.0, 1.0)
            write_pgm(out / f"{stem}_textureless.pgm", r.textureless_mask.astype(float), 0.0, 1.0)
            files += [f"{stem}_{kind}" for kind in
                      ("features.stst", "depth.stst", "depth.pgm", "moving.pgm", "textureless.pgm")]
    _write_manifest(out, config, files, {"frames": len(spec.trajectory), "cameras": [c.camera_id for c in spec.rig]})
    log.info("wrote %d files to %s", len(files), out)
    return files


@dataclass
class CameraResult:
    camera_id: str
    stereo_logits: np.ndarray
    valid_count: np.ndarray
    fused: np.ndarray
    depth: np.ndarray
    gt_depth: np.ndarray
    rows: list
    frustum: object


def _stereo_config(config: RunConfig) -> StereoConfig:
    head = RegularizerWeights.load(config.head) if config.head else None
    return StereoConfig(
        depth_mode=config.depth_mode, d_min=config.d_min, d_max=config.d_max, bins=config.bins,
        stereo_bins=config.stereo_bins, sweep_mode=config.sweep_mode, groups=config.groups,
        output_stride=config.output_stride, head=head,
    )


def _metric_rows(pred, gt, ranges):
    rows = []
    for metric_name, fn in (("silog", silog), ("abs_err", abs_error)):
        if (gt > 0).any():
            rows.append(("all", metric_name, fn(pred, gt, gt > 0)))
        for label, value in range_binned(fn, pred, gt, ranges).items():
            rows.append((label, metric_name, value))
    return rows


def _run_camera(index, cam, ego, ref, ref_out, sources, stereo_cfg, bins, config, seed):
    res = stereo_pipeline(cam, ego, ref.features, sources, stereo_cfg)
    gt = ref_out.gt_depth
    quality = synthworld.MonoQuality(config.mono_sigma_bins, config.mono_noise, config.mono_depth_scale, seed=[seed, index])
    mono = synthworld.mono_oracle(gt, bins, quality, stride=stereo_cfg.output_stride)
    fused = fuse(res.logits, mono)
    stereo_only = to_distribution(res.logits)
    mono_only = to_distribution(mono)
    ranges = RangeBins()
    rows = []
    for name, dist in (("fused", fused), ("stereo", stereo_only), ("mono", mono_only)):
        pred = decode_depth(dist, config.decode_mode)
        for label, metric, value in _metric_rows(pred, gt, ranges):
            rows.append((name, label, metric, value))
        if (bins.assign(gt) >= 0).any():
            rows.append((name, "all", "bin_accuracy", bin_accuracy(dist, gt, 1)))
            rows.append((name, "all", "bce", bce_depth_loss(dist, gt)))
    rows.append(("stereo", "all", "valid_count", float(res.valid_count.sum())))
    frustum = lift(ref_out.features, fused, cam, min_prob=1e-4)
    return CameraResult(cam.camera_id, res.logits.data, res.valid_count, fused.probs,
                        decode_depth(fused, config.decode_mode), gt, rows, frustum)


def cmd_sweep(config: RunConfig) -> List[str]:
    """Stereo + mono fusion on one frame pair; writes logits, depth, BEV and metrics."""
    spec = load_scene(config)
    frame = config.frame if config.frame is not None else len(spec.trajectory) - 1
    if not 1 <= frame < len(spec.trajectory):
        raise InputError(f"sweep.frame must be in [1, {len(spec.trajectory) - 1}], got {frame}")
    n = spec.feature_stride
    m = config.output_stride or n
    config = replace(config, output_stride=m)
    stereo_cfg = _stereo_config(config)
    bins = make_bins(config.depth_mode, config.d_min, config.d_max, config.bins)
    seed = spec.seed if config.seed is None else config.seed

    prev = synthworld.render(spec, frame - 1)
    cur = synthworld.render(spec, frame)
    cur_m = cur if m == n else synthworld.render(spec, frame, m)
    ego_prev, ego = spec.trajectory[frame - 1], spec.trajectory[frame]
    sources = [SourceView(r.features, c, ego_prev) for r, c in zip(prev, spec.rig)]

    jobs = list(range(len(spec.rig)))

    def work(i):
        return _run_camera(i, spec.rig[i], ego, cur[i], cur_m[i], sources, stereo_cfg, bins, config, seed)

    workers = min(thread_count(), len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(i) for i in jobs]

    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    scene_name = Path(config.scene).stem if not config.scene.startswith("preset:") else config.scene[7:]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["scene", "camera", "sweep_mode", "depth_mode", "stereo_bins", "predictor", "range", "metric", "value"])
    for r in results:
        stem = r.camera_id
        write_tensor(out / f"{stem}_stereo_logits.stst", r.stereo_logits)
        write_tensor(out / f"{stem}_valid_count.stst", r.valid_count)
        write_tensor(out / f"{stem}_fused.stst", r.fused)
        write_tensor(out / f"{stem}_depth.stst", r.depth)
        write_tensor(out / f"{stem}_gt_depth.stst", r.gt_depth)
        write_pgm(out / f"{stem}_depth.pgm", r.depth, 0.0, config.d_max)
        files += [f"{stem}_{k}" for k in ("stereo_logits.stst", "valid_count.stst", "fused.stst", "depth.stst",
                                          "gt_depth.stst", "depth.pgm")]
        for predictor, label, metric, value in r.rows:
            writer.writerow([scene_name, r.camera_id, config.sweep_mode, config.depth_mode, config.stereo_bins,
                             predictor, label, metric, repr(float(value))])
    grid = splat([r.frustum for r in results],
                 GridConfig(-config.bev_extent, config.bev_extent, -config.bev_extent, config.bev_extent, config.bev_cell))
    write_tensor(out / "bev.stst", grid.data)
    write_pgm(out / "bev.pgm", bev_norm(grid))
    (out / "metrics.csv").write_text(buf.getvalue())
    files += ["bev.stst", "bev.pgm", "metrics.csv"]
    _write_manifest(out, config, files, {"frame": frame, "cameras": [r.camera_id for r in results]})
    return files


def cmd_eval(pred_files, gt_files, bins: Optional[RangeBins] = None, out: Optional[str] = None) -> str:
    """Range-binned SILog / absolute error of depth tensors against GT tensors."""
    if len(pred_files) != len(gt_files):
        raise InputError(f"{len(pred_files)} prediction files but {len(gt_files)} ground-truth files")
    bins = bins or RangeBins()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["file", "range", "metric", "value", "pixels"])
    summary = []
    for pf, gf in zip(pred_files, gt_files):
        pred, gt = read_tensor(pf), read_tensor(gf)
        if pred.shape != gt.shape:
            raise ShapeError(f"{pf}: shape {pred.shape} does not match {gf}: {gt.shape}")
        counts = range_counts(gt, bins)
        name = Path(pf).name
        for metric_name, fn in (("silog", silog), ("abs_err", abs_error)):
            for label, value in range_binned(fn, pred, gt, bins).items():
                writer.writerow([name, label, metric_name, repr(float(value)), counts[label]])
        empty = [label for label, c in counts.items() if c == 0]
        line = f"{name}: {sum(counts.values())} pixels with GT"
        if (gt > 0).any():
            line += f", SILog {silog(pred, gt):.4f}"
        if empty:
            line += f"; empty ranges: {', '.join(empty)}"
        summary.append(line)
    text = buf.getvalue()
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "eval.csv").write_text(text)
        (Path(out) / "summary.txt").write_text("\n".join(summary) + "\n")
    else:
        sys.stdout.write(text)
    sys.stderr.write("\n".join(summary) + "\n")
    return text


def _config_from_args(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    return config.with_overrides(
        scene=getattr(args, "scene", None), sweep_mode=getattr(args, "mode", None),
        depth_mode=getattr(args, "depth_mode", None), stereo_bins=getattr(args, "stereo_bins", None),
        out=args.out, seed=args.seed,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sts", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value run configuration")
        p.add_argument("--scene", help="scene file, or preset:NAME")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("simulate", help="render all frames of a scene")
    common(p)
    p = sub.add_parser("sweep", help="stereo, fusion, BEV and metrics on a frame pair")
    common(p)
    p.add_argument("--mode", choices=["surround", "same_camera"])
    p.add_argument("--depth-mode", choices=["sid", "ud"])
    p.add_argument("--stereo-bins", type=int)
    p = sub.add_parser("eval", help="evaluate depth tensors against ground truth")
    p.add_argument("--pred", nargs="+", required=True)
    p.add_argument("--gt", nargs="+", required=True)
    p.add_argument("--bins", type=float, nargs="+", help="range edges in meters")
    p.add_argument("--out")
    p = sub.add_parser("scene", help="write a preset scene file")
    p.add_argument("preset", choices=sorted(synthworld.PRESETS))
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        if args.command == "simulate":
            cmd_simulate(_config_from_args(args))
        elif args.command == "sweep":
            cmd_sweep(_config_from_args(args))
        elif args.command == "eval":
            bins = RangeBins(tuple(args.bins)) if args.bins else None
            cmd_eval(args.pred, args.gt, bins, args.out)
        elif args.command == "scene":
            write_scene(args.out, synthworld.preset(args.preset, args.seed))
    except StsError as exc:
        print(f"sts: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, FloatingPointError) as exc:
        print(f"sts: numeric error: {exc}", file=sys.stderr)
        return ContractError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
