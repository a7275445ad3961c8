"""Command-line front end for the simulation and reconstruction pipeline.

Exit codes: 0 success, 1 pipeline error (diagnostic on stderr), 2 usage error.
All randomness is controlled by explicit seeds; identical inputs and seeds
produce byte-identical outputs. The only environment variable consulted is
RADIOPLAN_CACHE: when set, built matched-filter kernels are memoized there.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import dataset as ds
from . import io
from . import metrics
from . import radiomap as rm
from . import reconstruct as ls
from .errors import RadioPlanError
from .lis import (
    LisConfig,
    average_samples,
    element_positions,
    half_wavelength_spacing,
    noise_sigma_for_snr,
    wavelength,
)
from .propagation import dump_paths, field_at_lis, trace_scene
from .scene import rasterize_floorplan, sample_devices, validate_scene


def _sub_seeds(seed: int, n: int) -> list[int]:
    return [int(v) for v in np.random.SeedSequence(seed).generate_state(n, np.uint64)]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radioplan",
        description="Simulate ceiling-array signals, form radio maps, and "
                    "reconstruct floor plans.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_scene = sub.add_parser("scene", help="scene file utilities")
    scene_sub = p_scene.add_subparsers(dest="scene_command", required=True)
    p_validate = scene_sub.add_parser("validate", help="check scene invariants")
    p_validate.add_argument("--scene", required=True, help="scene TOML file")
    p_render = scene_sub.add_parser("render", help="rasterize the floor plan")
    p_render.add_argument("--scene", required=True, help="scene TOML file")
    p_render.add_argument("--resolution", type=int, default=256,
                          help="pixels per side (default 256)")
    p_render.add_argument("--out", required=True, help="output PNG path")

    p_sim = sub.add_parser("simulate", help="synthesize the received signal grid")
    p_sim.add_argument("--scene", required=True, help="scene TOML file")
    p_sim.add_argument("--snr-db", type=float, default=-10.0,
                       help="target SNR gamma in dB (default -10)")
    p_sim.add_argument("--s", type=int, default=1,
                       help="averaging count S (snapshots per coherence block)")
    p_sim.add_argument("--seed", type=int, default=0, help="RNG seed")
    p_sim.add_argument("--out", required=True, help="output signal file (binary grid)")
    p_sim.add_argument("--lis-side", type=int, default=128,
                       help="elements per side of the square aperture (default 128)")
    p_sim.add_argument("--spacing", type=float, default=None,
                       help="element spacing in m (default: half wavelength)")
    p_sim.add_argument("--max-order", type=int, default=1,
                       help="maximum reflection order (default 1)")
    p_sim.add_argument("--k-a", type=int, default=None,
                       help="resample this many devices instead of using the "
                            "scene file placements")
    p_sim.add_argument("--device-height", type=float, default=0.0,
                       help="height in m for resampled devices (default 0)")
    p_sim.add_argument("--noiseless", action="store_true",
                       help="skip the noise draw (sigma^2 = 0)")
    p_sim.add_argument("--dump-paths", default=None,
                       help="optional path for a per-route debug table")

    p_map = sub.add_parser("radiomap", help="matched-filter a signal into a map")
    p_map.add_argument("--in", dest="infile", required=True, help="signal file")
    p_map.add_argument("--out", required=True, help="output PNG path")
    p_map.add_argument("--kernel-size", type=int, default=100,
                       help="filter side length in taps (default 100)")
    p_map.add_argument("--depth", type=float, default=8.0,
                       help="filter design depth in m (default 8)")
    p_map.add_argument("--spacing", type=float, default=None,
                       help="grid spacing in m (default: half wavelength of the "
                            "signal carrier)")
    p_map.add_argument("--lut", default=None, help="optional LUT .npy (256x3 uint8)")
    p_map.add_argument("--magnitude-out", default=None,
                       help="optional binary float grid of |output|")

    p_ds = sub.add_parser("dataset", help="dataset generation and splitting")
    ds_sub = p_ds.add_subparsers(dest="dataset_command", required=True)
    p_build = ds_sub.add_parser("build", help="generate samples and manifest")
    p_build.add_argument("--config", required=True, help="dataset TOML config")
    p_build.add_argument("--out", required=True, help="output dataset directory")
    p_build.add_argument("--jobs", type=int, default=1,
                         help="parallel workers (default 1)")
    p_build.add_argument("--seed", type=int, default=None,
                         help="override the config master_seed")
    p_build.add_argument("--total-samples", type=int, default=None,
                         help="override the config sample count")
    p_split = ds_sub.add_parser("split", help="re-split an existing dataset")
    p_split.add_argument("--manifest", required=True, help="manifest.json path")
    p_split.add_argument("--ratios", default="0.7,0.1,0.2",
                         help="train,val,test fractions (default 0.7,0.1,0.2)")
    p_split.add_argument("--seed", type=int, default=0, help="assignment seed")

    p_ls = sub.add_parser("ls", help="linear least-squares baseline")
    ls_sub = p_ls.add_subparsers(dest="ls_command", required=True)
    p_fit = ls_sub.add_parser("fit", help="fit the linear map on a split")
    p_fit.add_argument("--manifest", required=True, help="manifest.json path")
    p_fit.add_argument("--split", default="train", help="split to fit on")
    p_fit.add_argument("--resolution", type=int, default=64,
                       help="working resolution in pixels per side (default 64)")
    p_fit.add_argument("--alpha", default="auto",
                       help="ridge strength; a float, or 'auto' (default)")
    p_fit.add_argument("--out", required=True, help="output model file")
    p_pred = ls_sub.add_parser("predict", help="predict floor plans for a split")
    p_pred.add_argument("--model", required=True, help="fitted model file")
    p_pred.add_argument("--manifest", required=True, help="manifest.json path")
    p_pred.add_argument("--split", default="test", help="split to predict")
    p_pred.add_argument("--out", required=True, help="output directory")
    p_pred.add_argument("--oracle-clamp", action="store_true",
                        help="apply the ground-truth min clamp (marks outputs "
                             "as oracle-assisted)")

    p_eval = sub.add_parser("evaluate", help="score predictions against truth")
    p_eval.add_argument("--pred", required=True, help="directory of *_pred.png files")
    p_eval.add_argument("--manifest", required=True, help="manifest.json path")
    p_eval.add_argument("--split", default="test", help="split to score")
    p_eval.add_argument("--method", default="unknown", help="method label for reports")
    p_eval.add_argument("--oracle-assisted", action="store_true",
                        help="mark these scores as ground-truth-assisted")
    p_eval.add_argument("--out", required=True, help="output JSONL report")

    p_rep = sub.add_parser("report", help="aggregate evaluation reports")
    p_rep.add_argument("--eval", nargs="+", required=True, help="JSONL report files")
    p_rep.add_argument("--out", default=None, help="optional output text file")

    p_plot = sub.add_parser("plot", help="PSNR-vs-S bar data and figure")
    p_plot.add_argument("--eval", nargs="+", required=True, help="JSONL report files")
    p_plot.add_argument("--out-csv", required=True, help="output CSV path")
    p_plot.add_argument("--out-image", required=True, help="output PNG path")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except RadioPlanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    if args.command == "scene":
        return _cmd_scene(args)
    if args.command == "simulate":
        return _cmd_simulate(args)
    if args.command == "radiomap":
        return _cmd_radiomap(args)
    if args.command == "dataset":
        return _cmd_dataset(args)
    if args.command == "ls":
        return _cmd_ls(args)
    if args.command == "evaluate":
        return _cmd_evaluate(args)
    if args.command == "report":
        return _cmd_report(args)
    if args.command == "plot":
        return _cmd_plot(args)
    raise AssertionError(f"unhandled command {args.command}")


def _cmd_scene(args) -> int:
    scene = io.load_scene(args.scene)
    if args.scene_command == "validate":
        validate_scene(scene)
        print("scene ok")
        return 0
    img = rasterize_floorplan(scene, args.resolution)
    io.save_image(args.out, img)
    print(f"wrote {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    scene = io.load_scene(args.scene)
    placement_seed, noise_seed = _sub_seeds(args.seed, 2)
    if args.k_a is not None:
        scene = sample_devices(scene, args.k_a, placement_seed,
                               device_height=args.device_height)
    validate_scene(scene)
    frequency = scene.carrier_frequency
    spacing = args.spacing or half_wavelength_spacing(frequency)
    lis = LisConfig(n_x=args.lis_side, n_y=args.lis_side, spacing=spacing,
                    height=scene.room_extent[2])
    elements = element_positions(lis, scene.room_extent)
    paths = trace_scene(scene, elements, args.max_order)
    if args.dump_paths:
        with open(args.dump_paths, "w", encoding="utf-8") as fh:
            dump_paths(paths, fh)
    grid = field_at_lis(paths, scene.devices, (lis.n_x, lis.n_y),
                        wavelength(frequency))
    sigma2 = 0.0 if args.noiseless else noise_sigma_for_snr(grid, args.snr_db, lis)
    signal = average_samples(grid, lis, sigma2, args.s, noise_seed)
    io.save_signal(args.out, signal)
    print(f"wrote {args.out} ({lis.n_x}x{lis.n_y}, S={args.s}, sigma2={signal.sigma2:.6g})")
    return 0


def _cached_kernel(frequency: float, depth: float, k_side: int, spacing: float):
    cache_dir = os.environ.get("RADIOPLAN_CACHE")
    if not cache_dir:
        return rm.build_mf_kernel(frequency, depth, k_side, spacing)
    key = hashlib.sha256(
        f"{frequency!r}|{depth!r}|{k_side!r}|{spacing!r}".encode()
    ).hexdigest()[:16]
    path = Path(cache_dir) / f"kernel_{key}.npy"
    if path.exists():
        taps = np.load(path)
        return rm.MfKernel(taps=taps, design_frequency=frequency,
                           design_depth=depth, spacing=spacing)
    kernel = rm.build_mf_kernel(frequency, depth, k_side, spacing)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.save(path, kernel.taps)
    return kernel


def _cmd_radiomap(args) -> int:
    signal = io.load_signal(args.infile, spacing=args.spacing)
    kernel = _cached_kernel(signal.frequency, args.depth, args.kernel_size,
                            signal.spacing)
    lut = rm.load_lut(args.lut) if args.lut else None
    radio_map = rm.form_radio_map(signal, kernel, lut)
    io.save_image(args.out, radio_map.rgb)
    if args.magnitude_out:
        io.save_magnitude(args.magnitude_out, radio_map.magnitude,
                          signal.frequency, signal.sigma2, signal.s_count)
    print(f"wrote {args.out}")
    return 0


def _load_dataset_config(path, overrides: dict) -> ds.DatasetConfig:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    data = raw.get("dataset", raw)
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    return ds.config_from_dict(data)


def _cmd_dataset(args) -> int:
    if args.dataset_command == "build":
        config = _load_dataset_config(args.config, {
            "master_seed": args.seed,
            "total_samples": args.total_samples,
        })
        manifest = ds.build(config, args.out, jobs=args.jobs)
        counts = {}
        for record in manifest.records:
            counts[record.split] = counts.get(record.split, 0) + 1
        print(f"wrote {len(manifest.records)} samples to {args.out} "
              f"(splits: {counts})")
        return 0
    manifest_path = Path(args.manifest)
    manifest = ds.Manifest.from_dict(io.load_manifest(manifest_path))
    ratios = tuple(float(v) for v in args.ratios.split(","))
    new_manifest = ds.split(manifest, ratios, args.seed)
    ds.relocate_files(manifest, new_manifest, manifest_path.parent)
    io.save_manifest(manifest_path, new_manifest.to_dict())
    print(f"re-split {len(new_manifest.records)} samples")
    return 0


def _records_of_split(manifest: ds.Manifest, split: str) -> list[ds.SampleRecord]:
    records = [r for r in manifest.records if r.split == split]
    if not records:
        raise RadioPlanError(f"no records in split {split!r}")
    return records


def _cmd_ls(args) -> int:
    manifest_path = Path(args.manifest)
    manifest = ds.Manifest.from_dict(io.load_manifest(manifest_path))
    root = manifest_path.parent
    if args.ls_command == "fit":
        records = _records_of_split(manifest, args.split)
        pairs = [
            (io.load_image(root / r.radio_map_path),
             io.load_image(root / r.floor_plan_path))
            for r in records
        ]
        alpha = None if args.alpha == "auto" else float(args.alpha)
        linear_map = ls.fit(pairs, resolution=args.resolution, alpha=alpha)
        io.save_linear_map(args.out, linear_map)
        print(f"fitted on {len(pairs)} pairs (alpha={linear_map.ridge_alpha:.6g}); "
              f"wrote {args.out}")
        return 0
    linear_map = io.load_linear_map(args.model)
    records = _records_of_split(manifest, args.split)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    export_side = io.load_image(root / records[0].floor_plan_path).shape[0]
    for record in records:
        rmap_img = io.load_image(root / record.radio_map_path)
        pred = ls.predict(linear_map, rmap_img)
        if pred.shape[0] != export_side:
            pred = ds.nearest_resize(pred, export_side)
        if args.oracle_clamp:
            truth = io.load_image(root / record.floor_plan_path)
            pred = ls.oracle_clamp(pred, truth)
        io.save_image(out_dir / f"{record.sample_id}_pred.png", pred)
    print(f"wrote {len(records)} predictions to {out_dir}"
          + (" (oracle-assisted)" if args.oracle_clamp else ""))
    return 0


def _cmd_evaluate(args) -> int:
    manifest_path = Path(args.manifest)
    manifest = ds.Manifest.from_dict(io.load_manifest(manifest_path))
    root = manifest_path.parent
    records = _records_of_split(manifest, args.split)
    scenario_rooms = {
        i: tuple(entry["room"][k] for k in ("lx", "ly", "h"))
        for i, entry in enumerate(manifest.config.get("scenarios", []))
    }
    pred_dir = Path(args.pred)
    rows = []
    for record in records:
        pred_path = pred_dir / f"{record.sample_id}_pred.png"
        if not pred_path.exists():
            raise RadioPlanError(f"missing prediction {pred_path}")
        pred = io.load_image(pred_path)
        truth = io.load_image(root / record.floor_plan_path)
        room = scenario_rooms.get(record.scenario_id, (10.34, 10.34, 8.0))
        report = metrics.evaluate_pair(pred, truth, room)
        rows.append({
            "sample_id": record.sample_id,
            "method": args.method,
            "oracle_assisted": bool(args.oracle_assisted),
            "scenario_id": record.scenario_id,
            "s": record.s,
            "k_a": record.k_a,
            "psnr": report.psnr,
            "ssim": report.ssim,
            "centroid_errors_cm": list(report.centroid_errors),
            "mean_error_cm": report.mean_error,
            "std_error_cm": report.std_error,
            "unmatched_count": report.unmatched_count,
        })
    with open(args.out, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    mean_psnr = float(np.mean([r["psnr"] for r in rows]))
    print(f"evaluated {len(rows)} samples (mean PSNR {mean_psnr:.2f} dB); "
          f"wrote {args.out}")
    return 0


def _load_eval_rows(paths) -> list[dict]:
    rows = []
    for path in paths:
        with open(path, "r", encoding="utf-8") as fh:
            rows.extend(json.loads(line) for line in fh if line.strip())
    if not rows:
        raise RadioPlanError("no evaluation rows found")
    return rows


def _cmd_report(args) -> int:
    rows = _load_eval_rows(args.eval)
    k_a_values = sorted({r["k_a"] for r in rows})
    lines = []
    header = (f"{'scenario':>8} {'method':>10} {'oracle':>6} "
              f"{'PSNR (dB)':>16} {'SSIM':>14} "
              + " ".join(f"{'err@Ka=' + str(k) + ' (cm)':>16}" for k in k_a_values)
              + f" {'err avg (cm)':>14}")
    lines.append(header)
    groups = {}
    for row in rows:
        key = (row["scenario_id"], row["method"], row["oracle_assisted"])
        groups.setdefault(key, []).append(row)
    for key in sorted(groups, key=lambda k: (k[0], k[1], k[2])):
        scenario_id, method, oracle = key
        grp = groups[key]
        psnrs = np.array([r["psnr"] for r in grp])
        ssims = np.array([r["ssim"] for r in grp])
        cells = []
        all_errs = []
        for k in k_a_values:
            errs = [e for r in grp if r["k_a"] == k for e in r["centroid_errors_cm"]]
            all_errs.extend(errs)
            cells.append(f"{np.mean(errs):8.2f}+/-{np.std(errs):5.2f}" if errs
                         else f"{'-':>16}")
        avg = (f"{np.mean(all_errs):8.2f}+/-{np.std(all_errs):5.2f}"
               if all_errs else f"{'-':>14}")
        lines.append(
            f"{scenario_id:>8} {method:>10} {('yes' if oracle else 'no'):>6} "
            f"{np.mean(psnrs):8.2f}+/-{np.std(psnrs):4.2f} "
            f"{np.mean(ssims):7.3f}+/-{np.std(ssims):4.3f} "
            + " ".join(f"{c:>16}" for c in cells) + f" {avg:>14}"
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def _cmd_plot(args) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = _load_eval_rows(args.eval)
    groups = {}
    for row in rows:
        key = (row["method"], row["scenario_id"], row["s"])
        groups.setdefault(key, []).append(row["psnr"])
    table = sorted(
        (method, scenario, s, float(np.mean(v)), float(np.std(v)), len(v))
        for (method, scenario, s), v in groups.items()
    )
    with open(args.out_csv, "w", encoding="utf-8") as fh:
        fh.write("method,scenario_id,s,psnr_mean,psnr_std,n\n")
        for method, scenario, s, mean, std, n in table:
            fh.write(f"{method},{scenario},{s},{mean:.4f},{std:.4f},{n}\n")

    methods = sorted({t[0] for t in table})
    pairs = sorted({(t[1], t[2]) for t in table})
    x = np.arange(len(pairs))
    width = 0.8 / max(len(methods), 1)
    fig, ax = plt.subplots(figsize=(8, 4))
    for mi, method in enumerate(methods):
        values = []
        for scenario, s in pairs:
            match = [t for t in table if t[0] == method and t[1] == scenario and t[2] == s]
            values.append(match[0][3] if match else 0.0)
        ax.bar(x + mi * width, values, width, label=method)
    ax.set_xticks(x + width * (len(methods) - 1) / 2)
    ax.set_xticklabels([f"sc{scenario}\nS={s}" for scenario, s in pairs])
    ax.set_ylabel("PSNR (dB)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out_image, dpi=120)
    plt.close(fig)
    print(f"wrote {args.out_csv} and {args.out_image}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
