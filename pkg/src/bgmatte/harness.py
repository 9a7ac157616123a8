"""Dataset construction, manifests, and the evaluation harness.

A dataset lives in one directory: asset files plus a manifest.json listing
every sample's file paths, split, and the configuration that produced it.
Manifests carry no timestamps or machine state, so rebuilding with the same
seed produces byte-identical files.

Relative manifest paths resolve against BGMATTE_DATA_ROOT when that
environment variable is set, else against the manifest's own directory.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .distort import DistortionConfig, derived_rng, distort_background
from .errors import DegenerateInputError, DomainError, ParameterError
from .imagecore import (
    AlphaMatte,
    CompositeSample,
    Image,
    Trimap,
    compose,
    generate_trimap,
    load_alpha,
    load_image,
    load_trimap,
    render_trimap_channel,
    save_alpha,
    save_image,
    save_trimap,
)
from .metrics import EVAL_UNKNOWN, evaluate_pair
from .netgen import InputVolume, forward_generator, stack_channels

ASSETS_KIND = "asset-pool"
MANIFEST_KIND = "composite-manifest"
STILL_EVAL_KIND = "still-eval"
VIDEO_EVAL_KIND = "video-eval"
VIDEO_SPEC_KIND = "video-eval-spec"

DATA_ROOT_ENV = "BGMATTE_DATA_ROOT"

MODE_CLEAN = "clean"
MODE_M = "M"
MODE_H = "H"

SPLIT_TRAIN = "train"
SPLIT_EVAL = "eval"

_METRIC_KEYS = ("sad", "mse", "grad", "conn")
# Pairing draws use their own sub-stream, like shuffle/crop in training.
_PAIRING_STREAM = 20


def resolve_path(base_dir: str | Path, rel: str | Path) -> Path:
    p = Path(rel)
    if p.is_absolute():
        return p
    root = os.environ.get(DATA_ROOT_ENV)
    if root:
        return Path(root) / p
    return Path(base_dir) / p


def read_json(path: str | Path, expected_kind: str | None = None) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ParameterError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path} is not valid JSON: {exc}") from exc
    if expected_kind is not None and data.get("kind") != expected_kind:
        raise ParameterError(f"{path} has kind {data.get('kind')!r}, expected {expected_kind!r}")
    return data


def write_json(path: str | Path, data: dict) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Dataset construction
# ---------------------------------------------------------------------------


def build_asset_pool(
    out_dir: str | Path, n_fg: int, n_bg: int, dims: tuple[int, int], seed: int
) -> Path:
    """Synthesize foreground/alpha and background pools; returns assets.json."""
    from .synth import synth_background_pool, synth_foreground_pool

    if n_fg < 1 or n_bg < 1:
        raise ParameterError("asset pool needs at least one foreground and one background")
    out_dir = Path(out_dir)
    for sub in ("fg", "alpha", "bg"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    foregrounds = []
    for i, (image, alpha) in enumerate(synth_foreground_pool(n_fg, dims, seed)):
        name = f"fg-{i:04d}"
        save_image(image, out_dir / "fg" / f"{name}.png")
        save_alpha(alpha, out_dir / "alpha" / f"{name}.png")
        foregrounds.append({"name": name, "image": f"fg/{name}.png", "alpha": f"alpha/{name}.png"})
    backgrounds = []
    for i, image in enumerate(synth_background_pool(n_bg, dims, seed)):
        name = f"bg-{i:04d}"
        save_image(image, out_dir / "bg" / f"{name}.png")
        backgrounds.append({"name": name, "image": f"bg/{name}.png"})
    manifest_path = out_dir / "assets.json"
    write_json(
        manifest_path,
        {
            "kind": ASSETS_KIND,
            "version": 1,
            "config": {"n_fg": n_fg, "n_bg": n_bg, "dims": list(dims), "seed": seed},
            "foregrounds": foregrounds,
            "backgrounds": backgrounds,
        },
    )
    return manifest_path


def _train_fg_count(n_fg: int, train_frac: float) -> int:
    if n_fg == 1:
        return 1
    return min(max(1, round(train_frac * n_fg)), n_fg - 1)


def compose_dataset(
    assets_path: str | Path,
    out_dir: str | Path,
    per_fg: int = 2,
    band_radius: int = 3,
    train_frac: float = 0.8,
    seed: int = 0,
) -> Path:
    """Pair each foreground with per_fg random backgrounds, render composites
    and trimaps, and write a self-contained dataset directory.

    Splits are disjoint at the foreground level: an eval foreground never
    appears in training.
    """
    if per_fg < 1:
        raise ParameterError("per_fg must be >= 1")
    if not 0.0 < train_frac <= 1.0:
        raise ParameterError("train_frac must be in (0, 1]")
    assets_path = Path(assets_path)
    assets = read_json(assets_path, ASSETS_KIND)
    base = assets_path.parent
    foregrounds = [
        (load_image(resolve_path(base, f["image"])), load_alpha(resolve_path(base, f["alpha"])))
        for f in assets["foregrounds"]
    ]
    backgrounds = [load_image(resolve_path(base, b["image"])) for b in assets["backgrounds"]]

    out_dir = Path(out_dir)
    for sub in ("fg", "alpha", "bg", "trimap", "comp"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(np.random.SeedSequence([seed, _PAIRING_STREAM]))
    n_train_fg = _train_fg_count(len(foregrounds), train_frac)
    records = []
    index = 0
    for fg_idx, (fg, alpha) in enumerate(foregrounds):
        trimap = generate_trimap(alpha, band_radius)
        split = SPLIT_TRAIN if fg_idx < n_train_fg else SPLIT_EVAL
        for _ in range(per_fg):
            bg = backgrounds[int(rng.integers(len(backgrounds)))]
            composite = compose(fg, bg, alpha)
            name = f"sample-{index:04d}"
            save_image(fg, out_dir / "fg" / f"{name}.png")
            save_alpha(alpha, out_dir / "alpha" / f"{name}.png")
            save_image(bg, out_dir / "bg" / f"{name}.png")
            save_trimap(trimap, out_dir / "trimap" / f"{name}.png")
            save_image(composite, out_dir / "comp" / f"{name}.png")
            records.append(
                {
                    "name": name,
                    "split": split,
                    "foreground": f"fg/{name}.png",
                    "alpha": f"alpha/{name}.png",
                    "background_clean": f"bg/{name}.png",
                    "trimap": f"trimap/{name}.png",
                    "composite": f"comp/{name}.png",
                }
            )
            index += 1

    manifest_path = out_dir / "manifest.json"
    write_json(
        manifest_path,
        {
            "kind": MANIFEST_KIND,
            "version": 1,
            "config": {
                "assets": str(assets_path),
                "per_fg": per_fg,
                "band_radius": band_radius,
                "train_frac": train_frac,
                "seed": seed,
            },
            "samples": records,
        },
    )
    return manifest_path


def add_distorted_backgrounds(
    manifest_path: str | Path,
    mode: str,
    seed: int = 0,
    m_distort_fraction: float = 0.5,
) -> None:
    """Render the distorted-background variant for every sample and record it
    in the manifest (key background_m or background_h). Sample i uses the RNG
    stream derived from (seed, i), so each image distorts independently."""
    if mode not in (MODE_M, MODE_H):
        raise ParameterError(f"distortion mode must be {MODE_M!r} or {MODE_H!r}")
    manifest_path = Path(manifest_path)
    manifest = read_json(manifest_path, MANIFEST_KIND)
    base = manifest_path.parent
    cfg = DistortionConfig(mode=mode, m_distort_fraction=m_distort_fraction, rng_seed=seed)
    key = "background_m" if mode == MODE_M else "background_h"
    sub = "bg_m" if mode == MODE_M else "bg_h"
    (base / sub).mkdir(parents=True, exist_ok=True)
    for i, rec in enumerate(manifest["samples"]):
        bg = load_image(resolve_path(base, rec["background_clean"]))
        distorted = distort_background(bg, cfg, derived_rng(seed, i))
        rel = f"{sub}/{rec['name']}.png"
        save_image(distorted, base / rel)
        rec[key] = rel
    manifest["config"][f"distort_{mode}"] = {
        "seed": seed,
        "m_distort_fraction": m_distort_fraction,
    }
    write_json(manifest_path, manifest)


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def manifest_records(manifest: dict, split: str | None = None) -> list[dict]:
    records = manifest["samples"]
    if split is not None:
        if split not in (SPLIT_TRAIN, SPLIT_EVAL):
            raise ParameterError(f"unknown split {split!r}")
        records = [r for r in records if r["split"] == split]
    return records


def _background_for_mode(record: dict, base: Path, mode: str) -> Image:
    if mode == MODE_CLEAN:
        return load_image(resolve_path(base, record["background_clean"]))
    if mode not in (MODE_M, MODE_H):
        raise ParameterError(f"unknown background mode {mode!r}")
    key = "background_m" if mode == MODE_M else "background_h"
    if key not in record:
        raise ParameterError(
            f"sample {record['name']} has no {key}; run the distortion stage for mode {mode}"
        )
    return load_image(resolve_path(base, record[key]))


def sample_from_record(record: dict, base_dir: str | Path, mode: str = MODE_CLEAN) -> CompositeSample:
    base = Path(base_dir)
    return CompositeSample(
        foreground=load_image(resolve_path(base, record["foreground"])),
        background_clean=load_image(resolve_path(base, record["background_clean"])),
        background_distorted=_background_for_mode(record, base, mode),
        alpha_gt=load_alpha(resolve_path(base, record["alpha"])),
        trimap=load_trimap(resolve_path(base, record["trimap"])),
        composite=load_image(resolve_path(base, record["composite"])),
    )


def eval_inputs_from_record(
    record: dict, base_dir: str | Path, mode: str = MODE_CLEAN
) -> tuple[Image, Image, Trimap, AlphaMatte]:
    """(composite, background, trimap, alpha_gt) for one sample."""
    base = Path(base_dir)
    return (
        load_image(resolve_path(base, record["composite"])),
        _background_for_mode(record, base, mode),
        load_trimap(resolve_path(base, record["trimap"])),
        load_alpha(resolve_path(base, record["alpha"])),
    )


def load_training_set(
    manifest_path: str | Path, mode: str = MODE_CLEAN, split: str | None = SPLIT_TRAIN
) -> list[CompositeSample]:
    manifest_path = Path(manifest_path)
    manifest = read_json(manifest_path, MANIFEST_KIND)
    records = manifest_records(manifest, split)
    if not records:
        raise DegenerateInputError(f"no samples in split {split!r}")
    return [sample_from_record(r, manifest_path.parent, mode) for r in records]


# ---------------------------------------------------------------------------
# Predictors
# ---------------------------------------------------------------------------
#
# A predictor maps (composite, background, trimap, alpha_gt) to an
# AlphaMatte. alpha_gt is provided so reference predictors (oracle, noisy
# baselines) fit the same interface; real models must ignore it.


def oracle_predictor(composite, background, trimap, alpha_gt) -> AlphaMatte:
    """Upper-bound reference: returns the ground truth unchanged."""
    return alpha_gt


def constant_predictor(value: float):
    if not 0.0 <= value <= 1.0:
        raise DomainError("constant alpha must lie in [0, 1]")

    def predict(composite, background, trimap, alpha_gt) -> AlphaMatte:
        return AlphaMatte(np.full((composite.height, composite.width), float(value)))

    return predict


def generator_predictor(gen):
    def predict(composite, background, trimap, alpha_gt) -> AlphaMatte:
        volume = InputVolume(
            stack_channels(composite.pixels, background.pixels, render_trimap_channel(trimap))
        )
        return forward_generator(gen, volume)

    return predict


def checkpoint_predictor(path: str | Path):
    from .trainer import load_generator_any

    return generator_predictor(load_generator_any(path))


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _mean_metrics(rows: list[dict]) -> dict[str, float]:
    return {k: float(np.mean([r[k] for r in rows])) for k in _METRIC_KEYS}


def evaluate_still(
    predictor,
    manifest_path: str | Path,
    mode: str = MODE_CLEAN,
    split: str | None = SPLIT_EVAL,
    eval_region: str = EVAL_UNKNOWN,
    method: str = "generator",
) -> dict:
    """Score a predictor on every manifest sample in the chosen split.

    Per-sample failures are recorded (name plus error string) without
    aborting the sweep; the mean covers the successful samples only.
    """
    manifest_path = Path(manifest_path)
    manifest = read_json(manifest_path, MANIFEST_KIND)
    records = manifest_records(manifest, split)
    if not records:
        raise DegenerateInputError(f"no samples in split {split!r}")
    rows = []
    for rec in records:
        try:
            composite, background, trimap, alpha_gt = eval_inputs_from_record(
                rec, manifest_path.parent, mode
            )
            pred = predictor(composite, background, trimap, alpha_gt)
            report_one = evaluate_pair(pred, alpha_gt, trimap, eval_region)
            rows.append({"name": rec["name"], **report_one.as_dict()})
        except Exception as exc:
            rows.append({"name": rec["name"], "error": f"{type(exc).__name__}: {exc}"})
    ok = [r for r in rows if "error" not in r]
    if not ok:
        raise DegenerateInputError("every sample failed to evaluate")
    return {
        "kind": STILL_EVAL_KIND,
        "method": method,
        "mode": mode,
        "split": split,
        "eval_region": eval_region,
        "n_evaluated": len(ok),
        "n_failed": len(rows) - len(ok),
        "samples": rows,
        "mean": _mean_metrics(ok),
    }


def evaluate_video(
    predictor,
    spec_path: str | Path,
    eval_region: str = EVAL_UNKNOWN,
    method: str = "generator",
) -> dict:
    """Score a predictor frame-by-frame over the sequences of a video spec.

    Sequences aggregate to per-sequence means; a sequence with failed frames
    is marked partial and keeps the mean over its remaining frames.
    """
    spec_path = Path(spec_path)
    spec = read_json(spec_path, VIDEO_SPEC_KIND)
    base = spec_path.parent
    sequences = []
    sequence_means = []
    for seq in spec["sequences"]:
        frame_rows = []
        for frame in seq["frames"]:
            try:
                composite = load_image(resolve_path(base, frame["composite"]))
                background = load_image(resolve_path(base, frame["background"]))
                trimap = load_trimap(resolve_path(base, frame["trimap"]))
                alpha_gt = load_alpha(resolve_path(base, frame["alpha_gt"]))
                pred = predictor(composite, background, trimap, alpha_gt)
                report_one = evaluate_pair(pred, alpha_gt, trimap, eval_region)
                frame_rows.append(report_one.as_dict())
            except Exception as exc:
                frame_rows.append({"error": f"{type(exc).__name__}: {exc}"})
        ok = [r for r in frame_rows if "error" not in r]
        entry = {
            "name": seq["name"],
            "n_frames": len(frame_rows),
            "n_failed": len(frame_rows) - len(ok),
            "partial": len(ok) < len(frame_rows),
            "frames": frame_rows,
            "mean": _mean_metrics(ok) if ok else None,
        }
        if ok:
            sequence_means.append(entry["mean"])
        sequences.append(entry)
    return {
        "kind": VIDEO_EVAL_KIND,
        "method": method,
        "eval_region": eval_region,
        "sequences": sequences,
        "mean": _mean_metrics(sequence_means) if sequence_means else None,
    }


def write_results(path: str | Path, results: dict) -> None:
    write_json(path, results)


def write_sample_csv(results: dict, path: str | Path) -> None:
    """Per-image metric rows plus a final mean row, in benchmark-table layout.
    Values use repr so re-parsing reproduces them exactly."""
    if results.get("kind") != STILL_EVAL_KIND:
        raise ParameterError("per-sample CSV requires still-eval results")
    with open(path, "w") as fh:
        fh.write("name," + ",".join(_METRIC_KEYS) + "\n")
        for row in results["samples"]:
            if "error" in row:
                fh.write(f"{row['name']},error,error,error,error\n")
            else:
                fh.write(row["name"] + "," + ",".join(repr(row[k]) for k in _METRIC_KEYS) + "\n")
        mean = results["mean"]
        fh.write("mean," + ",".join(repr(mean[k]) for k in _METRIC_KEYS) + "\n")


def report(result_paths: list[str | Path], out_csv: str | Path | None = None) -> str:
    """Collect mean rows from eval results into a method-by-metric table.

    Returns the aligned text table; optionally writes a CSV with
    full-precision values (columns method, sad, mse, grad, conn). An empty
    input yields a header-only table."""
    table_rows = []
    for path in result_paths:
        data = read_json(path)
        if data.get("kind") not in (STILL_EVAL_KIND, VIDEO_EVAL_KIND):
            raise ParameterError(f"{path} is not an evaluation result")
        if data.get("mean") is None:
            raise ParameterError(f"{path} has no aggregate mean to report")
        table_rows.append((data["method"], data["mean"]))

    if out_csv is not None:
        with open(out_csv, "w") as fh:
            fh.write("method," + ",".join(_METRIC_KEYS) + "\n")
            for method, mean in table_rows:
                fh.write(method + "," + ",".join(repr(mean[k]) for k in _METRIC_KEYS) + "\n")

    name_width = max([len("method")] + [len(m) for m, _ in table_rows])
    lines = [
        "%-*s %10s %10s %10s %10s" % (name_width, "method", "SAD", "MSE", "GRAD", "CONN")
    ]
    for method, mean in table_rows:
        lines.append(
            "%-*s %10.3f %10.5f %10.3f %10.3f"
            % (name_width, method, mean["sad"], mean["mse"], mean["grad"], mean["conn"])
        )
    return "\n".join(lines)
