"""Training, checkpointing, inference, and evaluation orchestration.

A run is fully determined by its TrainConfig and dataset: the per-epoch
sample order and crop windows derive from (seed, epoch) counters rather
than ambient RNG state, so interrupted runs resume exactly and identical
configs reproduce identical loss curves.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from . import data as data_mod
from . import metrics as metrics_mod
from .features import build_extractor
from .imgio import list_images, load_image, save_image
from .losses import LossWeights, total_loss
from .network import VARIANTS, EnhancementNet, ModelConfig, ModelOutput

CHECKPOINT_FORMAT_VERSION = 1

LOSS_CSV_COLUMNS = (
    "epoch",
    "step",
    "lambda_pixel",
    "lambda_whole",
    "total",
    "l1_pixel",
    "l1_whole",
    "ssim_pixel",
    "ssim_whole",
    "hsv",
    "perceptual",
)


class ConfigError(Exception):
    pass


class CheckpointError(Exception):
    pass


class TrainingError(Exception):
    pass


@dataclass
class TrainConfig:
    """Training protocol defaults plus model/loss/geometry configuration.

    The stock values reproduce the reference protocol (Adam at 1e-4, batch 8,
    50 epochs, resize 350 / crop 320, lambda switch at epoch 20); toy-scale
    runs override sizes and step counts without touching the defaults.
    """

    lr: float = 1e-4
    batch_size: int = 8
    epochs: int = 50
    seed: int = 0
    schedule_epoch: int = 20
    checkpoint_every: int = 10
    max_steps: Optional[int] = None
    device: str = "cpu"
    # model
    hidden_channels: int = 64
    knot_intervals: int = 16
    variant: str = "full"
    # train-time geometry
    resize_to: int = 350
    crop_to: int = 320
    # loss term weights
    w_l1: float = 1.0
    w_ssim: float = 1.0
    w_hsv: float = 1.0
    w_perc: float = 0.5
    perceptual_extractor: str = "vgg19"

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be positive")

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            hidden_channels=self.hidden_channels,
            knot_intervals=self.knot_intervals,
            variant=self.variant,
        )

    def loss_weights(self) -> LossWeights:
        return LossWeights(
            w_l1=self.w_l1,
            w_ssim=self.w_ssim,
            w_hsv=self.w_hsv,
            w_perc=self.w_perc,
            schedule_epoch=self.schedule_epoch,
        )


def parse_config_file(path: str | Path) -> TrainConfig:
    """Read a flat key = value config file; unknown keys are errors."""
    known = {f.name: f for f in fields(TrainConfig)}
    values: dict = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in text.split("=", 1))
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce(known[key].type, raw, key)
    return TrainConfig(**values)


def _coerce(type_name: str, raw: str, key: str):
    t = str(type_name)
    if "Optional[int]" in t or t == "int | None":
        return None if raw.lower() in ("none", "") else int(raw)
    if t == "int":
        return int(raw)
    if t == "float":
        return float(raw)
    if t == "str":
        return raw
    raise ConfigError(f"unsupported config field type for {key}: {type_name}")


@dataclass
class RunManifest:
    """Summary of a training run, written atomically when the run ends."""

    config: dict
    dataset_checksum: str
    n_parameters: int = 0
    epoch_losses: list[dict] = field(default_factory=list)
    final_checkpoint: Optional[str] = None
    loss_csv: Optional[str] = None
    metric_report: Optional[str] = None
    status: str = "incomplete"
    wall_time_s: float = 0.0

    def save(self, path: str | Path) -> None:
        path = Path(path)
        tmp = path.with_suffix(".tmp")
        with open(tmp, "w") as fh:
            json.dump(asdict(self), fh, indent=2)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        with open(path) as fh:
            return cls(**json.load(fh))


def dataset_checksum(root: str | Path, ids: list[str]) -> str:
    digest = hashlib.sha256()
    root = Path(root)
    for pair_id in ids:
        digest.update(pair_id.encode())
        for sub in ("raw", "reference"):
            matches = [p for p in list_images(root / sub) if p.stem == pair_id]
            if matches:
                digest.update(matches[0].read_bytes())
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path: str | Path, model: EnhancementNet, optimizer, cfg: TrainConfig, epoch: int) -> None:
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "model_config": model.config.to_dict(),
        "train_config": asdict(cfg),
        "epoch": epoch,
        "model_state": model.state_dict(),
        "optimizer_state": optimizer.state_dict() if optimizer is not None else None,
    }
    torch.save(payload, path)


def load_checkpoint(path: str | Path) -> dict:
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint {path} has format version {version}, this build reads version {CHECKPOINT_FORMAT_VERSION}"
        )
    for key in ("model_config", "model_state", "epoch"):
        if key not in payload:
            raise CheckpointError(f"checkpoint {path} is missing required field {key!r}")
    return payload


def model_from_checkpoint(payload: dict) -> EnhancementNet:
    model = EnhancementNet(ModelConfig(**payload["model_config"]))
    try:
        model.load_state_dict(payload["model_state"])
    except RuntimeError as exc:
        raise CheckpointError(
            f"checkpoint(v{payload['format_version']}) does not match the architecture it declares "
            f"(knot_intervals/hidden_channels mismatch?): {exc}"
        ) from exc
    model.eval()
    return model


# ---------------------------------------------------------------------------
# training


def _epoch_order(seed: int, epoch: int, n: int) -> list[int]:
    return list(np.random.default_rng([seed, epoch]).permutation(n))


def _crop_seed(seed: int, epoch: int, step: int, index: int) -> int:
    return int(np.random.default_rng([seed, epoch, step, index]).integers(0, 2**31 - 1))


def _batch_tensors(samples: list[data_mod.PairedSample], cfg: TrainConfig, epoch: int, step: int, device) -> tuple:
    raws, refs, ids = [], [], []
    for i, sample in enumerate(samples):
        transformed = data_mod.train_transform(
            sample, seed=_crop_seed(cfg.seed, epoch, step, i), resize_to=cfg.resize_to, crop_to=cfg.crop_to
        )
        raws.append(transformed.raw.transpose(2, 0, 1))
        refs.append(transformed.reference.transpose(2, 0, 1))
        ids.append(sample.id)
    to_t = lambda arrs: torch.tensor(np.stack(arrs), dtype=torch.float32, device=device)
    return to_t(raws), to_t(refs), ids


def train(
    cfg: TrainConfig,
    data_root: str | Path,
    out_dir: str | Path,
    resume_from: str | Path | None = None,
) -> RunManifest:
    """Run the training loop, writing checkpoints, a per-step loss CSV, and a manifest."""
    out_dir = Path(out_dir)
    ckpt_dir = out_dir / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)

    ids = data_mod.list_pair_ids(data_root)
    if not ids:
        raise data_mod.DatasetError(f"no matched raw/reference pairs under {data_root}")

    device = torch.device(cfg.device)
    torch.manual_seed(cfg.seed)
    model = EnhancementNet(cfg.model_config()).to(device)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)

    start_epoch = 0
    if resume_from is not None:
        payload = load_checkpoint(resume_from)
        if payload["model_config"] != model.config.to_dict():
            raise CheckpointError("resume checkpoint was trained with a different model configuration")
        model.load_state_dict(payload["model_state"])
        if payload.get("optimizer_state"):
            optimizer.load_state_dict(payload["optimizer_state"])
        start_epoch = payload["epoch"] + 1

    weights = cfg.loss_weights()
    extractor = build_extractor(cfg.perceptual_extractor, seed=cfg.seed)
    if extractor is not None:
        extractor = extractor.to(device)

    manifest = RunManifest(
        config=asdict(cfg),
        dataset_checksum=dataset_checksum(data_root, ids),
        n_parameters=model.n_parameters(),
    )
    manifest_path = out_dir / "manifest.json"
    steps_per_epoch = math.ceil(len(ids) / cfg.batch_size)
    global_step = start_epoch * steps_per_epoch
    started = time.time()

    csv_mode = "a" if (resume_from is not None and (out_dir / "losses.csv").exists()) else "w"
    loss_file = open(out_dir / "losses.csv", csv_mode, newline="")
    loss_writer = csv.writer(loss_file)
    if csv_mode == "w":
        loss_writer.writerow(LOSS_CSV_COLUMNS)

    last_epoch = start_epoch - 1
    try:
        for epoch in range(start_epoch, cfg.epochs):
            if cfg.max_steps is not None and global_step >= cfg.max_steps:
                break
            last_epoch = epoch
            order = _epoch_order(cfg.seed, epoch, len(ids))
            epoch_sums: dict[str, float] = {}
            epoch_steps = 0
            model.train()
            for step in range(steps_per_epoch):
                if cfg.max_steps is not None and global_step >= cfg.max_steps:
                    break
                batch_ids = [ids[i] for i in order[step * cfg.batch_size : (step + 1) * cfg.batch_size]]
                if not batch_ids:
                    break
                samples = [data_mod.load_pair(data_root, pid) for pid in batch_ids]
                raw, ref, _ = _batch_tensors(samples, cfg, epoch, step, device)

                out: ModelOutput = model(raw)
                breakdown = total_loss(out.rgb_branch, out.enhanced, ref, weights, epoch, extractor)
                if not torch.isfinite(breakdown.total):
                    manifest.status = f"aborted: non-finite loss at epoch {epoch} step {step}"
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch}, step {step}; offending batch ids: {batch_ids}"
                    )

                optimizer.zero_grad()
                breakdown.total.backward()
                optimizer.step()

                lam_p, lam_w = weights.lambdas(epoch)
                parts = breakdown.as_floats()
                loss_writer.writerow(
                    [epoch, global_step, lam_p, lam_w] + [f"{parts[k]:.8f}" for k in LOSS_CSV_COLUMNS[4:]]
                )
                loss_file.flush()
                for key, value in parts.items():
                    epoch_sums[key] = epoch_sums.get(key, 0.0) + value
                epoch_steps += 1
                global_step += 1

            if epoch_steps:
                manifest.epoch_losses.append(
                    {"epoch": epoch, **{f"mean_{k}": v / epoch_steps for k, v in epoch_sums.items()}}
                )
            if (epoch + 1) % cfg.checkpoint_every == 0:
                save_checkpoint(ckpt_dir / f"epoch_{epoch:04d}.pt", model, optimizer, cfg, epoch)

        final_path = ckpt_dir / "final.pt"
        save_checkpoint(final_path, model, optimizer, cfg, max(last_epoch, 0))
        manifest.final_checkpoint = str(final_path)
        manifest.status = "complete"
        return manifest
    finally:
        loss_file.close()
        manifest.loss_csv = str(out_dir / "losses.csv")
        manifest.wall_time_s = time.time() - started
        manifest.save(manifest_path)


# ---------------------------------------------------------------------------
# inference


def _to_batch(img: np.ndarray, device) -> torch.Tensor:
    return torch.tensor(img.transpose(2, 0, 1), dtype=torch.float32, device=device)[None]


def enhance_array(model: EnhancementNet, img: np.ndarray) -> ModelOutput:
    """Run one HxWx3 [0,1] array through the model in inference mode."""
    model.eval()
    with torch.no_grad():
        out = model(_to_batch(img, next(model.parameters()).device))
    return out


def _write_curve_csv(path: Path, curves) -> None:
    names = ("value_on_value", "sat_on_sat", "sat_on_hue", "hue_on_hue")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for name, knots in zip(names, curves.all_curves()):
            writer.writerow([name] + [f"{float(k):.8f}" for k in knots.reshape(-1)])


def enhance(
    checkpoint: str | Path,
    in_path: str | Path,
    out_path: str | Path,
    dump_intermediates: bool = False,
    dump_curves: bool = False,
) -> list[Path]:
    """Enhance one image or a directory of images; returns the written output paths."""
    payload = load_checkpoint(checkpoint)
    model = model_from_checkpoint(payload)

    in_path, out_path = Path(in_path), Path(out_path)
    if in_path.is_dir():
        inputs = list_images(in_path)
        out_dir = out_path
        out_dir.mkdir(parents=True, exist_ok=True)
        targets = [out_dir / p.name for p in inputs]
    else:
        inputs = [in_path]
        if out_path.is_dir():
            targets = [out_path / in_path.name]
        else:
            out_path.parent.mkdir(parents=True, exist_ok=True)
            targets = [out_path]

    written = []
    for src, dst in zip(inputs, targets):
        out = enhance_array(model, load_image(src))
        to_img = lambda t: t[0].cpu().numpy().transpose(1, 2, 0)
        save_image(dst, to_img(out.enhanced))
        written.append(dst)
        stem = dst.with_suffix("")
        if dump_intermediates:
            save_image(f"{stem}_rgb_branch.png", to_img(out.rgb_branch))
            if out.hsv_branch_rgb is not None:
                save_image(f"{stem}_hsv_branch.png", to_img(out.hsv_branch_rgb))
            if out.attention is not None:
                save_image(f"{stem}_attention_rgb.png", to_img(out.attention[:, :3]))
                save_image(f"{stem}_attention_hsv.png", to_img(out.attention[:, 3:]))
        if (dump_intermediates or dump_curves) and out.curves is not None:
            _write_curve_csv(Path(f"{stem}_curves.csv"), out.curves)
    return written


# ---------------------------------------------------------------------------
# evaluation and ablation


def evaluate_model(model: EnhancementNet, test_root: str | Path) -> metrics_mod.MetricReport:
    """Enhance every test raw image and score it against its reference."""
    report = metrics_mod.MetricReport()
    for sample in data_mod.load_pairs(test_root, split="test"):
        out = enhance_array(model, sample.raw)
        enhanced = out.enhanced[0].cpu().numpy().transpose(1, 2, 0).astype(np.float64)
        report.rows.append(metrics_mod.metrics_for_pair(sample.id, enhanced, sample.reference))
    return report.finalize()


def run_ablation(
    cfg: TrainConfig,
    variant: str,
    train_root: str | Path,
    test_root: str | Path,
    out_dir: str | Path,
) -> metrics_mod.MetricReport:
    """Train the requested variant and report metrics on the held-out split."""
    if variant not in VARIANTS:
        raise ConfigError(f"ablation variant must be one of {VARIANTS}, got {variant!r}")
    out_dir = Path(out_dir)
    manifest = train(replace(cfg, variant=variant), train_root, out_dir)
    model = model_from_checkpoint(load_checkpoint(manifest.final_checkpoint))
    report = evaluate_model(model, test_root)
    report_path = out_dir / "metrics.csv"
    report.to_csv(report_path)
    manifest.metric_report = str(report_path)
    manifest.save(out_dir / "manifest.json")
    return report
