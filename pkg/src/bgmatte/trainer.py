"""Adversarial training loop for the generator/discriminator pair.

Each step runs one discriminator update (on a detached fake composite) and
then one generator update. All randomness is derived from named seed
sequences keyed by (seed, epoch) for shuffling and (seed, step) for crop
placement, so a run can resume from a checkpoint bit-exactly: nothing about
the schedule lives in mutable RNG state.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from . import checkpoint as ckpt
from .errors import CheckpointError, ParameterError, TrainingDivergenceError
from .imagecore import (
    AlphaMatte,
    CompositeSample,
    Image,
    Trimap,
    render_trimap_channel,
)
from .losses import alpha_loss, comp_loss, gan_loss_d, gan_loss_g, total_loss
from .netdisc import (
    Discriminator,
    DiscriminatorConfig,
    build_discriminator,
    compose_tensors,
    volume_tensors,
)
from .netgen import (
    TOTAL_STRIDE,
    Generator,
    GeneratorConfig,
    build_generator,
    generator_config_from_dict,
    load_state_arrays,
    state_arrays,
)

LOSS_COLUMNS = ("step", "l_alpha", "l_comp", "l_gan_g", "l_gan_d", "l_total")

# Sub-stream tags so shuffle and crop randomness never collide.
_SHUFFLE_STREAM = 1
_CROP_STREAM = 2


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 2e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    epochs: int = 1
    batch_size: int = 2
    crop_size: int = 64
    seed: int = 0
    checkpoint_every: int = 0
    d_steps_per_g: int = 1
    loss_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        # learning_rate 0 is allowed: it freezes both nets, which is useful
        # for smoke tests that must leave parameters untouched.
        if self.learning_rate < 0:
            raise ParameterError("learning_rate must be >= 0")
        for beta in (self.adam_beta1, self.adam_beta2):
            if not 0.0 <= beta < 1.0:
                raise ParameterError("Adam betas must lie in [0, 1)")
        if self.epochs < 1:
            raise ParameterError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")
        if self.crop_size < TOTAL_STRIDE or self.crop_size % TOTAL_STRIDE:
            raise ParameterError(f"crop_size must be a positive multiple of {TOTAL_STRIDE}")
        if self.checkpoint_every < 0:
            raise ParameterError("checkpoint_every must be >= 0 (0 = final only)")
        if self.d_steps_per_g < 1:
            raise ParameterError("d_steps_per_g must be >= 1")
        if len(self.loss_weights) != 3 or any(w < 0 for w in self.loss_weights):
            raise ParameterError("loss_weights must be three values >= 0")


@dataclass
class TrainState:
    cfg: TrainConfig
    generator: Generator
    discriminator: Discriminator
    opt_g: torch.optim.Adam
    opt_d: torch.optim.Adam
    step: int = 0
    epoch: int = 0
    loss_rows: list[tuple[float, ...]] = field(default_factory=list)


def _make_optimizer(module: torch.nn.Module, cfg: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(
        module.parameters(), lr=cfg.learning_rate, betas=(cfg.adam_beta1, cfg.adam_beta2)
    )


def init_state(
    cfg: TrainConfig,
    g_cfg: GeneratorConfig | None = None,
    d_cfg: DiscriminatorConfig | None = None,
) -> TrainState:
    """Seeded construction: identical seeds give identical initial weights."""
    torch.manual_seed(cfg.seed)
    gen = build_generator(g_cfg or GeneratorConfig())
    disc = build_discriminator(d_cfg or DiscriminatorConfig())
    return TrainState(
        cfg=cfg,
        generator=gen,
        discriminator=disc,
        opt_g=_make_optimizer(gen, cfg),
        opt_d=_make_optimizer(disc, cfg),
    )


def shuffle_rng(seed: int, epoch: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, _SHUFFLE_STREAM, epoch]))


def crop_rng(seed: int, step: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, _CROP_STREAM, step]))


def crop_sample(sample: CompositeSample, size: int, rng: np.random.Generator) -> CompositeSample:
    """Crop a size x size window whose center is a random unknown-region
    pixel (uniform over the image when the trimap has no unknowns)."""
    h, w = sample.alpha_gt.height, sample.alpha_gt.width
    if size > h or size > w:
        raise ParameterError(f"crop size {size} exceeds sample dims {h}x{w}")
    unknowns = np.argwhere(sample.trimap.unknown_mask())
    if len(unknowns):
        cy, cx = unknowns[rng.integers(len(unknowns))]
    else:
        cy, cx = rng.integers(h), rng.integers(w)
    y0 = int(np.clip(cy - size // 2, 0, h - size))
    x0 = int(np.clip(cx - size // 2, 0, w - size))
    ys, xs = slice(y0, y0 + size), slice(x0, x0 + size)
    return CompositeSample(
        foreground=Image(sample.foreground.pixels[ys, xs]),
        background_clean=Image(sample.background_clean.pixels[ys, xs]),
        background_distorted=Image(sample.background_distorted.pixels[ys, xs]),
        alpha_gt=AlphaMatte(sample.alpha_gt.values[ys, xs]),
        trimap=Trimap(sample.trimap.labels[ys, xs]),
        composite=Image(sample.composite.pixels[ys, xs]),
        quantization=sample.quantization,
    )


def _stack_rgb(samples: Sequence[CompositeSample], pick) -> torch.Tensor:
    arrs = [pick(s).pixels.transpose(2, 0, 1) for s in samples]
    return torch.from_numpy(np.stack(arrs)).to(torch.float32)


def _stack_plane(planes: Sequence[np.ndarray]) -> torch.Tensor:
    return torch.from_numpy(np.stack(planes)[:, None, :, :]).to(torch.float32)


def batch_tensors(samples: Sequence[CompositeSample]) -> dict[str, torch.Tensor]:
    """Batched float32 channel groups for one step."""
    return {
        "fg": _stack_rgb(samples, lambda s: s.foreground),
        "bg_clean": _stack_rgb(samples, lambda s: s.background_clean),
        "bg_distorted": _stack_rgb(samples, lambda s: s.background_distorted),
        "composite": _stack_rgb(samples, lambda s: s.composite),
        "alpha_gt": _stack_plane([s.alpha_gt.values for s in samples]),
        "trimap": _stack_plane([render_trimap_channel(s.trimap) for s in samples]),
    }


def train_step(state: TrainState, samples: Sequence[CompositeSample]):
    """One discriminator update followed by one generator update.

    Returns the generator-side LossBreakdown; appends a full loss row
    (including the discriminator term) to the state history.
    """
    cfg = state.cfg
    gen, disc = state.generator, state.discriminator
    gen.train()
    disc.train()
    t = batch_tensors(samples)
    x = volume_tensors(t["composite"], t["bg_distorted"], t["trimap"])
    alpha_pred = gen(x)

    for _ in range(cfg.d_steps_per_g):
        real = volume_tensors(
            compose_tensors(t["fg"], t["bg_clean"], t["alpha_gt"]), t["bg_distorted"], t["trimap"]
        )
        fake = volume_tensors(
            compose_tensors(t["fg"], t["bg_clean"], alpha_pred.detach()),
            t["bg_distorted"],
            t["trimap"],
        )
        l_d = gan_loss_d(disc(real), disc(fake))
        state.opt_d.zero_grad()
        l_d.backward()
        state.opt_d.step()

    l_a = alpha_loss(alpha_pred, t["alpha_gt"])
    l_c = comp_loss(alpha_pred, t["alpha_gt"], t["fg"], t["bg_clean"])
    fake = volume_tensors(
        compose_tensors(t["fg"], t["bg_clean"], alpha_pred), t["bg_distorted"], t["trimap"]
    )
    l_g = gan_loss_g(disc(fake))
    w_a, w_c, w_g = cfg.loss_weights
    objective = w_a * l_a + w_c * l_c + w_g * l_g
    state.opt_g.zero_grad()
    objective.backward()
    state.opt_g.step()

    breakdown = total_loss(
        float(l_a.detach()), float(l_c.detach()), float(l_g.detach()), cfg.loss_weights
    )
    l_gan_d = float(l_d.detach())
    values = (breakdown.l_alpha, breakdown.l_comp, breakdown.l_gan, l_gan_d, breakdown.l_total)
    if not all(math.isfinite(v) for v in values):
        raise TrainingDivergenceError(
            f"non-finite loss at step {state.step + 1}",
            diagnostics={
                "step": state.step + 1,
                "l_alpha": breakdown.l_alpha,
                "l_comp": breakdown.l_comp,
                "l_gan_g": breakdown.l_gan,
                "l_gan_d": l_gan_d,
                "l_total": breakdown.l_total,
            },
        )
    state.step += 1
    state.loss_rows.append((float(state.step),) + values)
    return breakdown


def steps_per_epoch(n_samples: int, batch_size: int) -> int:
    return math.ceil(n_samples / batch_size)


def write_loss_csv(path: str | Path, rows: Sequence[tuple[float, ...]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOSS_COLUMNS)
        for row in rows:
            writer.writerow([int(row[0])] + [repr(v) for v in row[1:]])


def train(
    cfg: TrainConfig,
    dataset: Sequence[CompositeSample],
    out_dir: str | Path,
    g_cfg: GeneratorConfig | None = None,
    d_cfg: DiscriminatorConfig | None = None,
    resume_from: str | Path | None = None,
) -> TrainState:
    """Run the full schedule, writing losses.csv, periodic train-state
    checkpoints, and final train-state plus generator-only checkpoints.

    With resume_from, all configuration comes from the checkpoint and the
    loop continues at the stored step; the result is bit-identical to the
    uninterrupted run.
    """
    if not len(dataset):
        raise ParameterError("dataset is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if resume_from is not None:
        state = load_train_state(resume_from)
        cfg = state.cfg
    else:
        state = init_state(cfg, g_cfg, d_cfg)

    per_epoch = steps_per_epoch(len(dataset), cfg.batch_size)
    total_steps = cfg.epochs * per_epoch
    while state.step < total_steps:
        epoch = state.step // per_epoch
        position = state.step % per_epoch
        perm = shuffle_rng(cfg.seed, epoch).permutation(len(dataset))
        indices = perm[position * cfg.batch_size : position * cfg.batch_size + cfg.batch_size]
        rng = crop_rng(cfg.seed, state.step)
        samples = [crop_sample(dataset[int(i)], cfg.crop_size, rng) for i in indices]
        state.epoch = epoch
        train_step(state, samples)
        if cfg.checkpoint_every and state.step % cfg.checkpoint_every == 0 and state.step < total_steps:
            save_train_state(out_dir / f"state-{state.step:06d}.ckpt", state)

    write_loss_csv(out_dir / "losses.csv", state.loss_rows)
    save_train_state(out_dir / "state-final.ckpt", state)
    from .netgen import save_generator

    save_generator(out_dir / "generator-final.ckpt", state.generator)
    return state


# ---------------------------------------------------------------------------
# Train-state checkpointing
# ---------------------------------------------------------------------------


def _optimizer_arrays(prefix: str, opt: torch.optim.Adam) -> tuple[dict[str, np.ndarray], list]:
    arrays: dict[str, np.ndarray] = {}
    sd = opt.state_dict()
    for idx, slot in sd["state"].items():
        for key, val in slot.items():
            arrays[f"{prefix}/{idx}/{key}"] = torch.as_tensor(val).detach().cpu().numpy()
    return arrays, sd["param_groups"]


def _optimizer_from_arrays(
    opt: torch.optim.Adam, prefix: str, arrays: dict[str, np.ndarray], groups: list
) -> None:
    state: dict[int, dict[str, torch.Tensor]] = {}
    lead = f"{prefix}/"
    for name, arr in arrays.items():
        if not name.startswith(lead):
            continue
        _, idx, key = name.split("/")
        # ascontiguousarray promotes 0-dim to 1-dim; reshape restores Adam's
        # scalar step tensors so a resave stays byte-identical.
        tensor = torch.from_numpy(np.ascontiguousarray(arr)).reshape(arr.shape)
        state.setdefault(int(idx), {})[key] = tensor
    groups = [dict(g, betas=tuple(g["betas"])) for g in groups]
    opt.load_state_dict({"state": state, "param_groups": groups})


def save_train_state(path: str | Path, state: TrainState) -> None:
    arrays: dict[str, np.ndarray] = {}
    for name, arr in state_arrays(state.generator).items():
        arrays[f"g/{name}"] = arr
    for name, arr in state_arrays(state.discriminator).items():
        arrays[f"d/{name}"] = arr
    opt_g_arrays, opt_g_groups = _optimizer_arrays("optg", state.opt_g)
    opt_d_arrays, opt_d_groups = _optimizer_arrays("optd", state.opt_d)
    arrays.update(opt_g_arrays)
    arrays.update(opt_d_arrays)
    arrays["loss_history"] = np.asarray(state.loss_rows, dtype=np.float64).reshape(
        len(state.loss_rows), len(LOSS_COLUMNS)
    )
    arrays["torch_rng"] = torch.get_rng_state().numpy()
    config = {
        "kind": "train-state",
        "step": state.step,
        "epoch": state.epoch,
        "train_config": asdict(state.cfg),
        "generator_config": asdict(state.generator.cfg),
        "discriminator_config": asdict(state.discriminator.cfg),
        "opt_g_param_groups": opt_g_groups,
        "opt_d_param_groups": opt_d_groups,
    }
    ckpt.save_checkpoint(path, config, arrays)


def train_config_from_dict(raw: dict) -> TrainConfig:
    raw = dict(raw)
    raw["loss_weights"] = tuple(raw["loss_weights"])
    return TrainConfig(**raw)


def load_train_state(path: str | Path) -> TrainState:
    config, arrays = ckpt.load_checkpoint(path)
    if config.get("kind") != "train-state":
        raise CheckpointError(f"{path} is not a train-state checkpoint (kind={config.get('kind')!r})")
    cfg = train_config_from_dict(config["train_config"])
    gen = build_generator(generator_config_from_dict(config["generator_config"]))
    disc = build_discriminator(DiscriminatorConfig(**config["discriminator_config"]))
    load_state_arrays(gen, {n[2:]: a for n, a in arrays.items() if n.startswith("g/")})
    load_state_arrays(disc, {n[2:]: a for n, a in arrays.items() if n.startswith("d/")})
    opt_g = _make_optimizer(gen, cfg)
    opt_d = _make_optimizer(disc, cfg)
    _optimizer_from_arrays(opt_g, "optg", arrays, config["opt_g_param_groups"])
    _optimizer_from_arrays(opt_d, "optd", arrays, config["opt_d_param_groups"])
    torch.set_rng_state(torch.from_numpy(np.ascontiguousarray(arrays["torch_rng"])))
    rows = [tuple(row) for row in arrays["loss_history"]]
    return TrainState(
        cfg=cfg,
        generator=gen,
        discriminator=disc,
        opt_g=opt_g,
        opt_d=opt_d,
        step=int(config["step"]),
        epoch=int(config["epoch"]),
        loss_rows=rows,
    )


def load_generator_any(path: str | Path) -> Generator:
    """Load a generator from either a generator-only or a train-state file."""
    config, arrays = ckpt.load_checkpoint(path)
    kind = config.get("kind")
    if kind == "generator":
        from .netgen import load_generator

        return load_generator(path)
    if kind == "train-state":
        gen = build_generator(generator_config_from_dict(config["generator_config"]))
        load_state_arrays(gen, {n[2:]: a for n, a in arrays.items() if n.startswith("g/")})
        gen.eval()
        return gen
    raise CheckpointError(f"{path} holds no generator (kind={kind!r})")
