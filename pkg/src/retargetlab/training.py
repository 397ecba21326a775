"""Adversarial training: pair sampling, Adam, alternating D/G updates, and the
deterministic trace/checkpoint machinery.

Every step draws two distinct training characters, updates the discriminator
on real target clips vs freshly recomputed (detached) translations, then
updates the encoder/decoder on the mode's objective with the discriminator
frozen. Single-threaded, the whole run is a pure function of (dataset,
config): two runs with one seed produce bitwise-identical traces and
checkpoints, and a run resumed from a checkpoint reproduces the uninterrupted
trace tail.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape, Tensor, backward
from .datagen import TRAIN, Dataset
from .errors import ConfigError, NonFiniteError, TrainingAborted, ValidationError
from .models import (
    HyperParams,
    ModelParams,
    decode,
    discriminate,
    encode,
    init_params,
    lift_group,
    load_checkpoint,
    save_checkpoint,
    translate,
)
from .layers import Topology
from .objectives import (
    MODES,
    LossBreakdown,
    LossWeights,
    loss_cycle,
    loss_discriminator,
    loss_generator_adv,
    loss_latent_cycle,
    loss_vae,
    total_generator_objective,
)

ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    mode: str = "unit"
    steps: int = 500
    batch_size: int = 4
    learning_rate: float = 5e-4
    beta1: float = 0.5
    beta2: float = 0.999
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    checkpoint_every: int = 100
    dataset_path: str | None = None
    out_dir: str | None = None
    hyper: HyperParams = field(default_factory=HyperParams)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (self.learning_rate > 0.0):
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not (0.0 <= b < 1.0):
                raise ConfigError(f"{name} must be in [0, 1), got {b}")
        if self.checkpoint_every < 0:
            raise ConfigError(f"checkpoint_every must be >= 0, got {self.checkpoint_every}")

    def to_mapping(self) -> dict[str, str]:
        """Flat key/value view matching the config-file keys."""
        return {
            "mode": self.mode,
            "steps": str(self.steps),
            "batch_size": str(self.batch_size),
            "learning_rate": repr(self.learning_rate),
            "beta1": repr(self.beta1),
            "beta2": repr(self.beta2),
            "lambda_cycle": repr(self.weights.cycle),
            "lambda_vae": repr(self.weights.vae),
            "lambda_latent": repr(self.weights.latent_cycle),
            "lambda_z": repr(self.weights.latent_penalty),
            "seed": str(self.seed),
            "checkpoint_every": str(self.checkpoint_every),
            "dataset": self.dataset_path or "",
            "out": self.out_dir or "",
            "channels": ",".join(str(c) for c in self.hyper.channels),
            "latent_dim": str(self.hyper.latent_dim),
            "clip_len": str(self.hyper.clip_len),
            "variant": self.hyper.variant,
        }


_CONFIG_KEYS = set(TrainConfig().to_mapping().keys())


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse the `key = value` config format; unknown keys are errors."""
    mapping: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{source}: line {lineno}: unknown key {key!r}")
        if key in mapping:
            raise ConfigError(f"{source}: line {lineno}: duplicate key {key!r}")
        mapping[key] = value
    return mapping


def config_from_mapping(mapping: dict[str, str]) -> TrainConfig:
    base = TrainConfig().to_mapping()
    unknown = set(mapping) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    base.update({k: v for k, v in mapping.items() if v != ""})
    try:
        hyper = HyperParams(
            tuple(int(c) for c in base["channels"].split(",")),
            int(base["latent_dim"]),
            int(base["clip_len"]),
            base["variant"],
        )
        return TrainConfig(
            mode=base["mode"],
            steps=int(base["steps"]),
            batch_size=int(base["batch_size"]),
            learning_rate=float(base["learning_rate"]),
            beta1=float(base["beta1"]),
            beta2=float(base["beta2"]),
            weights=LossWeights(
                cycle=float(base["lambda_cycle"]),
                vae=float(base["lambda_vae"]),
                latent_cycle=float(base["lambda_latent"]),
                latent_penalty=float(base["lambda_z"]),
            ),
            seed=int(base["seed"]),
            checkpoint_every=int(base["checkpoint_every"]),
            dataset_path=base["dataset"] or None,
            out_dir=base["out"] or None,
            hyper=hyper,
        )
    except (ValueError, ValidationError) as exc:
        raise ConfigError(f"bad config value: {exc}") from None


def write_config(path, config: TrainConfig) -> None:
    with open(path, "w") as fh:
        for key, value in config.to_mapping().items():
            fh.write(f"{key} = {value}\n")


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    """Bias-corrected adaptive-moment accumulators mirroring one param group."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @staticmethod
    def init_like(params: dict[str, np.ndarray]) -> "AdamState":
        return AdamState(
            {k: np.zeros_like(p) for k, p in params.items()},
            {k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_update(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    learning_rate: float,
    beta1: float = 0.5,
    beta2: float = 0.999,
    eps: float = ADAM_EPS,
) -> None:
    """One in-place Adam step over a parameter group."""
    state.step += 1
    t = state.step
    for key, p in params.items():
        g = grads[key]
        if g.shape != p.shape:
            raise ValidationError(
                f"gradient for {key} has shape {g.shape}, parameter has {p.shape}"
            )
        m = state.m[key]
        v = state.v[key]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        p -= learning_rate * m_hat / (np.sqrt(v_hat) + eps)


# ---------------------------------------------------------------------------
# batch sampling


@dataclass
class PairBatch:
    char_a: str
    char_b: str
    x_a: np.ndarray  # (B, T, N, 3) raw positions
    x_b: np.ndarray
    lengths_a: np.ndarray
    lengths_b: np.ndarray


def _fit_window(frames: np.ndarray, clip_len: int, rng: np.random.Generator | None) -> np.ndarray:
    """Crop at a (seeded) random offset, or pad by repeating the last frame."""
    t = frames.shape[0]
    if t >= clip_len:
        offset = 0 if rng is None else int(rng.integers(0, t - clip_len + 1))
        return frames[offset : offset + clip_len]
    pad = np.repeat(frames[-1:], clip_len - t, axis=0)
    return np.concatenate([frames, pad], axis=0)


def sample_pair_batch(
    dataset: Dataset, batch_size: int, clip_len: int, rng: np.random.Generator
) -> PairBatch:
    """Two distinct train characters with batch_size clips each, windowed to clip_len."""
    train_ids = dataset.split_characters(TRAIN)
    if len(train_ids) < 2:
        raise ValidationError(
            f"pair sampling needs at least 2 train characters, found {len(train_ids)}"
        )
    picks = rng.choice(len(train_ids), size=2, replace=False)
    chars = [train_ids[int(k)] for k in picks]
    stacks = []
    for char_id in chars:
        pool = dataset.clips_of(char_id, TRAIN)
        if len(pool) >= batch_size:
            idx = rng.choice(len(pool), size=batch_size, replace=False)
        else:
            idx = rng.integers(0, len(pool), size=batch_size)
        stacks.append(
            np.stack([_fit_window(pool[int(i)].motion.frames, clip_len, rng) for i in idx])
        )
    spec_a = dataset.character(chars[0])
    spec_b = dataset.character(chars[1])
    return PairBatch(
        chars[0], chars[1], stacks[0], stacks[1],
        spec_a.skeleton.bone_length, spec_b.skeleton.bone_length,
    )


def _center(batch: np.ndarray) -> np.ndarray:
    return batch - batch[:, :, :1, :]


# ---------------------------------------------------------------------------
# one optimization step


def train_step(
    params: ModelParams,
    batch: PairBatch,
    config: TrainConfig,
    opt: dict[str, AdamState],
) -> LossBreakdown:
    """One discriminator update followed by one generator update (1:1)."""
    topo = Topology(params.parents)
    hyper = params.hyper
    w = config.weights
    xa = _center(batch.x_a)
    xb = _center(batch.x_b)
    la = Tensor.constant(batch.lengths_a)
    lb = Tensor.constant(batch.lengths_b)

    # discriminator step: generator outputs recomputed and detached
    fake_detached = translate(
        Tensor.constant(xa), lb, lift_group(params.enc, None),
        lift_group(params.dec, None), topo, hyper,
    ).data
    tape = Tape()
    disc_t = lift_group(params.disc, tape)
    real_scores = discriminate(Tensor.constant(xb), lb, disc_t, topo, hyper)
    fake_scores = discriminate(Tensor.constant(fake_detached), lb, disc_t, topo, hyper)
    d_loss = loss_discriminator(real_scores, fake_scores)
    grads = backward(tape, d_loss)
    adam_update(
        params.disc, {k: grads.wrt(t) for k, t in disc_t.items()}, opt["disc"],
        config.learning_rate, config.beta1, config.beta2,
    )

    # generator step: discriminator parameters frozen as constants
    tape = Tape()
    enc_t = lift_group(params.enc, tape)
    dec_t = lift_group(params.dec, tape)
    disc_frozen = lift_group(params.disc, None)
    xa_t = Tensor.constant(xa)
    xb_t = Tensor.constant(xb)
    z_a = encode(xa_t, enc_t, topo, hyper)
    fake_b = decode(z_a, lb, dec_t, topo, hyper)
    adv = loss_generator_adv(discriminate(fake_b, lb, disc_frozen, topo, hyper))
    extras: dict[str, float] = {}
    if config.mode == "cyclegan":
        z_b = encode(xb_t, enc_t, topo, hyper)
        fake_a = decode(z_b, la, dec_t, topo, hyper)
        roundtrip_a = decode(encode(fake_b, enc_t, topo, hyper), la, dec_t, topo, hyper)
        roundtrip_b = decode(encode(fake_a, enc_t, topo, hyper), lb, dec_t, topo, hyper)
        cycle = 0.5 * (loss_cycle(xa_t, roundtrip_a) + loss_cycle(xb_t, roundtrip_b))
        total, breakdown = total_generator_objective(
            "cyclegan", adv, cycle=cycle, weights=w
        )
    else:
        z_b = encode(xb_t, enc_t, topo, hyper)
        recon_a = decode(z_a, la, dec_t, topo, hyper)
        recon_b = decode(z_b, lb, dec_t, topo, hyper)
        vae = 0.5 * (
            loss_vae(xa_t, recon_a, z_a, w.latent_penalty)
            + loss_vae(xb_t, recon_b, z_b, w.latent_penalty)
        )
        fake_a = decode(z_b, la, dec_t, topo, hyper)
        latent = 0.5 * (
            loss_latent_cycle(z_a, encode(fake_b, enc_t, topo, hyper))
            + loss_latent_cycle(z_b, encode(fake_a, enc_t, topo, hyper))
        )
        total, breakdown = total_generator_objective(
            "unit", adv, vae=vae, latent_cycle=latent, weights=w
        )
        extras["vae_recon"] = 0.5 * (
            float(np.mean((xa - recon_a.data) ** 2))
            + float(np.mean((xb - recon_b.data) ** 2))
        )
    grads = backward(tape, total)
    adam_update(
        params.enc, {k: grads.wrt(t) for k, t in enc_t.items()}, opt["enc"],
        config.learning_rate, config.beta1, config.beta2,
    )
    adam_update(
        params.dec, {k: grads.wrt(t) for k, t in dec_t.items()}, opt["dec"],
        config.learning_rate, config.beta1, config.beta2,
    )
    breakdown.adv_d = d_loss.item()
    breakdown.extras = extras
    for name, value in [("adv_d", breakdown.adv_d), ("total_g", breakdown.total_g)]:
        if not np.isfinite(value):
            raise NonFiniteError(f"{name} is non-finite")
    return breakdown


# ---------------------------------------------------------------------------
# full loop with trace and checkpoints


@dataclass
class TrainResult:
    params: ModelParams
    opt: dict[str, AdamState]
    rng: np.random.Generator
    trace: list[tuple[int, LossBreakdown]]
    final_step: int


def fit_models(
    dataset: Dataset,
    config: TrainConfig,
    params: ModelParams | None = None,
    opt: dict[str, AdamState] | None = None,
    rng: np.random.Generator | None = None,
    start_step: int = 0,
    on_step=None,
) -> TrainResult:
    """Run train_step for steps (start_step+1 .. config.steps); pure in-memory."""
    dataset.validate()
    if params is None:
        canonical = dataset.characters[0].skeleton
        params = init_params(
            config.hyper, canonical.parent, config.seed, canonical.joint_name
        )
    if opt is None:
        opt = {
            "enc": AdamState.init_like(params.enc),
            "dec": AdamState.init_like(params.dec),
            "disc": AdamState.init_like(params.disc),
        }
    if rng is None:
        rng = np.random.default_rng(config.seed)
    trace: list[tuple[int, LossBreakdown]] = []
    for step in range(start_step + 1, config.steps + 1):
        batch = sample_pair_batch(dataset, config.batch_size, config.hyper.clip_len, rng)
        try:
            breakdown = train_step(params, batch, config, opt)
        except NonFiniteError as exc:
            raise TrainingAborted(f"step {step}: {exc}") from exc
        trace.append((step, breakdown))
        if on_step is not None:
            on_step(step, breakdown)
    return TrainResult(params, opt, rng, trace, config.steps)


def _trace_line(step: int, breakdown: LossBreakdown) -> tuple[list[str], str]:
    cols = breakdown.as_columns()
    header = ["step"] + [name for name, _ in cols]
    row = [str(step)] + [repr(value) for _, value in cols]
    return header, "\t".join(row)


def _opt_state_arrays(opt: dict[str, AdamState]) -> dict[str, np.ndarray]:
    arrays: dict[str, np.ndarray] = {}
    for group, state in opt.items():
        for key, arr in state.m.items():
            arrays[f"opt.{group}.m.{key}"] = arr
        for key, arr in state.v.items():
            arrays[f"opt.{group}.v.{key}"] = arr
    return arrays


def _restore_opt(params: ModelParams, state_arrays: dict[str, np.ndarray], meta: dict):
    opt = {}
    steps = meta.get("opt_steps", {})
    for group in ("enc", "dec", "disc"):
        state = AdamState.init_like(params.group(group))
        for key in state.m:
            state.m[key] = np.ascontiguousarray(state_arrays[f"opt.{group}.m.{key}"])
            state.v[key] = np.ascontiguousarray(state_arrays[f"opt.{group}.v.{key}"])
        state.step = int(steps.get(group, 0))
        opt[group] = state
    return opt


def _checkpoint_meta(config: TrainConfig, step: int, opt, rng) -> dict:
    return {
        "seed": config.seed,
        "mode": config.mode,
        "step": step,
        "weights": config.weights.to_dict(),
        "opt_steps": {group: state.step for group, state in opt.items()},
        "rng_state": rng.bit_generator.state,
    }


def train_loop(
    config: TrainConfig,
    dataset: Dataset | None = None,
    resume_from: str | None = None,
) -> str:
    """Train with trace + checkpoint files under config.out_dir.

    Returns the path of the final checkpoint. Emits one trace line per step;
    a NonFiniteError aborts the run, leaving the last periodic checkpoint.
    """
    if config.out_dir is None:
        raise ConfigError("train_loop requires config.out_dir")
    if dataset is None:
        if config.dataset_path is None:
            raise ConfigError("train_loop requires a dataset or config.dataset_path")
        from .clipio import read_dataset

        dataset = read_dataset(config.dataset_path)
    os.makedirs(config.out_dir, exist_ok=True)
    write_config(os.path.join(config.out_dir, "config_effective.txt"), config)

    params = opt = rng = None
    start_step = 0
    if resume_from is not None:
        params, meta, state_arrays = load_checkpoint(resume_from)
        if meta.get("mode") != config.mode:
            raise ConfigError(
                f"checkpoint was trained in mode {meta.get('mode')!r}, config says {config.mode!r}"
            )
        opt = _restore_opt(params, state_arrays, meta)
        rng = np.random.default_rng(0)
        rng.bit_generator.state = meta["rng_state"]
        start_step = int(meta["step"])

    trace_path = os.path.join(config.out_dir, "trace.tsv")
    final_path = os.path.join(config.out_dir, "checkpoint_final.npz")
    header_written = [False]

    with open(trace_path, "w") as trace_file:
        result_holder: dict = {}

        def on_step(step: int, breakdown: LossBreakdown):
            header, line = _trace_line(step, breakdown)
            if not header_written[0]:
                trace_file.write("\t".join(header) + "\n")
                header_written[0] = True
            trace_file.write(line + "\n")
            if config.checkpoint_every and step % config.checkpoint_every == 0:
                save_checkpoint(
                    os.path.join(config.out_dir, f"checkpoint_{step:06d}.npz"),
                    result_holder["params"],
                    _checkpoint_meta(config, step, result_holder["opt"], result_holder["rng"]),
                    _opt_state_arrays(result_holder["opt"]),
                )

        # fit_models mutates params/opt/rng in place, so stash them for on_step
        if params is None:
            canonical = dataset.characters[0].skeleton
            params = init_params(
                config.hyper, canonical.parent, config.seed, canonical.joint_name
            )
        if opt is None:
            opt = {
                "enc": AdamState.init_like(params.enc),
                "dec": AdamState.init_like(params.dec),
                "disc": AdamState.init_like(params.disc),
            }
        if rng is None:
            rng = np.random.default_rng(config.seed)
        result_holder.update(params=params, opt=opt, rng=rng)
        result = fit_models(dataset, config, params, opt, rng, start_step, on_step)

    save_checkpoint(
        final_path,
        result.params,
        _checkpoint_meta(config, result.final_step, result.opt, result.rng),
        _opt_state_arrays(result.opt),
    )
    return final_path
