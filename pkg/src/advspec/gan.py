"""WGAN training with a one-sided Lipschitz penalty over reweighted data.

The critic maximizes E[D(real)] - E[D(fake)] subject to a one-sided
gradient penalty mean(max(0, ||dD/dx|| - 1)^2) on straight-line
interpolates between real and generated batches; implementation minimizes
the negated objective plus penalty_coefficient * penalty. Real batches are
drawn from the reweighted empirical distribution by categorical
resampling, so with uniform weights the loop is exactly standard
penalized WGAN.

Training is single-threaded and fully reproducible: (seed, configs)
determine every trace bit.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from advspec import ndtensor as nd
from advspec import nn
from advspec.ndtensor import Tensor
from advspec.weighting import SampleWeights, weighted_sample

__all__ = [
    "GanError",
    "TrainConfig",
    "LossTrace",
    "sample_latent",
    "lipschitz_penalty",
    "critic_step",
    "generator_step",
    "train_wgan",
    "generate",
    "save_checkpoint",
    "load_checkpoint",
]


class GanError(RuntimeError):
    """Training aborted (NaN loss) or invalid configuration."""


@dataclass
class TrainConfig:
    """Everything the training loop needs; defaults follow common
    penalized-WGAN practice at desk scale."""

    latent_dim: int = 64
    latent_prior: str = "normal"  # "normal" | "uniform"
    n_critic: int = 5
    penalty_coefficient: float = 10.0
    batch_size: int = 64
    total_generator_steps: int = 5000
    g_opt: nn.AdamParams = field(default_factory=lambda: nn.AdamParams(lr=1e-4, beta1=0.0, beta2=0.9))
    d_opt: nn.AdamParams = field(default_factory=lambda: nn.AdamParams(lr=1e-4, beta1=0.0, beta2=0.9))
    seed: int = 0
    checkpoint_interval: int = 0  # generator steps between checkpoints; 0 = off

    def __post_init__(self):
        if self.n_critic < 1:
            raise GanError(f"n_critic must be >= 1, got {self.n_critic}")
        if self.penalty_coefficient < 0:
            raise GanError(f"penalty_coefficient must be >= 0, got {self.penalty_coefficient}")
        if self.batch_size < 2:
            raise GanError(f"batch_size must be >= 2 (interpolation needs pairs), got {self.batch_size}")
        if self.latent_prior not in ("normal", "uniform"):
            raise GanError(f"latent_prior must be 'normal' or 'uniform', got {self.latent_prior!r}")

    def to_dict(self) -> dict:
        return {
            "latent_dim": self.latent_dim,
            "latent_prior": self.latent_prior,
            "n_critic": self.n_critic,
            "penalty_coefficient": self.penalty_coefficient,
            "batch_size": self.batch_size,
            "total_generator_steps": self.total_generator_steps,
            "g_opt": self.g_opt.to_dict(),
            "d_opt": self.d_opt.to_dict(),
            "seed": self.seed,
            "checkpoint_interval": self.checkpoint_interval,
        }

    @staticmethod
    def from_dict(d: dict) -> "TrainConfig":
        d = dict(d)
        if "g_opt" in d:
            d["g_opt"] = nn.AdamParams.from_dict(d["g_opt"])
        if "d_opt" in d:
            d["d_opt"] = nn.AdamParams.from_dict(d["d_opt"])
        return TrainConfig(**d)


@dataclass
class LossTrace:
    """One record per generator step: losses, mean penalty, wall-clock."""

    steps: list = field(default_factory=list)
    d_loss: list = field(default_factory=list)
    g_loss: list = field(default_factory=list)
    penalty: list = field(default_factory=list)
    wall_seconds: list = field(default_factory=list)

    def append(self, step: int, d_loss: float, g_loss: float, penalty: float, wall: float) -> None:
        self.steps.append(int(step))
        self.d_loss.append(float(d_loss))
        self.g_loss.append(float(g_loss))
        self.penalty.append(float(penalty))
        self.wall_seconds.append(float(wall))

    def __len__(self) -> int:
        return len(self.steps)

    def to_csv(self, path, append: bool = False) -> None:
        """Write (step, d_loss, g_loss, penalty); wall-clock stays in memory
        so re-runs with the same seed are byte-identical."""
        mode = "a" if append else "w"
        with open(path, mode, newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            if not append:
                writer.writerow(["step", "d_loss", "g_loss", "penalty"])
            for i in range(len(self.steps)):
                writer.writerow(
                    [
                        self.steps[i],
                        f"{self.d_loss[i]:.17g}",
                        f"{self.g_loss[i]:.17g}",
                        f"{self.penalty[i]:.17g}",
                    ]
                )

    @staticmethod
    def from_csv(path) -> "LossTrace":
        trace = LossTrace()
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = next(reader)
            if header[:4] != ["step", "d_loss", "g_loss", "penalty"]:
                raise GanError(f"{path}: unexpected trace header {header}")
            for row in reader:
                trace.append(int(row[0]), float(row[1]), float(row[2]), float(row[3]), 0.0)
        return trace


def sample_latent(cfg: TrainConfig, n: int, rng: np.random.Generator) -> np.ndarray:
    if cfg.latent_prior == "uniform":
        return rng.uniform(-1.0, 1.0, size=(n, cfg.latent_dim))
    return rng.normal(size=(n, cfg.latent_dim))


def _flatten_batch(x: np.ndarray) -> np.ndarray:
    return x.reshape(x.shape[0], -1)


def lipschitz_penalty(
    critic: nn.Model,
    real: np.ndarray,
    fake: np.ndarray,
    rng: np.random.Generator,
) -> Tensor:
    """mean(max(0, ||dD/dx_hat|| - 1)^2) on per-sample interpolates.

    x_hat_i = eps_i * real_i + (1 - eps_i) * fake_i with eps_i ~ U[0,1].
    Both batches enter as plain arrays: the penalty differentiates the
    critic only.
    """
    real = np.asarray(real, dtype=np.float64)
    fake = np.asarray(fake, dtype=np.float64)
    if real.shape != fake.shape:
        raise GanError(f"real batch {real.shape} != fake batch {fake.shape}")
    n = real.shape[0]
    eps = rng.uniform(size=(n,) + (1,) * (real.ndim - 1))
    x_hat = eps * real + (1.0 - eps) * fake
    norms = nd.grad_norm_of_output_wrt_input(critic.forward, x_hat)
    return nd.mean(nd.pow_const(nd.relu(nd.sub(norms, Tensor(1.0))), 2.0))


def _check_finite(value: float, what: str, step: int, extra: str = "") -> None:
    if not np.isfinite(value):
        raise GanError(f"{what} became non-finite at step {step}{extra}")


def critic_step(
    critic: nn.Model,
    generator: nn.Model,
    real_batch: np.ndarray,
    cfg: TrainConfig,
    opt_state: nn.AdamState,
    rng: np.random.Generator,
    step: int = 0,
) -> tuple:
    """One optimizer update on the critic; returns (loss, penalty) floats."""
    with nd.no_grad():
        z = sample_latent(cfg, real_batch.shape[0], rng)
        fake = generator.forward(Tensor(z)).data
    d_real = critic.forward(Tensor(np.asarray(real_batch, dtype=np.float64)))
    d_fake = critic.forward(Tensor(fake))
    wasserstein = nd.sub(nd.mean(d_fake), nd.mean(d_real))
    if cfg.penalty_coefficient > 0:
        penalty = lipschitz_penalty(critic, real_batch, fake, rng)
        loss = nd.add(wasserstein, nd.scale(penalty, cfg.penalty_coefficient))
        penalty_value = penalty.item()
    else:
        loss = wasserstein
        penalty_value = 0.0
    loss_value = loss.item()
    _check_finite(loss_value, "critic loss", step, f" (penalty {penalty_value})")
    params = critic.parameters()
    nn.zero_grad(params)
    loss.backward()
    nn.adam_step(params, [p.grad for p in params], opt_state)
    nn.zero_grad(params)
    return loss_value, penalty_value


def generator_step(
    critic: nn.Model,
    generator: nn.Model,
    cfg: TrainConfig,
    opt_state: nn.AdamState,
    rng: np.random.Generator,
    step: int = 0,
) -> float:
    """One optimizer update on the generator; loss is -mean(D(G(z)))."""
    z = sample_latent(cfg, cfg.batch_size, rng)
    fake = generator.forward(Tensor(z))
    loss = nd.neg(nd.mean(critic.forward(fake)))
    loss_value = loss.item()
    _check_finite(loss_value, "generator loss", step)
    g_params = generator.parameters()
    d_params = critic.parameters()
    nn.zero_grad(g_params)
    nn.zero_grad(d_params)
    loss.backward()
    nn.adam_step(g_params, [p.grad for p in g_params], opt_state)
    nn.zero_grad(g_params)
    nn.zero_grad(d_params)  # critic grads from this pass are discarded
    return loss_value


def train_wgan(
    data: np.ndarray,
    weights: SampleWeights,
    generator: nn.Model,
    critic: nn.Model,
    cfg: TrainConfig,
    checkpoint_dir=None,
    resume_state: Optional[dict] = None,
    progress: Optional[Callable[[int], None]] = None,
) -> tuple:
    """Alternate n_critic critic updates and one generator update.

    ``data`` is the (already class-filtered) sample matrix shaped for the
    critic input; real minibatch indices come from the reweighted
    distribution. Returns (generator, LossTrace). With
    ``cfg.checkpoint_interval > 0`` and a directory, training state is
    saved every interval and at the end; ``resume_state`` (from
    ``load_checkpoint``) continues a run with contiguous step indices.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.shape[0] < 1:
        raise GanError("empty training data")
    if len(weights) != data.shape[0]:
        raise GanError(f"{len(weights)} weights for {data.shape[0]} samples")
    if data.shape[1:] != critic.input_shape:
        data = data.reshape((data.shape[0],) + critic.input_shape)

    if resume_state is None:
        rng = np.random.default_rng(cfg.seed)
        g_state = nn.AdamState(generator.parameters(), cfg.g_opt)
        d_state = nn.AdamState(critic.parameters(), cfg.d_opt)
        start_step = 0
    else:
        rng = np.random.default_rng()
        rng.bit_generator.state = resume_state["rng_state"]
        g_state = resume_state["g_state"]
        d_state = resume_state["d_state"]
        start_step = resume_state["step"]

    trace = LossTrace()
    t0 = time.perf_counter()
    for step in range(start_step, cfg.total_generator_steps):
        d_losses, penalties = [], []
        for _ in range(cfg.n_critic):
            idx = weighted_sample(weights, cfg.batch_size, rng)
            d_loss, pen = critic_step(critic, generator, data[idx], cfg, d_state, rng, step)
            d_losses.append(d_loss)
            penalties.append(pen)
        g_loss = generator_step(critic, generator, cfg, g_state, rng, step)
        trace.append(
            step,
            float(np.mean(d_losses)),
            g_loss,
            float(np.mean(penalties)),
            time.perf_counter() - t0,
        )
        if progress is not None:
            progress(step)
        if (
            checkpoint_dir is not None
            and cfg.checkpoint_interval > 0
            and (step + 1) % cfg.checkpoint_interval == 0
        ):
            save_checkpoint(checkpoint_dir, generator, critic, g_state, d_state, step + 1, rng, cfg)
    if checkpoint_dir is not None and cfg.checkpoint_interval > 0:
        save_checkpoint(
            checkpoint_dir, generator, critic, g_state, d_state, cfg.total_generator_steps, rng, cfg
        )
    return generator, trace


def generate(generator: nn.Model, n: int, rng: np.random.Generator, prior: str = "normal") -> np.ndarray:
    """Draw n latent vectors and map them through the generator."""
    if n < 1:
        raise GanError(f"n must be >= 1, got {n}")
    d = generator.input_shape[0]
    z = rng.uniform(-1.0, 1.0, size=(n, d)) if prior == "uniform" else rng.normal(size=(n, d))
    return generator.predict(z)


# ---------------------------------------------------------------------------
# checkpointing
# ---------------------------------------------------------------------------


def save_checkpoint(
    directory,
    generator: nn.Model,
    critic: nn.Model,
    g_state: nn.AdamState,
    d_state: nn.AdamState,
    step: int,
    rng: np.random.Generator,
    cfg: TrainConfig,
) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    nn.save_model(generator, directory / "generator.bin")
    nn.save_model(critic, directory / "critic.bin")
    nn.save_arrays(directory / "optimizer.bin", [g_state.m, g_state.v, d_state.m, d_state.v])
    state = {
        "step": int(step),
        "g_opt_step": g_state.step,
        "d_opt_step": d_state.step,
        "rng_state": rng.bit_generator.state,
        "train_config": cfg.to_dict(),
    }
    (directory / "state.json").write_text(json.dumps(state, indent=2, sort_keys=True) + "\n")


def load_checkpoint(directory) -> dict:
    """Rebuild models and optimizer/rng state for ``train_wgan(resume_state=...)``."""
    directory = Path(directory)
    state_path = directory / "state.json"
    if not state_path.exists():
        raise FileNotFoundError(f"missing checkpoint state {state_path}")
    state = json.loads(state_path.read_text())
    generator = nn.load_model(directory / "generator.bin")
    critic = nn.load_model(directory / "critic.bin")
    cfg = TrainConfig.from_dict(state["train_config"])
    gm, gv, dm, dv = nn.load_arrays(directory / "optimizer.bin")
    g_state = nn.AdamState(generator.parameters(), cfg.g_opt)
    g_state.m, g_state.v, g_state.step = gm, gv, state["g_opt_step"]
    d_state = nn.AdamState(critic.parameters(), cfg.d_opt)
    d_state.m, d_state.v, d_state.step = dm, dv, state["d_opt_step"]
    return {
        "generator": generator,
        "critic": critic,
        "g_state": g_state,
        "d_state": d_state,
        "step": int(state["step"]),
        "rng_state": state["rng_state"],
        "config": cfg,
    }
