"""ADAM, the learning-rate schedule, and the epoch training driver.

The schedule has three phases. Stage 1 runs at ``lr_stage1`` until the
epoch loss plateaus under a loose threshold, stage 2 at ``lr_stage2`` until
it plateaus under a tighter one; then batch normalization is merged into
the convolutions and a fine-tune phase runs for a fixed number of epochs at
``lr_finetune``. A plateau means ``plateau_epochs`` consecutive epochs each
improving the mean epoch loss by less than the phase's relative tolerance.
``max_epochs`` caps the total epoch count across all phases; whenever the
budget ends the run, the returned parameters are still BN-merged.

Training is bitwise deterministic for a given seed: initialization and
batch sampling use two Philox streams derived from it, and the sampler
draws in a fixed order (per patch: image, top, left, transform, sigma; then
one Gaussian field for the whole batch).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import DatasetManifest, load_manifest_images
from .errors import ContractError, DataError, TrainingError
from .model import (
    ModelConfig,
    ParameterSet,
    backward,
    learnable_arrays,
    merge_batchnorm,
    rebuild_with_arrays,
)
from .init import default_init
from .rng import make_rng

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


@dataclass
class AdamState:
    """Optimizer moments, mirrored one-to-one onto the learnable arrays."""

    step: int
    lr: float
    m: list[np.ndarray]
    v: list[np.ndarray]
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPSILON

    @classmethod
    def for_params(cls, params: ParameterSet, lr: float) -> "AdamState":
        arrays = [a for _, a in learnable_arrays(params)]
        return cls(
            step=0, lr=lr,
            m=[np.zeros_like(a) for a in arrays],
            v=[np.zeros_like(a) for a in arrays],
        )


def adam_step(
    params: ParameterSet, grads: ParameterSet, state: AdamState,
) -> tuple[ParameterSet, AdamState]:
    """One bias-corrected ADAM update; returns fresh params and state."""
    named = learnable_arrays(params)
    named_grads = learnable_arrays(grads)
    if len(named) != len(state.m):
        raise ContractError(
            f"optimizer state holds {len(state.m)} arrays, parameters have {len(named)}")
    t = state.step + 1
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t

    new_params = []
    new_m = []
    new_v = []
    for (name, theta), (_, g), m, v in zip(named, named_grads, state.m, state.v):
        if theta.shape != g.shape:
            raise ContractError(f"gradient for {name} has shape {g.shape}, want {theta.shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in {name}")
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        update = state.lr * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
        new_params.append(theta - update)
        new_m.append(m)
        new_v.append(v)
    next_state = replace(state, step=t, m=new_m, v=new_v)
    return rebuild_with_arrays(params, new_params), next_state


@dataclass(frozen=True)
class TrainPlan:
    """Schedule and sampling configuration; defaults are the full-scale ones."""

    lr_stage1: float = 1e-3
    lr_stage2: float = 1e-4
    lr_finetune: float = 1e-6
    finetune_epochs: int = 50
    plateau_epochs: int = 5
    plateau_tol_stage1: float = 1e-3
    plateau_tol_stage2: float = 1e-4
    batch_size: int = 128
    patches_per_epoch: int = 128 * 8000
    noise_range: tuple[float, float] = (0.0, 75.0)
    augment: bool = True
    max_epochs: int | None = None

    def __post_init__(self):
        if not (self.lr_stage1 > self.lr_stage2 > self.lr_finetune > 0.0):
            raise ContractError("learning rates must satisfy stage1 > stage2 > finetune > 0")
        if self.batch_size < 1 or self.patches_per_epoch < 1:
            raise ContractError("batch_size and patches_per_epoch must be >= 1")
        if self.plateau_epochs < 1:
            raise ContractError("plateau_epochs must be >= 1")
        if self.finetune_epochs < 0:
            raise ContractError("finetune_epochs must be >= 0")
        lo, hi = self.noise_range
        if not (0.0 <= lo <= hi):
            raise ContractError(f"invalid noise range [{lo}, {hi}]")
        if self.max_epochs is not None and self.max_epochs < 1:
            raise ContractError("max_epochs must be >= 1 when set")

    @property
    def batches_per_epoch(self) -> int:
        return max(1, self.patches_per_epoch // self.batch_size)


def sample_batch(
    source, plan: TrainPlan, rng: np.random.Generator,
    patch_size: int = 32, clipped: bool = False,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw one training batch: (noisy, per-patch maps, clean).

    ``source`` is a DatasetManifest or a pre-decoded list of (1, C, H, W)
    image tensors. Patches are uniform random crops with a per-patch sigma
    drawn uniformly from the plan's noise range and a uniform per-patch
    map; when the plan augments, each patch gets a random dihedral
    transform. Noise is added without clipping unless ``clipped``.
    """
    if isinstance(source, DatasetManifest):
        patch_size = source.patch_size
        clipped = source.clipped
        images = load_manifest_images(source)
    else:
        images = list(source)
    if not images:
        raise DataError("no images to sample from")
    channels = images[0].shape[1]
    for t in images:
        if t.shape[2] < patch_size or t.shape[3] < patch_size:
            raise DataError(
                f"image of size {t.shape[2]}x{t.shape[3]} is smaller than "
                f"patch size {patch_size}")
        if t.shape[1] != channels:
            raise DataError("mixed channel counts in sampling source")

    lo, hi = plan.noise_range
    clean = np.empty((plan.batch_size, channels, patch_size, patch_size))
    sigmas = np.empty(plan.batch_size)
    for i in range(plan.batch_size):
        img = images[int(rng.integers(len(images)))]
        top = int(rng.integers(img.shape[2] - patch_size + 1))
        left = int(rng.integers(img.shape[3] - patch_size + 1))
        patch = img[:, :, top:top + patch_size, left:left + patch_size]
        if plan.augment:
            k = int(rng.integers(8))
            if k >= 4:
                patch = patch[:, :, :, ::-1]
            patch = np.rot90(patch, k % 4, axes=(2, 3))
        clean[i] = patch[0]
        sigmas[i] = rng.uniform(lo, hi)

    maps = np.broadcast_to(
        (sigmas / 255.0)[:, None, None], (plan.batch_size, patch_size, patch_size)).copy()
    noise = rng.standard_normal(clean.shape) * maps[:, None, :, :]
    noisy = clean + noise
    if clipped:
        levels = np.floor(np.clip(noisy, 0.0, 1.0) * 255.0 + 0.5)
        noisy = levels / 255.0
    return noisy, maps, clean


@dataclass
class TrainResult:
    params: ParameterSet
    log: list[str]
    epoch_losses: list[float]


def train(
    plan: TrainPlan,
    manifest: DatasetManifest,
    config: ModelConfig,
    seed: int = 0,
    log_fn=None,
) -> TrainResult:
    """Run the full schedule and return BN-merged parameters plus the loss log.

    Log lines have the fixed shape
    ``epoch <n> loss <float> lr <float> phase <stage1|stage2|finetune>``;
    ``log_fn`` (if given) receives each line as it is produced.
    """
    images = load_manifest_images(manifest)
    for entry, t in zip(manifest.entries, images):
        if t.shape[2] < manifest.patch_size or t.shape[3] < manifest.patch_size:
            raise DataError(
                f"{entry.path}: image {t.shape[2]}x{t.shape[3]} is smaller than "
                f"patch size {manifest.patch_size}")
        if t.shape[1] != config.in_channels:
            raise DataError(
                f"{entry.path}: has {t.shape[1]} channels, model expects "
                f"{config.in_channels}")

    init_seed, batch_seed = (
        int(s) for s in np.random.SeedSequence(seed).generate_state(2, dtype=np.uint64))
    params = default_init(config, seed=init_seed)
    rng = make_rng(batch_seed)

    log: list[str] = []
    epoch_losses: list[float] = []

    def emit(epoch: int, loss: float, lr: float, phase: str) -> None:
        line = f"epoch {epoch} loss {loss!r} lr {lr:g} phase {phase}"
        log.append(line)
        if log_fn is not None:
            log_fn(line)

    def run_epoch(params, adam) -> tuple[ParameterSet, AdamState, float]:
        batch_losses = np.empty(plan.batches_per_epoch)
        for b in range(plan.batches_per_epoch):
            noisy, maps, clean = sample_batch(
                images, plan, rng,
                patch_size=manifest.patch_size, clipped=manifest.clipped)
            loss, grads = backward(params, noisy, maps, clean)
            params, adam = adam_step(params, grads, adam)
            batch_losses[b] = loss
        return params, adam, float(batch_losses.mean())

    epoch = 0

    def budget_left() -> bool:
        return plan.max_epochs is None or epoch < plan.max_epochs

    phase = "stage1"
    lr = plan.lr_stage1
    tol = plan.plateau_tol_stage1
    adam = AdamState.for_params(params, lr)
    prev_loss = None
    streak = 0
    while phase in ("stage1", "stage2") and budget_left():
        epoch += 1
        params, adam, epoch_loss = run_epoch(params, adam)
        epoch_losses.append(epoch_loss)
        emit(epoch, epoch_loss, lr, phase)
        if prev_loss is not None and (prev_loss - epoch_loss) < tol * abs(prev_loss):
            streak += 1
        else:
            streak = 0
        prev_loss = epoch_loss
        if streak >= plan.plateau_epochs:
            if phase == "stage1":
                phase = "stage2"
                lr = plan.lr_stage2
                tol = plan.plateau_tol_stage2
                adam = replace(adam, lr=lr)
                prev_loss = None
                streak = 0
            else:
                phase = "finetune"

    if not params.merged:
        params = merge_batchnorm(params)

    if phase == "finetune":
        lr = plan.lr_finetune
        adam = AdamState.for_params(params, lr)
        for _ in range(plan.finetune_epochs):
            if not budget_left():
                break
            epoch += 1
            params, adam, epoch_loss = run_epoch(params, adam)
            epoch_losses.append(epoch_loss)
            emit(epoch, epoch_loss, lr, "finetune")

    return TrainResult(params=params, log=log, epoch_losses=epoch_losses)
