"""Mini-batch training loop with a hand-rolled Adam optimizer.

Adam updates complex spectral parameters component-wise through their real
views; after every step the model re-projects spectral filters onto the
conjugate-symmetric subspace so feature maps stay real.  Batches are formed
from a per-epoch permutation drawn from the run seed (last partial batch
kept), and all reductions are plain vectorized sums, so two runs with the
same seed produce bit-identical logs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatchError

REGIMES = ("nrnr", "rr", "nrr")


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    lr: float = 1e-3  # paper quotes 0.1 for Adam; far outside customary range, selectable by flag
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    loss: str = "rotinv"  # or "l2"
    regime: str = "nrr"
    b_corr: int | None = None
    grad_clip: float | None = None
    checkpoint_every: int = 0  # epochs; 0 = only at the end
    val_subset: int = 128  # per-epoch validation sample cap (0 = all)

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.lr <= 0:
            raise DimensionMismatchError("epochs, batch_size and lr must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise DimensionMismatchError("invalid Adam hyperparameters")
        if self.loss not in ("l2", "rotinv"):
            raise DimensionMismatchError(f"unknown loss {self.loss!r}")
        if self.regime not in REGIMES:
            raise DimensionMismatchError(f"regime must be one of {REGIMES}")


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def _real_view(a: np.ndarray) -> np.ndarray:
    return a.view(np.float64) if np.iscomplexobj(a) else a


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    """One in-place Adam update with bias correction; returns the state."""
    state.t += 1
    t = state.t
    for name, p in params.items():
        g = _real_view(np.ascontiguousarray(grads[name]))
        pv = _real_view(p)
        if name not in state.m:
            state.m[name] = np.zeros_like(pv)
            state.v[name] = np.zeros_like(pv)
        m, v = state.m[name], state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        mhat = m / (1.0 - beta1**t)
        vhat = v / (1.0 - beta2**t)
        pv -= lr * mhat / (np.sqrt(vhat) + eps)
    return state


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Global-norm clipping; returns the pre-clip norm."""
    total = 0.0
    for g in grads.values():
        total += float(np.sum(np.abs(g) ** 2))
    norm = float(np.sqrt(total))
    if norm > max_norm:
        scale = max_norm / norm
        for name in grads:
            grads[name] = grads[name] * scale
    return norm


def _param_norms(params: dict[str, np.ndarray]) -> str:
    return ", ".join(f"{k}={float(np.linalg.norm(_real_view(v))):.3e}" for k, v in params.items())


def train(model, train_images: np.ndarray, cfg: TrainConfig,
          val_images: np.ndarray | None = None,
          log_path=None, ckpt_path=None, labels: np.ndarray | None = None):
    """Train an autoencoder (or, with labels, a classifier) on (N, C, 2b, 2b) data.

    Returns (opt_state, rows) where rows are the metric-log entries
    (epoch, step, split, loss, psnr).  Writes rows as CSV to log_path and a
    checkpoint to ckpt_path when given.
    """
    from .model import save_checkpoint

    n = train_images.shape[0]
    if n == 0:
        raise DimensionMismatchError("training dataset is empty")
    rng = np.random.default_rng(cfg.seed)
    state = AdamState()
    rows: list[tuple] = []
    step = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            batch = train_images[idx]
            if labels is None:
                loss, grads, _ = model.forward_loss(batch, cfg.loss, b_corr=cfg.b_corr)
            else:
                loss, grads, _ = model.forward_loss(batch, labels[idx])
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite loss at epoch {epoch} batch {start // cfg.batch_size} "
                    f"(samples {idx[:4].tolist()}...); parameter norms: {_param_norms(model.params)}"
                )
            if cfg.grad_clip is not None:
                clip_gradients(grads, cfg.grad_clip)
            adam_step(model.params, grads, state, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
            model.project_params()
            epoch_losses.append(loss)
            step += 1
        rows.append((epoch, step, "train", float(np.mean(epoch_losses)), ""))
        if val_images is not None and labels is None:
            subset = val_images[: cfg.val_subset] if cfg.val_subset else val_images
            val_loss, val_psnr = evaluate_autoencoder(model, subset, cfg)
            rows.append((epoch, step, "val", val_loss, val_psnr))
        if ckpt_path and cfg.checkpoint_every and (epoch + 1) % cfg.checkpoint_every == 0:
            save_checkpoint(ckpt_path, model, state, step=step, seed=cfg.seed)
    if ckpt_path:
        save_checkpoint(ckpt_path, model, state, step=step, seed=cfg.seed)
    if log_path:
        with open(log_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "step", "split", "loss", "psnr"])
            w.writerows(rows)
    return state, rows


def evaluate_autoencoder(model, images: np.ndarray, cfg: TrainConfig,
                         batch_size: int = 64) -> tuple[float, float]:
    """Mean validation loss and PSNR (aligned for the invariant loss)."""
    from . import eval as eval_mod
    from . import loss as loss_mod

    losses_all = []
    psnrs = []
    for start in range(0, images.shape[0], batch_size):
        batch = images[start : start + batch_size]
        z = model.encode_arr(batch)
        recon = model.decode_arr(z)
        if cfg.loss == "rotinv":
            losses, _, _ = loss_mod.rotinv_loss_arr(batch, recon, cfg.b_corr)
            rots = loss_mod.align_rotations(batch, recon)
            psnrs.extend(
                eval_mod.psnr_arr(batch[i], recon[i], rot=rots[i]) for i in range(batch.shape[0])
            )
        else:
            losses, _ = loss_mod.l2_loss_arr(batch, recon)
            psnrs.extend(eval_mod.psnr_arr(batch[i], recon[i]) for i in range(batch.shape[0]))
        losses_all.append(losses)
    return float(np.concatenate(losses_all).mean()), float(np.mean(psnrs))
