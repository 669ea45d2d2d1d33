"""Training loop: state construction, the single optimisation step, the
epoch driver with atomic checkpoint/resume, and evaluation.

Reproducibility contract: (config, seed) determines everything. Weight
init, per-epoch shuffles, and per-step redaction draws each live on their
own named rng stream, so resuming at epoch k replays exactly the draws an
uninterrupted run would have made.
"""

import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import nn
from ..autodiff import Tensor, concat, no_grad
from ..core import ConfigError, SeededRng, TrainingDiverged
from ..crm import Crm
from ..losses import (PerceptualExtractor, TextEmbedder,
                      cyclic_consistency_loss, regen_loss,
                      text_supervision_loss, total_loss)
from ..optim import Adam, cosine_lr
from ..redaction import apply_spatial_mask, make_spatial_mask, redact
from ..tasks import (BaseNet, compute_metrics, generate_synthetic_dataset,
                     multitask_loss, stack_ground_truths)
from ..sa import SharedAttention
from .config import config_to_text, parse_config

CSV_COLUMNS = ("epoch", "split", "task", "metric", "value")


@dataclass
class TrainState:
    """Everything train_step mutates: networks, optimizer, and position."""

    config: object
    seed: int
    basenet: BaseNet
    crm: object = None
    sa: object = None
    perceptual: object = None
    embedder: object = None
    optimizer: Adam = None
    epoch: int = 0
    step: int = 0

    def trainable_modules(self):
        mods = {"basenet": self.basenet}
        if self.crm is not None:
            mods["crm"] = self.crm
        if self.sa is not None:
            mods["sa"] = self.sa
        return mods


@dataclass
class RunRecord:
    """Result of one training run."""

    config_text: str
    seed: int
    history: list = field(default_factory=list)
    checkpoint_path: str = ""
    wall_clock: float = 0.0

    def final_metrics(self, split="val"):
        """{task: {metric: value}} from the last recorded epoch."""
        rows = [r for r in self.history if r["split"] == split]
        if not rows:
            return {}
        last = max(r["epoch"] for r in rows)
        out = {}
        for r in rows:
            if r["epoch"] == last:
                out.setdefault(r["task"], {})[r["metric"]] = r["value"]
        return out


def make_state(cfg, seed=None):
    """Build networks and optimizer from dedicated init streams.

    The regeneration stack (CRM + perceptual net) is only constructed when
    loss.gamma > 0, so a gamma=0 state is exactly the plain supervised one:
    same parameter list, same optimizer slot order, no extra rng draws.
    """
    seed = cfg["seed"] if seed is None else int(seed)
    root = SeededRng(seed)
    dtype = cfg.dtype()
    bn_cfg = cfg.basenet_config()
    basenet = BaseNet(bn_cfg, root.stream("init", "basenet"), dtype=dtype)
    crm = sa = perceptual = embedder = None
    if cfg["loss.gamma"] > 0:
        crm_cfg = cfg.crm_config(bn_cfg.condition_channels)
        crm = Crm(crm_cfg, root.stream("init", "crm"), dtype=dtype)
        perceptual = PerceptualExtractor(root.stream("init", "perceptual"), dtype=dtype)
    if cfg["sa.enabled"]:
        head_spec = tuple((t, bn_cfg.head_channels(t)) for t in bn_cfg.tasks)
        sa = SharedAttention(cfg.sa_config(), head_spec, root.stream("init", "sa"), dtype=dtype)
    if cfg["loss.use_text"]:
        embedder = TextEmbedder(root.stream("init", "text"), dtype=dtype)
    params = [p for p in basenet.parameters() if p.requires_grad]
    for mod in (crm, sa):
        if mod is not None:
            params.extend(p for p in mod.parameters() if p.requires_grad)
    optimizer = Adam(params, lr=cfg["optim.lr"])
    return TrainState(
        config=cfg,
        seed=seed,
        basenet=basenet,
        crm=crm,
        sa=sa,
        perceptual=perceptual,
        embedder=embedder,
        optimizer=optimizer,
    )


def _split_tasks(cond, bn_cfg):
    """Concatenated condition tensor -> {task: per-task slice}."""
    tasks = bn_cfg.tasks
    if len(tasks) == 1:
        return {tasks[0]: cond}
    out, lo = {}, 0
    for t in tasks:
        ch = bn_cfg.head_channels(t)
        out[t] = cond[:, lo : lo + ch]
        lo += ch
    return out


def _redact_batch(images, spec, rng):
    """Redact a (B,3,H,W) batch; spatial variants draw one mask per sample."""
    if spec.domain == "spectral":
        return redact(images, spec).astype(images.dtype, copy=False)
    out = np.empty_like(images)
    h, w = images.shape[-2:]
    for i in range(images.shape[0]):
        mask = make_spatial_mask(h, w, spec, rng)
        out[i] = apply_spatial_mask(images[i], mask)
    return out


def train_step(batch, state):
    """One optimisation step on (images, gt) arrays. Returns (state, losses).

    Flow: predict, optionally enhance with shared attention, supervise the
    final predictions; when regeneration is on, redact the batch with the
    (epoch, step)-addressed stream, regenerate from (redacted image,
    predictions), and add the weighted auxiliary terms. One backward pass,
    one optimizer update.
    """
    cfg = state.config
    bn_cfg = cfg.basenet_config()
    tasks = bn_cfg.tasks
    dtype = cfg.dtype()
    images, gt = batch
    images = np.ascontiguousarray(images, dtype=dtype)

    for mod in state.trainable_modules().values():
        mod.train()

    x = Tensor(images)
    preds = state.basenet(x)
    c_raw = preds[tasks[0]] if len(tasks) == 1 else concat([preds[t] for t in tasks], axis=1)
    if state.sa is not None:
        c_final = state.sa.enhancement_pass(x, c_raw)
        finals = _split_tasks(c_final, bn_cfg)
    else:
        c_final = c_raw
        finals = preds

    l_base = multitask_loss(finals, gt, tasks)

    if state.crm is None:
        # plain supervised path: no redaction draw, no extra graph nodes
        if not np.all(np.isfinite(l_base.data)):
            raise TrainingDiverged(
                f"non-finite loss at epoch {state.epoch} step {state.step} seed {state.seed}"
            )
        total = l_base
        losses = {"total": float(l_base.data), "base": float(l_base.data)}
    else:
        w = cfg.loss_weights()
        spec = cfg.redaction_spec()
        draw = SeededRng(state.seed).stream("redaction", state.epoch, state.step)
        x_red = Tensor(_redact_batch(images, spec, draw))
        gen = state.crm(x_red, c_final)
        l_regen = regen_loss(gen, x, w, state.perceptual)
        if state.sa is not None:
            gen_sa = state.sa.regeneration_pass(x, c_raw)
            l_regen = l_regen + regen_loss(gen_sa, x, w, state.perceptual)
        zero = Tensor(np.zeros((), dtype=dtype))
        l_text = zero
        if state.embedder is not None:
            l_text = text_supervision_loss(x, gen, state.embedder)
        l_cyc = zero
        if cfg["loss.use_cyclic"]:
            with nn.frozen_batchnorm_stats():
                l_cyc = cyclic_consistency_loss(c_raw, gen, state.basenet.condition)
        try:
            total = total_loss(l_base, l_regen, l_text, l_cyc, w)
        except TrainingDiverged as e:
            raise TrainingDiverged(
                f"{e} at epoch {state.epoch} step {state.step} seed {state.seed}"
            ) from e
        losses = {
            "total": float(total.data),
            "base": float(l_base.data),
            "regen": float(l_regen.data),
            "text": float(l_text.data),
            "cyclic": float(l_cyc.data),
        }

    state.optimizer.zero_grad()
    total.backward()
    state.optimizer.step()
    state.step += 1
    return state, losses


def evaluate(state, images, gt, batch=16):
    """Metrics per task over an array split, in eval mode, no gradients.

    With shared attention enabled the enhanced predictions are the final
    outputs, so metrics are computed on them.
    """
    cfg = state.config
    bn_cfg = cfg.basenet_config()
    tasks = bn_cfg.tasks
    dtype = cfg.dtype()
    for mod in state.trainable_modules().values():
        mod.eval()
    parts = {t: [] for t in tasks}
    with no_grad():
        for lo in range(0, images.shape[0], batch):
            x = Tensor(np.ascontiguousarray(images[lo : lo + batch], dtype=dtype))
            preds = state.basenet(x)
            if state.sa is not None:
                c_raw = (
                    preds[tasks[0]]
                    if len(tasks) == 1
                    else concat([preds[t] for t in tasks], axis=1)
                )
                finals = _split_tasks(state.sa.enhancement_pass(x, c_raw), bn_cfg)
            else:
                finals = preds
            for t in tasks:
                parts[t].append(finals[t].data)
    return {
        t: compute_metrics(np.concatenate(parts[t], axis=0), gt, t) for t in tasks
    }


def _stack_split(scenes, dtype):
    images = np.stack([img.data for img, _ in scenes]).astype(dtype)
    gt = stack_ground_truths([g for _, g in scenes])
    return images, gt


def _save_checkpoint(path, state, history, wall_clock):
    arrays = {}
    for name, mod in state.trainable_modules().items():
        for key, val in mod.state_dict().items():
            arrays[f"{name}/{key}"] = val
    opt = state.optimizer.state_dict()
    arrays["opt/t"] = np.array(opt["t"])
    for i, a in enumerate(opt["m"]):
        arrays[f"opt/m/{i:04d}"] = a
    for i, a in enumerate(opt["v"]):
        arrays[f"opt/v/{i:04d}"] = a
    arrays["meta/epoch"] = np.array(state.epoch)
    arrays["meta/seed"] = np.array(state.seed)
    arrays["meta/wall"] = np.array(wall_clock)
    arrays["meta/config"] = np.array(config_to_text(state.config))
    arrays["meta/history"] = np.array(json.dumps(history))
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        np.savez(f, **arrays)
    os.replace(tmp, path)


def load_checkpoint_meta(path):
    """Config text, seed, epoch, wall-clock, and metric history from a
    checkpoint, without constructing any network."""
    with np.load(path, allow_pickle=False) as z:
        return {
            "config_text": str(z["meta/config"][()]),
            "seed": int(z["meta/seed"][()]),
            "epoch": int(z["meta/epoch"][()]),
            "wall_clock": float(z["meta/wall"][()]),
            "history": json.loads(str(z["meta/history"][()])),
        }


def restore_state(state, path):
    """Load weights, optimizer slots, and position into a fresh state."""
    meta = load_checkpoint_meta(path)
    if meta["config_text"] != config_to_text(state.config):
        raise ConfigError("checkpoint was produced by a different config")
    if meta["seed"] != state.seed:
        raise ConfigError("checkpoint was produced by a different seed")
    with np.load(path, allow_pickle=False) as z:
        for name, mod in state.trainable_modules().items():
            prefix = f"{name}/"
            sd = {k[len(prefix) :]: z[k] for k in z.files if k.startswith(prefix)}
            mod.load_state_dict(sd)
        n = len(state.optimizer.params)
        state.optimizer.load_state_dict({
            "t": int(z["opt/t"][()]),
            "m": [z[f"opt/m/{i:04d}"] for i in range(n)],
            "v": [z[f"opt/v/{i:04d}"] for i in range(n)],
        })
    state.epoch = meta["epoch"]
    state.step = 0
    return meta


def _write_metrics_csv(path, history):
    path = Path(path)
    lines = [",".join(CSV_COLUMNS)]
    for row in history:
        lines.append(
            f"{row['epoch']},{row['split']},{row['task']},{row['metric']},{row['value']!r}"
        )
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n")
    os.replace(tmp, path)


def train(cfg, out_dir, seed=None, resume=False, stop_after=None):
    """Full training run; returns a RunRecord.

    Writes to out_dir: config.txt (snapshot), checkpoint.npz (atomic,
    rewritten after every epoch), metrics.csv (rebuilt from the in-
    checkpoint history, so a resumed run converges to the identical file),
    and diverged.json if the loss goes non-finite.

    stop_after caps how many epochs this invocation runs (simulating an
    interrupt); a later resume=True call completes the remaining epochs.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg["seed"] if seed is None else int(seed)
    dtype = cfg.dtype()
    scene_spec = cfg.scene_spec()
    tr_images, tr_gt = _stack_split(generate_synthetic_dataset(scene_spec, "train"), dtype)
    va_images, va_gt = _stack_split(generate_synthetic_dataset(scene_spec, "val"), dtype)

    state = make_state(cfg, seed)
    history, wall_before = [], 0.0
    ckpt = out / "checkpoint.npz"
    if resume and ckpt.exists():
        meta = restore_state(state, ckpt)
        history = meta["history"]
        wall_before = meta["wall_clock"]
    (out / "config.txt").write_text(config_to_text(cfg))

    base_lr = cfg["optim.lr"]
    total_epochs = cfg["optim.epochs"]
    end_epoch = total_epochs if stop_after is None else min(int(stop_after), total_epochs)
    batch_size = cfg["optim.batch"]
    n = tr_images.shape[0]
    root = SeededRng(seed)
    started = time.monotonic()

    for epoch in range(state.epoch, end_epoch):
        state.optimizer.lr = cosine_lr(base_lr, epoch, total_epochs)
        order = root.stream("shuffle", epoch).permutation(n)
        state.step = 0
        epoch_losses = []
        for lo in range(0, n, batch_size):
            idx = order[lo : lo + batch_size]
            batch = (tr_images[idx], {k: v[idx] for k, v in tr_gt.items()})
            try:
                state, losses = train_step(batch, state)
            except TrainingDiverged as e:
                (out / "diverged.json").write_text(json.dumps({
                    "epoch": epoch,
                    "step": state.step,
                    "seed": seed,
                    "redaction_stream": ["redaction", epoch, state.step],
                    "error": str(e),
                }, indent=1))
                raise
            epoch_losses.append(losses["total"])
        state.epoch = epoch + 1
        history.append({
            "epoch": epoch,
            "split": "train",
            "task": cfg["task"],
            "metric": "loss",
            "value": float(np.mean(epoch_losses)),
        })
        for task, ms in evaluate(state, va_images, va_gt).items():
            for metric, value in ms.items():
                history.append({
                    "epoch": epoch,
                    "split": "val",
                    "task": task,
                    "metric": metric,
                    "value": value,
                })
        wall = wall_before + (time.monotonic() - started)
        _save_checkpoint(ckpt, state, history, wall)
        _write_metrics_csv(out / "metrics.csv", history)

    wall = wall_before + (time.monotonic() - started)
    return RunRecord(
        config_text=config_to_text(cfg),
        seed=seed,
        history=history,
        checkpoint_path=str(ckpt),
        wall_clock=wall,
    )


def evaluate_checkpoint(ckpt_path, split="val", batch=16):
    """Rebuild the run's state from a checkpoint and score one split."""
    meta = load_checkpoint_meta(ckpt_path)
    cfg = parse_config(meta["config_text"])
    state = make_state(cfg, meta["seed"])
    restore_state(state, ckpt_path)
    scenes = generate_synthetic_dataset(cfg.scene_spec(), split)
    images, gt = _stack_split(scenes, cfg.dtype())
    return evaluate(state, images, gt, batch=batch)
