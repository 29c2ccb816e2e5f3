"""Training loop with per-epoch logging and best-validation checkpointing."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import torch
from torch.utils.data import DataLoader

from .config import CheckpointRecord, TrainConfig
from .data import PairDataset, read_manifest
from .model import Denoiser

log = logging.getLogger(__name__)


def _epoch_pass(model, loader, optimizer=None) -> float:
    total, count = 0.0, 0
    training = optimizer is not None
    model.train(training)
    with torch.set_grad_enabled(training):
        for noisy, clean in loader:
            out = model(noisy)
            loss = (out - clean).abs().mean()
            if training:
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
            total += loss.item() * noisy.shape[0]
            count += noisy.shape[0]
    return total / count


def train(
    manifest_path: str | Path,
    cfg: TrainConfig,
    out_dir: str | Path,
    epochs: int | None = None,
) -> CheckpointRecord:
    """Train on the manifest's train split, validating per epoch.

    Writes ``train_log.jsonl`` (one {"epoch", "train_mae", "val_mae"} line per
    epoch), ``config.json``, and ``best.pt``. The exported checkpoint is the
    one with the minimum validation MAE; training stops early once the
    validation score has not improved for ``cfg.patience`` epochs. A
    non-finite loss aborts training, retaining the last finite checkpoint.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(cfg.seed)

    refs = read_manifest(manifest_path)
    train_set = PairDataset(refs, "train")
    val_set = PairDataset(refs, "validation")
    gen = torch.Generator()
    gen.manual_seed(cfg.seed)
    train_loader = DataLoader(train_set, batch_size=cfg.batch_size, shuffle=True,
                              generator=gen)
    val_loader = DataLoader(val_set, batch_size=cfg.batch_size, shuffle=False)

    model = Denoiser(cfg)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)

    (out_dir / "config.json").write_text(cfg.to_json())
    ckpt_path = out_dir / "best.pt"
    log_path = out_dir / "train_log.jsonl"

    best = CheckpointRecord(epoch=-1, train_loss=float("inf"),
                            val_loss=float("inf"), path=str(ckpt_path))
    since_improved = 0
    n_epochs = cfg.epochs_max if epochs is None else epochs
    with open(log_path, "w") as log_fh:
        for epoch in range(n_epochs):
            train_mae = _epoch_pass(model, train_loader, optimizer)
            val_mae = _epoch_pass(model, val_loader)
            log_fh.write(json.dumps(
                {"epoch": epoch, "train_mae": train_mae, "val_mae": val_mae}) + "\n")
            log_fh.flush()
            if not (torch.isfinite(torch.tensor(train_mae))
                    and torch.isfinite(torch.tensor(val_mae))):
                log.error("non-finite loss at epoch %d; aborting with last "
                          "finite checkpoint", epoch)
                break
            if val_mae < best.val_loss:
                best = CheckpointRecord(epoch=epoch, train_loss=train_mae,
                                        val_loss=val_mae, path=str(ckpt_path))
                torch.save(
                    {"model": model.state_dict(), "config": cfg.to_json(),
                     "epoch": epoch, "val_mae": val_mae},
                    ckpt_path,
                )
                since_improved = 0
            else:
                since_improved += 1
                if since_improved >= cfg.patience:
                    log.info("validation stopped improving; early stop at epoch %d",
                             epoch)
                    break
    if best.epoch < 0:
        raise RuntimeError("training never produced a finite checkpoint")
    return best


def load_model(checkpoint_path: str | Path) -> Denoiser:
    payload = torch.load(checkpoint_path, map_location="cpu", weights_only=False)
    cfg = TrainConfig.from_json(payload["config"])
    model = Denoiser(cfg)
    model.load_state_dict(payload["model"])
    model.eval()
    return model
