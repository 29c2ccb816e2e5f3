import dataclasses
import json

import numpy as np
import pytest
import torch
from scipy.io import wavfile

from reef_denoiser.config import TrainConfig
from reef_denoiser.data import DataError, PairDataset, read_manifest
from reef_denoiser.infer import denoise_array, denoise_batch
from reef_denoiser.model import Denoiser
from reef_denoiser.train import load_model, train

from conftest import write_pairs


def test_default_config_values():
    cfg = TrainConfig()
    assert cfg.repeats == 2
    assert cfg.channels == 512
    assert cfg.batch_size == 32
    assert cfg.epochs_max == 5000
    assert cfg.loss == "mae"
    assert cfg.optimizer == "adam"
    assert cfg.segment_len_s == 10.0


def test_config_round_trip(toy_config):
    back = TrainConfig.from_json(toy_config.to_json())
    assert dataclasses.asdict(back) == dataclasses.asdict(toy_config)


def test_model_preserves_length(toy_config):
    model = Denoiser(toy_config)
    for n in (1000, 1024, 4001):
        x = torch.randn(2, 1, n)
        assert model(x).shape == (2, 1, n)


def test_model_silence_to_silence(toy_config):
    model = Denoiser(toy_config)
    out = model(torch.zeros(1, 1, 2000))
    assert torch.all(out == 0)


def test_overfit_monotone_mae(tmp_path, rng):
    # 8-pair overfit: train MAE decreases monotonically over 50 epochs on
    # >= 90% of seeds
    manifest = write_pairs(tmp_path, rng, count=8)
    mono = 0
    for seed in range(10):
        cfg = TrainConfig(
            channels=32, repeats=1, blocks_per_repeat=3, encoder_filters=32,
            bottleneck_channels=16, learning_rate=3e-4, patience=200, seed=seed,
        )
        out_dir = tmp_path / f"run{seed}"
        train(manifest, cfg, out_dir, epochs=50)
        losses = [json.loads(l)["train_mae"]
                  for l in (out_dir / "train_log.jsonl").read_text().splitlines()]
        assert len(losses) == 50
        mono += all(b < a for a, b in zip(losses, losses[1:]))
    print(f"SECONDARY ACCEPTANCE: monotone train MAE on {mono}/10 seeds")
    assert mono >= 9


def test_best_checkpoint_is_min_validation(tmp_path, rng, toy_config):
    manifest = write_pairs(tmp_path, rng, count=4)
    out_dir = tmp_path / "run"
    best = train(manifest, toy_config, out_dir, epochs=25)
    logged = [json.loads(l)
              for l in (out_dir / "train_log.jsonl").read_text().splitlines()]
    min_val = min(e["val_mae"] for e in logged)
    assert best.val_loss == pytest.approx(min_val, abs=1e-12)
    payload = torch.load(out_dir / "best.pt", map_location="cpu", weights_only=False)
    assert payload["val_mae"] == pytest.approx(min_val, abs=1e-12)
    print("SECONDARY ACCEPTANCE: exported checkpoint holds the minimum "
          f"validation MAE ({min_val:.5f})")


def test_identity_data_beats_zero_baseline(tmp_path, rng, toy_config):
    # noisy == clean: converged MAE must undercut the zero-output baseline
    manifest = write_pairs(tmp_path, rng, count=4, identical=True)
    refs = read_manifest(manifest)
    ds = PairDataset(refs, "train")
    baseline = float(np.mean([c.abs().mean().item() for _, c in
                              [ds[i] for i in range(len(ds))]]))
    best = train(manifest, toy_config, tmp_path / "run", epochs=150)
    assert best.val_loss < baseline


def test_reproducible_loss_curve(tmp_path, rng, toy_config):
    manifest = write_pairs(tmp_path, rng, count=4)
    losses = []
    for tag in ("a", "b"):
        out_dir = tmp_path / tag
        train(manifest, toy_config, out_dir, epochs=10)
        losses.append([json.loads(l)["train_mae"]
                       for l in (out_dir / "train_log.jsonl").read_text().splitlines()])
    assert np.allclose(losses[0], losses[1], atol=1e-3)


def test_denoise_batch_contract(tmp_path, rng, toy_config):
    manifest = write_pairs(tmp_path, rng, count=4)
    best = train(manifest, toy_config, tmp_path / "run", epochs=3)

    in_dir = tmp_path / "noisy_in"
    in_dir.mkdir()
    fs = 8000
    lengths = [3000, 4000, 4096, 5000, 6000, 7000, 8000, 9000, 10000, 12345]
    for i, n in enumerate(lengths):
        x = rng.normal(0, 0.1, n)
        wavfile.write(str(in_dir / f"clip_{i:02d}.wav"), fs,
                      np.round(x * 32768).clip(-32768, 32767).astype(np.int16))
    out_dir = tmp_path / "denoised"
    written = denoise_batch(tmp_path / "run" / "best.pt", in_dir, out_dir)
    assert len(written) == 10
    for i, n in enumerate(lengths):
        out_path = out_dir / f"clip_{i:02d}.wav"
        assert out_path.exists()  # basename preserved
        rate, data = wavfile.read(str(out_path))
        assert data.size == n  # sample count preserved
        assert rate == fs
    print("SECONDARY ACCEPTANCE: 10-file batch preserved basenames and "
          "sample counts")


def test_silence_in_near_silence_out(tmp_path, rng, toy_config):
    manifest = write_pairs(tmp_path, rng, count=4)
    train(manifest, toy_config, tmp_path / "run", epochs=3)
    model = load_model(tmp_path / "run" / "best.pt")
    silent = np.zeros(4000)
    out = denoise_array(model, silent)
    assert np.mean(out**2) <= 1e-12  # bias-free model: exactly silent


def test_trained_model_tracks_clean_fixture(tmp_path, rng, toy_config):
    # a toy model overfit on identical pairs approximately passes clean input
    manifest = write_pairs(tmp_path, rng, count=4, identical=True)
    train(manifest, toy_config, tmp_path / "run", epochs=150)
    model = load_model(tmp_path / "run" / "best.pt")
    refs = read_manifest(manifest)
    ds = PairDataset(refs, "train")
    noisy, clean = ds[0]
    out = denoise_array(model, noisy[0].numpy())
    corr = np.corrcoef(out, clean[0].numpy())[0, 1]
    assert corr > 0.9


def test_divergence_aborts_with_checkpoint(tmp_path, rng, toy_config, monkeypatch):
    # poison the optimizer after the third step: training must abort at the
    # first non-finite epoch and keep the last finite checkpoint
    manifest = write_pairs(tmp_path, rng, count=4)
    orig_step = torch.optim.Adam.step
    calls = {"n": 0}

    def poisoned(self, *a, **k):
        out = orig_step(self, *a, **k)
        calls["n"] += 1
        if calls["n"] == 3:
            with torch.no_grad():
                self.param_groups[0]["params"][0].mul_(float("nan"))
        return out

    monkeypatch.setattr(torch.optim.Adam, "step", poisoned)
    best = train(manifest, toy_config, tmp_path / "run", epochs=10)
    assert 0 <= best.epoch <= 2
    assert np.isfinite(best.val_loss)
    logged = (tmp_path / "run" / "train_log.jsonl").read_text().splitlines()
    assert len(logged) < 10  # stopped at the non-finite epoch


def test_divergence_without_any_finite_checkpoint_raises(tmp_path, rng):
    manifest = write_pairs(tmp_path, rng, count=4)
    cfg = TrainConfig(
        channels=16, repeats=1, blocks_per_repeat=2, encoder_filters=16,
        bottleneck_channels=8, learning_rate=1e6, patience=500,  # instant blowup
    )
    with pytest.raises(RuntimeError, match="finite"):
        train(manifest, cfg, tmp_path / "run", epochs=5)


def test_uniform_length_enforced(tmp_path, rng):
    manifest = write_pairs(tmp_path, rng, count=3)
    # corrupt one pair with a different length
    fs = 8000
    bad = tmp_path / "train_0001_noisy.wav"
    wavfile.write(str(bad), fs, np.zeros(1234, dtype=np.int16))
    refs = read_manifest(manifest)
    ds = PairDataset(refs, "train")
    with pytest.raises(DataError, match="uniform"):
        for i in range(len(ds)):
            ds[i]


def test_cli_train_and_denoise(tmp_path, rng):
    from reef_denoiser.cli import main

    manifest = write_pairs(tmp_path, rng, count=4)
    rc = main([
        "train", "--pairs", str(manifest), "--out-dir", str(tmp_path / "run"),
        "--epochs", "3", "--channels", "16", "--repeats", "1",
    ])
    assert rc == 0
    in_dir = tmp_path / "in"
    in_dir.mkdir()
    wavfile.write(str(in_dir / "a.wav"), 8000, np.zeros(4000, dtype=np.int16))
    rc = main([
        "denoise", "--model", str(tmp_path / "run" / "best.pt"),
        "--in-dir", str(in_dir), "--out-dir", str(tmp_path / "out"),
    ])
    assert rc == 0
    assert (tmp_path / "out" / "a.wav").exists()
