import json
import shutil
import subprocess

import numpy as np
import pytest

from clip_probe import (
    SyntheticDataset,
    extract_attention,
    extract_features,
    load_checkpoint,
    run_probe,
    top1_accuracy,
)
from clip_probe.zeroshot import fill_template

ATTN_DRIFT = shutil.which("attn-drift")


def probe_config(tmp_path, **overrides):
    config = {
        "checkpoint": {"kind": "builtin", "arch": "tiny", "seed": 0},
        "dataset": {"kind": "synthetic", "n_classes": 4, "n_per_class": 5,
                    "image_size": 32, "seed": 0},
        "subset_size": 8,
        "subset_seed": 3,
        "batch_size": 4,
        "benchmarks": [
            {"name": "cifar100",
             "dataset": {"kind": "synthetic", "n_classes": 4, "n_per_class": 3,
                         "image_size": 32, "seed": 9}}
        ],
        "run": {"run_id": "tiny_run", "method": "pretrained", "lr": 0.0,
                "seed": 0, "baseline_run_id": "", "best_val_acc": 0.0},
        "output_dir": str(tmp_path / "out"),
    }
    config.update(overrides)
    return config


def test_extraction_shapes(tiny_model, small_dataset):
    indices = list(range(6))
    att = extract_attention(tiny_model, small_dataset, indices, batch_size=4)
    assert att.shape == (6, 2, 2, 17, 17)
    assert att.dtype == np.float32
    assert float(np.abs(att.sum(-1) - 1.0).max()) < 1e-4
    feats = extract_features(tiny_model, small_dataset, indices, batch_size=4)
    assert feats.shape == (2, 6, 32)


def test_export_determinism(tmp_path):
    c1 = probe_config(tmp_path, output_dir=str(tmp_path / "o1"))
    c2 = probe_config(tmp_path, output_dir=str(tmp_path / "o2"))
    s1 = run_probe(c1, ops=("attention", "features"))
    s2 = run_probe(c2, ops=("attention", "features"))
    for key in ("attention_dump", "feature_dump"):
        b1 = open(s1[key], "rb").read()
        b2 = open(s2[key], "rb").read()
        assert b1 == b2


def test_run_probe_all_ops(tmp_path):
    summary = run_probe(probe_config(tmp_path))
    assert summary["subset_size"] == 8
    assert summary["attention_shape"] == [8, 2, 2, 17, 17]
    assert summary["feature_shape"] == [2, 8, 32]
    assert "cifar100" in summary["zero_shot"]

    record = json.loads(open(summary["run_record"]).read())
    for key in ("run_id", "dataset", "method", "lr", "seed", "best_val_acc",
                "zero_shot", "baseline_run_id"):
        assert key in record
    subset = json.loads(open(summary["subset"]).read())
    sidecar = json.loads(open(summary["attention_dump"] + ".meta.json").read())
    assert sidecar["image_ids"] == subset["image_ids"]


def test_hf_dir_checkpoint_round_trip(tiny_checkpoint_dir, tmp_path, small_dataset):
    reloaded = load_checkpoint({"kind": "hf_dir", "path": str(tiny_checkpoint_dir)})
    fresh = load_checkpoint({"kind": "builtin", "arch": "tiny", "seed": 0})
    indices = list(range(4))
    np.testing.assert_allclose(
        extract_attention(reloaded, small_dataset, indices, batch_size=4),
        extract_attention(fresh, small_dataset, indices, batch_size=4),
        atol=1e-7,
    )
    assert reloaded.supports_text()


def test_template_handling():
    assert fill_template("a photo of a {class name}", "cat") == "a photo of a cat"
    assert fill_template("{} in the wild", "dog") == "dog in the wild"
    with pytest.raises(ValueError):
        fill_template("no placeholder", "cat")


def test_synthetic_benchmark_with_matching_features_is_100_percent():
    rng = np.random.default_rng(0)
    text = rng.normal(size=(10, 16))
    text /= np.linalg.norm(text, axis=1, keepdims=True)
    labels = np.repeat(np.arange(10), 3)
    image = text[labels]  # image features equal to their class text embedding
    assert top1_accuracy(image, text, labels) == 100.0


def test_zeroshot_consistency_between_api_and_cli(tmp_path, tiny_model):
    from clip_probe import adapter_aware_zeroshot

    bench = SyntheticDataset(n_classes=4, n_per_class=3, image_size=32, seed=9)
    direct = adapter_aware_zeroshot(tiny_model, bench, "a photo of a {class name}",
                                    batch_size=4)
    summary = run_probe(probe_config(tmp_path), ops=("zeroshot",))
    assert summary["zero_shot"]["cifar100"] == direct


@pytest.mark.skipif(ATTN_DRIFT is None, reason="attn-drift CLI not installed")
def test_exports_pass_engine_validation(tmp_path):
    summary = run_probe(probe_config(tmp_path), ops=("attention", "features"))
    result = subprocess.run(
        [ATTN_DRIFT, "validate", "--in", summary["attention_dump"],
         summary["feature_dump"], "--tol", "1e-4"],
        capture_output=True, text=True,
    )
    assert result.returncode == 0, result.stdout + result.stderr


@pytest.mark.skipif(ATTN_DRIFT is None, reason="attn-drift CLI not installed")
def test_engine_self_cka_on_export_is_one(tmp_path):
    summary = run_probe(probe_config(tmp_path), ops=("features",))
    out_dir = tmp_path / "cka"
    result = subprocess.run(
        [ATTN_DRIFT, "cka", "--a", summary["feature_dump"],
         "--b", summary["feature_dump"], "--out", str(out_dir)],
        capture_output=True, text=True,
    )
    assert result.returncode == 0, result.stdout + result.stderr
    payload = json.loads(next(out_dir.glob("*.cka.json")).read_text())
    assert all(abs(v - 1.0) < 1e-6 for v in payload["per_layer"])


def test_config_validation(tmp_path):
    from clip_probe import load_config

    path = tmp_path / "c.json"
    path.write_text(json.dumps(probe_config(tmp_path, prompt_template="no slot")))
    with pytest.raises(ValueError):
        load_config(path)

    path.write_text(json.dumps({**probe_config(tmp_path), "bogus_key": 1}))
    with pytest.raises(ValueError):
        load_config(path)
