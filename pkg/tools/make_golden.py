"""Train and freeze the toy golden model under testdata/golden/.

The golden model backs regression tests (spatially-variant map gap,
sensitivity sweeps, CLI and service golden outputs). Recipe and seed are
fixed here; retraining on the same platform reproduces the file bitwise.
Run from the repository root:

    python3 tools/make_golden.py
"""

from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent

GOLDEN_CONFIG = dict(num_layers=4, num_channels=24)
GOLDEN_PLAN = dict(
    patches_per_epoch=128 * 12,
    noise_range=(0.0, 50.0),
    finetune_epochs=2,
    max_epochs=60,
)
GOLDEN_SEED = 0


def train_golden():
    from mapdenoise.data import load_manifest
    from mapdenoise.model import ModelConfig
    from mapdenoise.optim import TrainPlan, train

    manifest = load_manifest(ROOT / "testdata" / "manifest.txt", patch_size=32)
    result = train(
        TrainPlan(**GOLDEN_PLAN), manifest, ModelConfig(**GOLDEN_CONFIG),
        seed=GOLDEN_SEED)
    return result


def main() -> None:
    from mapdenoise.model import save_model

    out = ROOT / "testdata" / "golden"
    out.mkdir(parents=True, exist_ok=True)
    result = train_golden()
    save_model(out / "toy.model", result.params)
    (out / "toy.log").write_text("\n".join(result.log) + "\n")
    print(f"wrote {out / 'toy.model'} ({len(result.log)} epochs, "
          f"final loss {result.epoch_losses[-1]:.4f})")


if __name__ == "__main__":
    main()
