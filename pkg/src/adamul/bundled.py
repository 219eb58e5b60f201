"""Access to the assets shipped with the package: a quantized
LeNet-class digit classifier (manifest + blob container) and its
held-out test split in IDX format."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from . import idx, nn

MODEL_MANIFEST = "lenet_int8.json"
MODEL_BLOB = "lenet_int8.bin"
TEST_IMAGES = "digits_test_images.idx.gz"
TEST_LABELS = "digits_test_labels.idx.gz"


def asset_path(name: str) -> Path:
    path = Path(str(resources.files("adamul") / "assets" / name))
    if not path.exists():
        raise FileNotFoundError(
            f"bundled asset {name} missing; run tools/build_fixture.py to regenerate")
    return path


def load_bundled_model() -> nn.ModelGraph:
    return nn.load_model(asset_path(MODEL_MANIFEST), asset_path(MODEL_BLOB))


def load_bundled_test_set():
    """(images uint8 (N,28,28), labels uint8 (N,)) of the test split."""
    return idx.load_image_set(asset_path(TEST_IMAGES), asset_path(TEST_LABELS))
