import numpy as np
import pytest
from PIL import Image


@pytest.fixture(scope="session")
def image_folder(tmp_path_factory):
    """Tiny deterministic dataset: 3 classes x 4 images of solid-ish noise."""
    root = tmp_path_factory.mktemp("images")
    rng = np.random.default_rng(0)
    for class_name in ("apple", "boat", "cat"):
        class_dir = root / class_name
        class_dir.mkdir()
        for i in range(4):
            pixels = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
            Image.fromarray(pixels, "RGB").save(class_dir / f"img_{i:02d}.png")
    return root
