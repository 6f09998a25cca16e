import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hybridsr import data

TILE = 96


def _natural_tiles(tile: int = TILE):
    """Non-overlapping RGB tiles cut from the photographs bundled with
    scikit-image, restricted to the middle detail band (total-variation
    ranked) so the corpus resembles typical benchmark imagery rather than
    flat sky or extreme texture."""
    from skimage import data as skdata

    photos = [
        skdata.astronaut(),
        skdata.chelsea(),
        skdata.coffee(),
        skdata.rocket(),
        skdata.cat(),
        skdata.immunohistochemistry(),
        skdata.hubble_deep_field(),
    ]
    ranked = []
    for img in photos:
        arr = np.asarray(img, dtype=np.float64)
        for y in range(0, arr.shape[0] - tile + 1, tile):
            for x in range(0, arr.shape[1] - tile + 1, tile):
                t = arr[y : y + tile, x : x + tile, :]
                tv = np.abs(np.diff(t, axis=0)).mean() + np.abs(np.diff(t, axis=1)).mean()
                ranked.append((tv, len(ranked), t))
    ranked.sort(key=lambda r: (r[0], r[1]))
    n = len(ranked)
    return [t for _, _, t in ranked[int(0.45 * n) : int(0.90 * n)]]


@pytest.fixture(scope="session")
def image_corpus(tmp_path_factory):
    """Natural RGB image corpus: train/ holds 20 tiles, test/ holds 5
    held-out tiles sampled across the detail band."""
    root = tmp_path_factory.mktemp("corpus")
    train_dir = root / "train"
    test_dir = root / "test"
    train_dir.mkdir()
    test_dir.mkdir()
    tiles = _natural_tiles()
    assert len(tiles) >= 25
    test_tiles = tiles[::9][:5]
    train_tiles = [t for t in tiles if not any(t is u for u in test_tiles)][:20]
    assert len(train_tiles) == 20 and len(test_tiles) == 5
    for i, t in enumerate(train_tiles):
        data.save_image(t, train_dir / f"train_{i:02d}.png")
    for i, t in enumerate(test_tiles):
        data.save_image(t, test_dir / f"test_{i}.png")
    return {"train": train_dir, "test": test_dir}
