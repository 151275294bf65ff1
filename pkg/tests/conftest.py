import numpy as np
import pytest

from ground3d.generator import GeneratorConfig, generate_scene
from ground3d.scene import FreeSpaceGrid, Scene, SceneObject

POINT = 1e-4  # half-size for point-like test boxes


def make_scene(spec, grid=None, scene_id="test", captions=None):
    """Scene from (label, center[, extent]) tuples; ids follow list order."""
    objects = []
    for oid, entry in enumerate(spec):
        label, center = entry[0], entry[1]
        extent = entry[2] if len(entry) > 2 else (POINT, POINT, POINT)
        caption = captions.get(oid) if captions else None
        objects.append(
            SceneObject(id=oid, label=label, center=np.asarray(center, dtype=float),
                        extent=np.asarray(extent, dtype=float), caption=caption)
        )
    if grid is None:
        grid = FreeSpaceGrid(origin=np.array([-5.0, -5.0]), resolution=0.5,
                             cells=np.ones((20, 20), dtype=bool))
    return Scene(scene_id=scene_id, objects=tuple(objects), free_space=grid)


@pytest.fixture(scope="session")
def small_scenes():
    """A bank of generated scenes shared by the heavier property tests."""
    cfg = GeneratorConfig()
    return [generate_scene(cfg, seed) for seed in range(40)]


DENSE = GeneratorConfig(n_objects=(5, 50), room=(14.0, 14.0), max_attempts=400)


@pytest.fixture(scope="session")
def oracle_scenes():
    """Scenes in the 5-50 object range used by differential tests."""
    return [generate_scene(DENSE, 1000 + seed)[0] for seed in range(100)]
