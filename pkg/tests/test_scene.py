import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ground3d.errors import (
    MissingGridError,
    SceneParseError,
    SceneValidationError,
    UnknownObjectError,
)
from ground3d.generator import GeneratorConfig, generate_scene
from ground3d.lexicon import vocabulary
from ground3d.scene import (
    ObjectAttributes,
    attach_captions,
    load_caption_sidecar,
    load_scene,
    parse_caption_attributes,
    save_scene,
    scene_from_dict,
)

MINIMAL = {
    "scene_id": "mini",
    "up_axis": [0, 0, 1],
    "objects": [
        {"id": 0, "label": "chair", "caption": None, "center": [1.0, 1.0, 0.4], "extent": [0.2, 0.2, 0.4]}
    ],
    "free_space": {"origin": [0.0, 0.0], "resolution": 1.0, "width": 1, "height": 1, "cells": [1]},
}


def test_minimal_scene_loads():
    scene = scene_from_dict(MINIMAL)
    assert len(scene.objects) == 1
    assert scene.free_space.traversable_count == 1
    assert scene.object(0).label == "chair"


def test_duplicate_id_rejected():
    doc = json.loads(json.dumps(MINIMAL))
    doc["objects"].append(dict(doc["objects"][0]))
    doc["objects"][0]["id"] = 3
    doc["objects"][1]["id"] = 3
    with pytest.raises(SceneValidationError, match="3"):
        scene_from_dict(doc)


def test_nonpositive_extent_rejected():
    doc = json.loads(json.dumps(MINIMAL))
    doc["objects"][0]["extent"] = [0.2, 0.0, 0.4]
    with pytest.raises(SceneValidationError):
        scene_from_dict(doc)


def test_missing_grid_error():
    doc = {k: v for k, v in MINIMAL.items() if k != "free_space"}
    with pytest.raises(MissingGridError):
        scene_from_dict(doc)


def test_malformed_json_file(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", "utf-8")
    with pytest.raises(SceneParseError):
        load_scene(path)


def test_up_axis_must_be_z():
    doc = json.loads(json.dumps(MINIMAL))
    doc["up_axis"] = [0, 1, 0]
    with pytest.raises(SceneValidationError):
        scene_from_dict(doc)


def test_cells_accept_array_and_roundtrip_base64(tmp_path):
    doc = json.loads(json.dumps(MINIMAL))
    doc["free_space"].update({"width": 3, "height": 2, "cells": [1, 0, 1, 0, 1, 0]})
    scene = scene_from_dict(doc)
    assert scene.free_space.cells.tolist() == [[True, False, True], [False, True, False]]
    path = tmp_path / "scene.json"
    save_scene(scene, path)
    data = json.loads(path.read_text())
    assert isinstance(data["free_space"]["cells"], str)  # canonical form packs bits
    again = load_scene(path)
    assert np.array_equal(again.free_space.cells, scene.free_space.cells)


def test_generated_scene_roundtrips_byte_identical(tmp_path):
    scene, _ = generate_scene(GeneratorConfig(n_objects=(20, 20)), 42)
    first = tmp_path / "a.json"
    second = tmp_path / "b.json"
    save_scene(scene, first)
    save_scene(load_scene(first), second)
    assert first.read_bytes() == second.read_bytes()


def test_loaded_size_matches_extent_volume(tmp_path):
    scene, _ = generate_scene(GeneratorConfig(), 5)
    path = tmp_path / "scene.json"
    save_scene(scene, path)
    for obj in load_scene(path).objects:
        volume = 8.0 * obj.extent[0] * obj.extent[1] * obj.extent[2]
        assert abs(obj.size - volume) <= 1e-9 * abs(volume)


def test_stored_size_mismatch_rejected():
    from ground3d.scene import SceneObject

    with pytest.raises(SceneValidationError):
        SceneObject(id=0, label="chair", center=[0, 0, 0], extent=[0.1, 0.1, 0.1], size=99.0)


# ---------------------------------------------------------------------------
# captions

def test_attach_captions_empty_map_is_identity():
    scene = scene_from_dict(MINIMAL)
    assert attach_captions(scene, {}) is scene


def test_attach_captions_sets_target():
    scene, _ = generate_scene(GeneratorConfig(), 3)
    updated = attach_captions(scene, {2: "The chair is red, wooden, square"})
    assert updated.object(2).caption == "The chair is red, wooden, square"
    for obj in scene.objects:
        if obj.id != 2:
            assert updated.object(obj.id).caption == obj.caption


def test_attach_captions_unknown_id():
    scene = scene_from_dict(MINIMAL)
    with pytest.raises(UnknownObjectError, match="99"):
        attach_captions(scene, {99: "The ghost is gray"})


def test_caption_sidecar_loading(tmp_path):
    path = tmp_path / "captions.json"
    path.write_text(json.dumps({"0": "The chair is red, wooden, square"}), "utf-8")
    assert load_caption_sidecar(path) == {0: "The chair is red, wooden, square"}


def test_parse_caption_template():
    attrs = parse_caption_attributes("The chair is red, wooden, square")
    assert attrs == ObjectAttributes(color="red", material="wooden", shape="square")


def test_parse_caption_empty():
    assert parse_caption_attributes("") == ObjectAttributes()
    assert parse_caption_attributes(None) == ObjectAttributes()


def test_parse_caption_name_adjectives_go_to_extra():
    attrs = parse_caption_attributes("The tall recycling bin is blue, plastic, cylindrical")
    assert attrs.color == "blue"
    assert attrs.material == "plastic"
    assert attrs.shape == "cylindrical"
    assert attrs.extra == ("tall",)


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=80))
def test_parse_caption_never_raises_and_stays_in_vocabulary(text):
    attrs = parse_caption_attributes(text)
    vocab = vocabulary()
    if attrs.color is not None:
        assert attrs.color in vocab["colors"]
    if attrs.material is not None:
        assert attrs.material in vocab["materials"]
    if attrs.shape is not None:
        assert attrs.shape in vocab["shapes"]


# ---------------------------------------------------------------------------
# generator

def test_generate_single_object():
    scene, _ = generate_scene(GeneratorConfig(n_objects=(1, 1)), 0)
    assert len(scene.objects) == 1
    grid = scene.free_space
    assert grid.traversable_count > 0.8 * grid.cells.size


def test_generate_deterministic():
    cfg = GeneratorConfig()
    a, ann_a = generate_scene(cfg, 11)
    b, ann_b = generate_scene(cfg, 11)
    assert [o.center.tolist() for o in a.objects] == [o.center.tolist() for o in b.objects]
    assert ann_a == ann_b


def test_generate_no_pairwise_overlap_seed42():
    scene, _ = generate_scene(GeneratorConfig(n_objects=(20, 20)), 42)
    objs = scene.objects
    for i in range(len(objs)):
        for j in range(i + 1, len(objs)):
            a, b = objs[i], objs[j]
            overlapping = all(
                abs(a.center[k] - b.center[k]) < a.extent[k] + b.extent[k] for k in range(3)
            )
            assert not overlapping, (a.id, b.id)


def test_generated_scene_passes_validation(tmp_path):
    scene, _ = generate_scene(GeneratorConfig(), 9)
    path = tmp_path / "scene.json"
    save_scene(scene, path)
    load_scene(path)


def test_annotation_attributes_match_captions():
    scene, annotations = generate_scene(GeneratorConfig(), 21)
    for obj in scene.objects:
        want = annotations.objects[obj.id].attributes
        got = parse_caption_attributes(obj.caption)
        assert got.color == want.color
        assert got.material == want.material
        assert got.shape == want.shape
