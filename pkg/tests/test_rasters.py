import numpy as np

from roaderase import rasters


def test_image_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    image = rng.random((20, 30, 3))
    path = tmp_path / "img.png"
    rasters.save_image(path, image)
    loaded = rasters.load_image(path)
    assert loaded.shape == (20, 30, 3)
    assert np.abs(loaded - image).max() <= 0.5 / 255 + 1e-9


def test_mask_round_trip(tmp_path):
    mask = np.zeros((16, 16), dtype=np.uint8)
    mask[2:5, 3:9] = 1
    mask[10, 10] = 255
    path = tmp_path / "mask.png"
    rasters.save_mask(path, mask)
    assert np.array_equal(rasters.load_mask(path), mask)


def test_bool_mask_saved_as_binary(tmp_path):
    mask = np.zeros((8, 8), dtype=bool)
    mask[1, 1] = True
    path = tmp_path / "roi.png"
    rasters.save_mask(path, mask)
    loaded = rasters.load_mask(path)
    assert loaded[1, 1] == 1 and loaded.sum() == 1


def test_heatmap_round_trip_16bit(tmp_path):
    rng = np.random.default_rng(1)
    heat = rng.random((12, 17)).astype(np.float32)
    heat[0, 0] = 0.0
    heat[0, 1] = 1.0
    path = tmp_path / "heat.png"
    rasters.save_heatmap(path, heat)
    loaded = rasters.load_heatmap(path)
    assert loaded.dtype == np.float32
    assert np.abs(loaded - heat).max() <= 0.5 / 65535 + 1e-9
    assert loaded[0, 0] == 0.0 and loaded[0, 1] == 1.0


def test_semantic_round_trip_8_and_16_bit(tmp_path):
    sem8 = np.arange(64, dtype=np.int64).reshape(8, 8) % 200
    rasters.save_semantic(tmp_path / "sem8.png", sem8)
    assert np.array_equal(rasters.load_semantic(tmp_path / "sem8.png"), sem8)

    sem16 = (np.arange(64, dtype=np.int64).reshape(8, 8) * 300) % 60000
    rasters.save_semantic(tmp_path / "sem16.png", sem16)
    assert np.array_equal(rasters.load_semantic(tmp_path / "sem16.png"), sem16)


def test_vocab_sidecar(tmp_path):
    rasters.save_vocab(tmp_path / "vocab.json", {"road": 1, "sidewalk": 2})
    assert rasters.load_vocab(tmp_path / "vocab.json") == {"road": 1, "sidewalk": 2}


def test_writers_byte_stable(tmp_path):
    rng = np.random.default_rng(2)
    image = rng.random((10, 10, 3))
    rasters.save_image(tmp_path / "a.png", image)
    rasters.save_image(tmp_path / "b.png", image)
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()


def test_frame_ids_sorted(tmp_path):
    d = tmp_path / "images"
    d.mkdir()
    for name in ("b.png", "a.png", "c.png"):
        rasters.save_mask(d / name, np.zeros((4, 4), dtype=np.uint8))
    (d / "notes.txt").write_text("ignore me")
    assert rasters.frame_ids(d) == ["a", "b", "c"]
    assert rasters.frame_ids(tmp_path / "missing") == []
