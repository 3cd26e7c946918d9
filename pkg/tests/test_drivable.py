import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roaderase.drivable import derive_roi, segmentation_alone_score

from oracles import enclosed_oracle

ROAD, SIDEWALK, CAR, SKY = 1, 2, 3, 4


def test_all_road_map_is_full_roi():
    sem = np.full((20, 20), ROAD)
    assert derive_roi(sem, [ROAD]).all()


def test_annulus_island_included():
    sem = np.full((16, 16), ROAD)
    sem[6:10, 6:10] = CAR  # island fully inside the road
    roi = derive_roi(sem, [ROAD])
    assert roi.all()
    score = segmentation_alone_score(sem, [ROAD])
    assert (score[6:10, 6:10] == 1.0).all()
    assert score.sum() == 16.0


def test_border_gap_excludes_component():
    # hand-built 16x16: road frame with a gap in the top edge, so the
    # inner non-road region leaks to the border and must be excluded
    sem = np.full((16, 16), SKY)
    sem[4:12, 2:14] = ROAD
    sem[6:10, 4:12] = CAR        # would-be island
    sem[0:6, 7] = CAR            # corridor cutting through the road to the border
    roi = derive_roi(sem, [ROAD])
    road = sem == ROAD
    expected = road | enclosed_oracle(road)
    assert np.array_equal(roi, expected)
    assert not roi[7, 7]  # the leaked component is out


def test_road_and_sidewalk_both_count():
    sem = np.full((8, 8), SKY)
    sem[2:6, 1:4] = ROAD
    sem[2:6, 4:7] = SIDEWALK
    roi = derive_roi(sem, [ROAD, SIDEWALK])
    assert roi[3, 2] and roi[3, 5]
    assert not roi[0, 0]


def test_ego_mask_subtracted():
    sem = np.full((10, 10), ROAD)
    ego = np.zeros((10, 10), dtype=bool)
    ego[8:, 3:7] = True
    roi = derive_roi(sem, [ROAD], ego_mask=ego)
    assert not roi[9, 4]
    assert roi[0, 0]


def test_no_road_gives_empty_roi():
    sem = np.full((12, 12), SKY)
    assert not derive_roi(sem, [ROAD]).any()


def test_empty_road_ids_rejected():
    with pytest.raises(ValueError):
        derive_roi(np.zeros((4, 4), dtype=np.uint8), [])


def test_diagonal_touch_does_not_connect():
    # 4-connectivity: a diagonal-only path to the border must not rescue a
    # component from enclosure
    sem = np.full((7, 7), ROAD)
    sem[3, 3] = CAR
    sem[2, 2] = CAR  # touches island only diagonally, enclosed itself
    roi = derive_roi(sem, [ROAD])
    assert roi.all()


def _random_sem(rng):
    sem = (rng.random((32, 32)) < 0.55).astype(np.uint8) * ROAD
    sem[sem == 0] = SKY
    return sem


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_enclosure_matches_flood_fill_oracle(seed):
    rng = np.random.default_rng(seed)
    sem = _random_sem(rng)
    road = sem == ROAD
    expected_roi = road | enclosed_oracle(road)
    assert np.array_equal(derive_roi(sem, [ROAD]), expected_roi)
    score = segmentation_alone_score(sem, [ROAD])
    assert np.array_equal(score > 0, enclosed_oracle(road))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_derive_roi_idempotent(seed):
    rng = np.random.default_rng(seed)
    sem = _random_sem(rng)
    roi = derive_roi(sem, [ROAD])
    relabeled = sem.copy()
    relabeled[roi] = ROAD
    assert np.array_equal(derive_roi(relabeled, [ROAD]), roi)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_score_support_subset_of_roi(seed):
    rng = np.random.default_rng(seed)
    sem = _random_sem(rng)
    roi = derive_roi(sem, [ROAD])
    score = segmentation_alone_score(sem, [ROAD])
    assert ((score > 0) <= roi).all()
