import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from ifct.basefn.segmentation import SegmentationParams, check_connected, segment_masses, segment_organ
from ifct.errors import DimensionMismatch
from ifct.volume import Mask, Volume

WINDOW = SegmentationParams(0, 100, 1)


def blank(dims=(12, 12, 12)):
    return np.full(dims, -1000, dtype=np.int16)


def test_nothing_in_window():
    assert segment_organ(Volume(blank()), WINDOW).is_empty()


def test_largest_component_wins():
    arr = blank()
    arr[1:6, 1, 1] = 50
    arr[8:11, 8, 8] = 50
    m = segment_organ(Volume(arr), WINDOW)
    assert m.popcount == 5
    assert m.voxels[1:6, 1, 1].all()


def test_box_phantom_popcount():
    arr = blank()
    arr[2:6, 3:7, 4:8] = 60
    expected = int(((arr >= 0) & (arr <= 100)).sum())
    assert segment_organ(Volume(arr), WINDOW).popcount == expected == 64


def test_equal_sizes_go_to_earliest():
    arr = blank()
    arr[9, 9, 9] = 50
    arr[0, 0, 0] = 50
    m = segment_organ(Volume(arr), WINDOW)
    assert m.voxels[0, 0, 0] and m.popcount == 1


def test_diagonal_voxels_are_connected():
    arr = blank()
    arr[1, 1, 1] = arr[2, 2, 2] = arr[3, 3, 3] = 50
    assert segment_organ(Volume(arr), WINDOW).popcount == 3


def test_masses_need_organ():
    vol = Volume(blank())
    assert len(segment_masses(vol, Mask(np.zeros((12, 12, 12), dtype=bool)), WINDOW)) == 0


def test_two_spheres_larger_first():
    arr = blank()
    arr[1:4, 1:4, 1:4] = 20       # 27 voxels, first in raster order
    arr[6:11, 6:11, 6:11] = 20    # 125 voxels
    organ = Mask(np.ones(arr.shape, dtype=bool))
    lesions = segment_masses(Volume(arr), organ, SegmentationParams(0, 100, 5), "liver")
    assert [l.voxel_count for l in lesions] == [125, 27]
    assert [l.lesion_id for l in lesions] == [2, 1]
    assert lesions.source_organ == "liver"


def test_size_filter():
    arr = blank()
    arr[1:3, 1, 1] = 20
    organ = Mask(np.ones(arr.shape, dtype=bool))
    assert len(segment_masses(Volume(arr), organ, SegmentationParams(0, 100, 3))) == 0


def test_grid_mismatch():
    with pytest.raises(DimensionMismatch):
        segment_masses(Volume(blank()), Mask(np.ones((12, 12, 11), dtype=bool)), WINDOW)


def test_params_validated():
    with pytest.raises(ValueError):
        SegmentationParams(10, 10, 1)
    with pytest.raises(ValueError):
        SegmentationParams(0, 10, 0)


@given(hnp.arrays(np.int16, (6, 6, 6), elements=st.sampled_from([-1000, 20, 50])), st.integers(1, 4))
def test_masses_are_connected_ordered_and_deterministic(arr, min_vox):
    vol = Volume(arr)
    organ = Mask(np.ones(arr.shape, dtype=bool))
    params = SegmentationParams(0, 100, min_vox)
    first = segment_masses(vol, organ, params)
    again = segment_masses(vol, organ, params)
    assert [(l.lesion_id, l.mask) for l in first] == [(l.lesion_id, l.mask) for l in again]
    keys = [(-l.voxel_count, l.lesion_id) for l in first]
    assert keys == sorted(keys)
    assert sorted(l.lesion_id for l in first) == list(range(1, len(first) + 1))
    covered = np.zeros(arr.shape, dtype=bool)
    for l in first:
        assert check_connected(l.mask)
        assert l.voxel_count >= min_vox
        assert not (covered & l.mask.voxels).any()
        covered |= l.mask.voxels
