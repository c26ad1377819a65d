import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import digitized_sphere, hausdorff, max_pairwise, points_mm
from ifct.basefn.geometry import (
    border_thickness_mm, boundary_mask, calc_mass_diameter_cm, diameter_bbox_mm, diameter_equiv_sphere_mm,
    diameter_feret_mm, diameter_mm, fill_cavities, hausdorff_mm, lesion_volume_mm3, mean_intensity_hu,
)
from ifct.errors import DimensionMismatch, EmptyMask
from ifct.volume import Mask, Volume


def mask_of(voxels, dims=(8, 8, 8), spacing=(1.0, 1.0, 1.0)):
    arr = np.zeros(dims, dtype=bool)
    for v in voxels:
        arr[v] = True
    return Mask(arr, spacing)


def sphere_mask(diameter, size=None):
    offs = digitized_sphere(diameter)
    size = size or int(diameter) + 5
    c = size // 2
    return mask_of([(c + i, c + j, c + k) for i, j, k in offs], (size, size, size))


voxel_sets = st.sets(st.tuples(st.integers(0, 7), st.integers(0, 7), st.integers(0, 7)), min_size=1, max_size=40)
spacings = st.tuples(*[st.sampled_from([0.5, 0.8, 1.0, 1.25, 2.5])] * 3)


def test_single_voxel_extents_are_zero():
    m = mask_of([(3, 3, 3)])
    assert diameter_feret_mm(m) == 0.0
    assert diameter_bbox_mm(m) == 0.0


def test_collinear_pair():
    m = mask_of([(0, 0, 0), (3, 0, 0)])
    assert diameter_feret_mm(m) == 3.0
    assert calc_mass_diameter_cm(m, "feret") == pytest.approx(0.3)


def test_equiv_sphere_formula():
    assert diameter_equiv_sphere_mm(mask_of([(0, 0, 0)])) == pytest.approx((6 / math.pi) ** (1 / 3), rel=1e-12)
    big = Mask(np.ones((10, 10, 10), dtype=bool))
    assert diameter_equiv_sphere_mm(big) == pytest.approx(12.407009817988, rel=1e-10)
    assert calc_mass_diameter_cm(big, "equiv_sphere") == pytest.approx(1.2407009817988, rel=1e-10)


def test_bbox_uses_axis_spacing():
    m = mask_of([(0, 0, 0), (0, 0, 2)], spacing=(1, 1, 3))
    assert diameter_bbox_mm(m) == 6.0


def test_dispatch_matches_direct_call():
    m = mask_of([(0, 0, 0), (2, 3, 1), (5, 1, 4)])
    assert calc_mass_diameter_cm(m, "feret") == diameter_feret_mm(m) / 10.0
    assert diameter_mm(m, "bbox") == diameter_bbox_mm(m)
    with pytest.raises(ValueError):
        diameter_mm(m, "caliper")


def test_twenty_voxel_anisotropic_feret_matches_pairs():
    rng = np.random.default_rng(11)
    vox = {tuple(int(x) for x in rng.integers(0, 8, 3)) for _ in range(20)}
    sp = (0.8, 0.8, 2.5)
    assert diameter_feret_mm(mask_of(vox, spacing=sp)) == pytest.approx(max_pairwise(points_mm(vox, sp)), rel=1e-12)


def test_empty_mask_errors():
    empty = Mask(np.zeros((2, 2, 2), dtype=bool))
    for fn in (diameter_feret_mm, diameter_equiv_sphere_mm, diameter_bbox_mm, border_thickness_mm):
        with pytest.raises(EmptyMask):
            fn(empty)
    with pytest.raises(EmptyMask):
        hausdorff_mm(empty, mask_of([(0, 0, 0)], dims=(2, 2, 2)))


def test_mean_intensity():
    arr = np.zeros((3, 1, 1), dtype=np.int16)
    arr[:, 0, 0] = (10, 20, 30)
    assert mean_intensity_hu(Volume(arr), Mask(np.ones((3, 1, 1), dtype=bool))) == 20.0
    one = np.full((1, 1, 1), -7)
    assert mean_intensity_hu(Volume(one), Mask(np.ones((1, 1, 1), dtype=bool))) == -7.0


def test_mean_intensity_random_fifty():
    rng = np.random.default_rng(5)
    arr = rng.integers(-1000, 1000, (10, 10, 10)).astype(np.int16)
    flat = rng.choice(1000, 50, replace=False)
    mask = np.zeros(1000, dtype=bool)
    mask[flat] = True
    mask = mask.reshape(10, 10, 10)
    expected = sum(int(v) for v in arr[mask]) / 50
    assert mean_intensity_hu(Volume(arr), Mask(mask)) == pytest.approx(expected, rel=1e-12)


def test_mean_intensity_grid_guard():
    with pytest.raises(DimensionMismatch):
        mean_intensity_hu(Volume(np.zeros((2, 2, 2))), Mask(np.ones((2, 2, 1), dtype=bool)))


def test_hausdorff_examples():
    a = mask_of([(0, 0, 0)])
    assert hausdorff_mm(a, a) == 0.0
    assert hausdorff_mm(a, mask_of([(0, 0, 4)])) == 4.0
    assert hausdorff_mm(mask_of([(0, 0, 0), (5, 0, 0)]), a) == 5.0


def test_boundary_examples():
    assert boundary_mask(mask_of([(2, 2, 2)])).popcount == 1
    cube = mask_of([(i, j, k) for i in range(1, 4) for j in range(1, 4) for k in range(1, 4)])
    b = boundary_mask(cube)
    assert b.popcount == 26
    assert not b.voxels[2, 2, 2]
    assert boundary_mask(Mask(np.zeros((3, 3, 3), dtype=bool))).popcount == 0


def test_boundary_counts_grid_edge_as_background():
    assert boundary_mask(Mask(np.ones((3, 3, 3), dtype=bool))).popcount == 26


def hollow(outer, inner, spacing=(1.0, 1.0, 1.0)):
    arr = np.zeros((outer + 2,) * 3, dtype=bool)
    arr[1:-1, 1:-1, 1:-1] = True
    lo = 1 + (outer - inner) // 2
    arr[lo:lo + inner, lo:lo + inner, lo:lo + inner] = False
    return Mask(arr, spacing)


def test_fill_closes_cavity():
    shell = hollow(5, 3)
    assert fill_cavities(shell).popcount == 125


def test_thickness_matches_brute_force():
    for outer, inner in ((5, 3), (7, 3), (9, 3)):
        shell = hollow(outer, inner)
        a = points_mm([tuple(v) for v in boundary_mask(shell).indices()], shell.spacing_mm)
        b = points_mm([tuple(v) for v in boundary_mask(fill_cavities(shell)).indices()], shell.spacing_mm)
        assert border_thickness_mm(shell) == pytest.approx(hausdorff(a, b), rel=1e-12)
    # frozen from the brute-force oracle above: centre-to-centre wall distances
    assert border_thickness_mm(hollow(5, 3)) == 0.0
    assert border_thickness_mm(hollow(7, 3)) == 1.0
    assert border_thickness_mm(hollow(9, 3)) == 2.0


def test_thickness_of_solid_is_zero_and_scales():
    assert border_thickness_mm(Mask(np.ones((4, 4, 4), dtype=bool))) == 0.0
    assert border_thickness_mm(hollow(7, 3, (2.0, 2.0, 2.0))) == 2.0


def test_lesion_volume():
    assert lesion_volume_mm3(mask_of([(0, 0, 0), (1, 0, 0)], spacing=(0.5, 0.5, 2.0))) == 1.0


@pytest.mark.parametrize("diameter", [10, 17, 25, 40])
def test_digitized_sphere_estimates(diameter):
    m = sphere_mask(diameter)
    assert abs(diameter_feret_mm(m) - diameter) <= 2.0
    assert abs(diameter_equiv_sphere_mm(m) - diameter) <= 0.05 * diameter


@given(voxel_sets, spacings)
def test_feret_and_bbox_against_pairs(vox, sp):
    m = mask_of(vox, spacing=sp)
    pts = points_mm(vox, sp)
    feret = diameter_feret_mm(m)
    assert feret == pytest.approx(max_pairwise(pts), rel=1e-9, abs=1e-12)
    assert diameter_bbox_mm(m) <= feret + 1e-12


@given(voxel_sets, voxel_sets, spacings)
def test_hausdorff_axioms_and_oracle(va, vb, sp):
    a, b = mask_of(va, spacing=sp), mask_of(vb, spacing=sp)
    h = hausdorff_mm(a, b)
    assert h == hausdorff_mm(b, a)
    assert hausdorff_mm(a, a) == 0.0
    assert h == pytest.approx(hausdorff(points_mm(va, sp), points_mm(vb, sp)), rel=1e-9, abs=1e-12)


@given(voxel_sets, st.sampled_from([0.5, 2.0, 3.0]))
def test_metric_scaling(vox, c):
    base = mask_of(vox)
    scaled = mask_of(vox, spacing=(c, c, c))
    assert diameter_feret_mm(scaled) == pytest.approx(c * diameter_feret_mm(base), rel=1e-12)
    assert diameter_bbox_mm(scaled) == pytest.approx(c * diameter_bbox_mm(base), rel=1e-12)
    assert diameter_equiv_sphere_mm(scaled) == pytest.approx(c * diameter_equiv_sphere_mm(base), rel=1e-12)
    assert border_thickness_mm(scaled) == pytest.approx(c * border_thickness_mm(base), rel=1e-12, abs=1e-12)
