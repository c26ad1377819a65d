"""Size, intensity and distance measurements over voxel masks.

All distances are Euclidean between voxel centres, with the centre of voxel
``(i, j, k)`` at ``(i*sx, j*sy, k*sz)`` millimetres.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError, cKDTree
from scipy.spatial.distance import pdist

from ..errors import EmptyMask
from ..volume import Mask, Volume, check_same_grid, voxel_volume_mm3

_STRUCTURE_6 = ndimage.generate_binary_structure(3, 1)
_CHUNK = 2048


class DiameterMethod(str, Enum):
    FERET = "feret"
    EQUIV_SPHERE = "equiv_sphere"
    BBOX = "bbox"


def _require_nonempty(mask: Mask, what: str = "mask") -> None:
    if mask.is_empty():
        raise EmptyMask(f"{what} is empty")


def _max_pairwise(points: np.ndarray) -> float:
    n = len(points)
    if n < 2:
        return 0.0
    if n <= _CHUNK:
        return float(pdist(points).max())
    best = 0.0
    for start in range(0, n, _CHUNK):
        block = points[start:start + _CHUNK]
        d2 = ((block[:, None, :] - points[None, :, :]) ** 2).sum(axis=-1)
        best = max(best, float(d2.max()))
    return math.sqrt(best)


def diameter_feret_mm(mask: Mask) -> float:
    """Largest distance between any two foreground voxel centres."""
    _require_nonempty(mask)
    # the farthest pair is a pair of convex hull vertices, and hull vertices are
    # always face-boundary voxels
    pts = boundary_mask(mask).points_mm()
    if len(pts) > 8:
        try:
            hull = ConvexHull(pts)
            pts = pts[hull.vertices]
        except QhullError:
            pass  # flat or collinear sets: fall back to all boundary points
    return _max_pairwise(pts)


def diameter_equiv_sphere_mm(mask: Mask) -> float:
    _require_nonempty(mask)
    volume = mask.popcount * voxel_volume_mm3(mask)
    return (6.0 * volume / math.pi) ** (1.0 / 3.0)


def diameter_bbox_mm(mask: Mask) -> float:
    """Largest axis-aligned extent between voxel centres."""
    _require_nonempty(mask)
    idx = np.argwhere(mask.voxels)
    extent = idx.max(axis=0) - idx.min(axis=0)
    return float(max(e * s for e, s in zip(extent, mask.spacing_mm)))


_ESTIMATORS = {
    DiameterMethod.FERET: diameter_feret_mm,
    DiameterMethod.EQUIV_SPHERE: diameter_equiv_sphere_mm,
    DiameterMethod.BBOX: diameter_bbox_mm,
}


def diameter_mm(mask: Mask, method: DiameterMethod | str = DiameterMethod.FERET) -> float:
    return _ESTIMATORS[DiameterMethod(method)](mask)


def calc_mass_diameter_cm(mask: Mask, method: DiameterMethod | str = DiameterMethod.FERET) -> float:
    return diameter_mm(mask, method) / 10.0


def mean_intensity_hu(vol: Volume, mask: Mask) -> float:
    check_same_grid(vol, mask)
    _require_nonempty(mask)
    values = vol.voxels[mask.voxels].astype(np.int64)
    return float(values.sum()) / values.size


def lesion_volume_mm3(mask: Mask) -> float:
    _require_nonempty(mask)
    return mask.popcount * voxel_volume_mm3(mask)


def _directed(src: np.ndarray, dst: np.ndarray) -> float:
    dist, _ = cKDTree(dst).query(src, k=1)
    return float(np.max(dist))


def hausdorff_mm(a: Mask, b: Mask) -> float:
    """Symmetric Hausdorff distance between the voxel-centre sets of two masks."""
    check_same_grid(a, b)
    _require_nonempty(a, "first mask")
    _require_nonempty(b, "second mask")
    pa, pb = a.points_mm(), b.points_mm()
    return max(_directed(pa, pb), _directed(pb, pa))


def boundary_mask(mask: Mask) -> Mask:
    """Foreground voxels with a background or out-of-grid face neighbour."""
    inner = ndimage.binary_erosion(mask.voxels, structure=_STRUCTURE_6, border_value=0)
    return Mask(mask.voxels & ~inner, mask.spacing_mm)


def fill_cavities(mask: Mask) -> Mask:
    """Close interior cavities: background not 6-connected to the grid border becomes foreground."""
    return Mask(ndimage.binary_fill_holes(mask.voxels, structure=_STRUCTURE_6), mask.spacing_mm)


def border_thickness_mm(shell: Mask) -> float:
    """Wall thickness as the Hausdorff distance between the shell's boundary and its filled boundary.

    For a solid mask both boundaries coincide and the result is 0. Distances are centre
    to centre, so a wall ``w`` voxels thick along an axis measures ``(w - 1) * spacing``.
    """
    _require_nonempty(shell, "shell")
    return hausdorff_mm(boundary_mask(shell), boundary_mask(fill_cavities(shell)))
