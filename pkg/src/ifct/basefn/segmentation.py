"""Threshold + connected-component stand-ins for the organ and mass segmenters."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy import ndimage

from ..attributes import AttributeMap
from ..volume import Mask, Volume, check_same_grid

CONNECTIVITY = 26
_STRUCTURE_26 = np.ones((3, 3, 3), dtype=bool)


@dataclass(frozen=True)
class SegmentationParams:
    hu_low: float
    hu_high: float
    min_component_voxels: int = 1

    def __post_init__(self):
        if not self.hu_low < self.hu_high:
            raise ValueError(f"hu_low must be < hu_high, got [{self.hu_low}, {self.hu_high}]")
        if int(self.min_component_voxels) < 1:
            raise ValueError("min_component_voxels must be >= 1")

    def as_dict(self) -> dict:
        return {"hu_low": self.hu_low, "hu_high": self.hu_high,
                "min_component_voxels": self.min_component_voxels}


@dataclass
class LesionRecord:
    lesion_id: int
    mask: Mask
    attributes: AttributeMap = field(default_factory=AttributeMap)

    @property
    def voxel_count(self) -> int:
        return self.mask.popcount


@dataclass
class LesionSet:
    lesions: list[LesionRecord]
    source_organ: str = ""

    def __len__(self) -> int:
        return len(self.lesions)

    def __iter__(self) -> Iterator[LesionRecord]:
        return iter(self.lesions)


def _components(selected: np.ndarray):
    """Label 26-connected components and return (labels, [(first_linear_index, label, size)]).

    Components are returned ordered by the x-fastest linear index of their first voxel,
    which is what lesion ids and tie-breaks key on.
    """
    labels, n = ndimage.label(selected, structure=_STRUCTURE_26)
    if n == 0:
        return labels, []
    flat = labels.ravel(order="F")
    nz = np.flatnonzero(flat)
    comp = flat[nz]
    first = np.full(n + 1, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(first, comp, nz)
    sizes = np.bincount(comp, minlength=n + 1)
    info = sorted((int(first[c]), c, int(sizes[c])) for c in range(1, n + 1))
    return labels, info


def segment_organ(vol: Volume, params: SegmentationParams) -> Mask:
    """Largest 26-connected component inside the HU window; ties go to the earliest component."""
    arr = vol.voxels
    selected = (arr >= params.hu_low) & (arr <= params.hu_high)
    labels, info = _components(selected)
    if not info:
        return Mask.empty_like(vol)
    # sorted by first index, so max() keeps the earliest among equal sizes
    best = max(info, key=lambda t: t[2])
    if best[2] < params.min_component_voxels:
        return Mask.empty_like(vol)
    return Mask(labels == best[1], vol.spacing_mm)


def segment_masses(vol: Volume, organ: Mask, params: SegmentationParams,
                   organ_name: str = "") -> LesionSet:
    """Every sufficiently large 26-connected in-window component inside the organ mask.

    Lesion ids number the surviving components by first voxel in x-fastest order
    (1-based); the set is ordered by descending voxel count then id.
    """
    check_same_grid(vol, organ)
    arr = vol.voxels
    selected = organ.voxels & (arr >= params.hu_low) & (arr <= params.hu_high)
    labels, info = _components(selected)
    lesions = []
    kept = [(comp, size) for _, comp, size in info if size >= params.min_component_voxels]
    for lesion_id, (comp, _) in enumerate(kept, start=1):
        lesions.append(LesionRecord(lesion_id, Mask(labels == comp, vol.spacing_mm)))
    lesions.sort(key=lambda r: (-r.voxel_count, r.lesion_id))
    return LesionSet(lesions, organ_name)


def check_connected(mask: Mask) -> bool:
    """True when the foreground is nonempty and forms a single 26-connected component."""
    if mask.is_empty():
        return False
    _, n = ndimage.label(mask.voxels, structure=_STRUCTURE_26)
    return n == 1


# HU windows standing in for per-organ segmentation models: "organ" selects the organ
# parenchyma together with anything inside it, "mass" selects candidate lesions.
ORGAN_WINDOWS: dict[str, dict[str, SegmentationParams]] = {
    "liver": {"organ": SegmentationParams(-100, 250, 1), "mass": SegmentationParams(-50, 40, 5)},
    "renal": {"organ": SegmentationParams(-100, 300, 1), "mass": SegmentationParams(-20, 60, 5)},
    "pancreas": {"organ": SegmentationParams(-100, 250, 1), "mass": SegmentationParams(-30, 50, 5)},
}
GENERIC_WINDOWS = {"organ": SegmentationParams(-100, 300, 1), "mass": SegmentationParams(-50, 40, 5)}


def organ_windows(organ: str) -> dict[str, SegmentationParams]:
    return ORGAN_WINDOWS.get(organ, GENERIC_WINDOWS)
