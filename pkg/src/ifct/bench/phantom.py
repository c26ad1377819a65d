"""Synthetic phantom cases: organ ellipsoid, spherical lesions, patient record and oracle paths."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..attributes import AttributeMap, Quantity, convert
from ..basefn.segmentation import organ_windows
from ..errors import SpecError
from ..executor import (
    Aggregated, LesionOutcome, PatientRecord, aggregate_recommendations, assess_patient,
    execute_tree, patient_attributes,
)
from ..guideline import Compare, DecisionPath, GuidelineTree, InRange, iter_atoms
from ..volume import Volume

BACKGROUND_HU = -1000


@dataclass(frozen=True)
class OrganProfile:
    organ: str
    dims: tuple[int, int, int]
    spacing_mm: tuple[float, float, float]
    organ_hu: int
    semi_axes_mm: tuple[float, float, float]
    diameter_range_mm: tuple[float, float]
    # classify attribute -> label -> inclusive HU band; bands tile the mass window
    bands: dict
    phase: str = "venous"
    max_lesions: int = 3


PROFILES: dict[str, OrganProfile] = {
    "liver": OrganProfile(
        "liver", (64, 64, 48), (1.0, 1.0, 1.0), 100, (30.0, 30.0, 22.0), (4.0, 28.0),
        {"imaging_features": {"benign": (-50, -16), "flash-filling": (-15, 10), "suspicious": (11, 40)}},
    ),
    "renal": OrganProfile(
        "renal", (72, 72, 64), (1.0, 1.0, 1.0), 180, (34.0, 34.0, 30.0), (4.0, 48.0),
        {"texture": {"homogeneous": (-20, 32), "heterogeneous": (33, 60)}},
        phase="arterial",
    ),
    "pancreas": OrganProfile(
        "pancreas", (64, 64, 48), (1.0, 1.0, 1.0), 90, (30.0, 30.0, 22.0), (4.0, 34.0),
        {"cyst_features": {"simple": (-30, 5), "worrisome": (6, 50)}},
    ),
}


def profile_for(organ: str) -> OrganProfile:
    try:
        return PROFILES[organ]
    except KeyError:
        raise SpecError(f"no phantom profile for organ {organ!r}") from None


def phantom_bands() -> dict:
    """Band table for PhantomEmbeddingProvider covering every profile."""
    return {p.organ: p.bands for p in PROFILES.values()}


@dataclass(frozen=True)
class LesionSpec:
    center_mm: tuple[float, float, float]
    diameter_mm: float
    hu: int
    categories: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"center_mm": list(self.center_mm), "diameter_mm": self.diameter_mm,
                "hu": self.hu, "categories": dict(self.categories)}

    @classmethod
    def from_json(cls, obj: dict) -> "LesionSpec":
        return cls(tuple(float(c) for c in obj["center_mm"]), float(obj["diameter_mm"]),
                   int(obj["hu"]), dict(obj.get("categories", {})))


@dataclass(frozen=True)
class SyntheticSpec:
    seed: int
    organ: str
    dims: tuple[int, int, int]
    spacing_mm: tuple[float, float, float]
    organ_hu: int
    semi_axes_mm: tuple[float, float, float]
    lesions: tuple[LesionSpec, ...]
    patient: PatientRecord
    background_hu: int = BACKGROUND_HU

    @property
    def max_spacing(self) -> float:
        return max(self.spacing_mm)

    def to_json(self) -> dict:
        return {"seed": self.seed, "organ": self.organ, "dims": list(self.dims),
                "spacing_mm": list(self.spacing_mm), "organ_hu": self.organ_hu,
                "background_hu": self.background_hu, "semi_axes_mm": list(self.semi_axes_mm),
                "lesions": [l.to_json() for l in self.lesions], "patient": self.patient.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "SyntheticSpec":
        return cls(int(obj["seed"]), obj["organ"], tuple(int(d) for d in obj["dims"]),
                   tuple(float(s) for s in obj["spacing_mm"]), int(obj["organ_hu"]),
                   tuple(float(a) for a in obj["semi_axes_mm"]),
                   tuple(LesionSpec.from_json(l) for l in obj["lesions"]),
                   PatientRecord.from_json(obj["patient"]), int(obj.get("background_hu", BACKGROUND_HU)))


# --- nominal attributes ------------------------------------------------------

def _nominal_measure(function: str | None, lesion: LesionSpec) -> Quantity:
    if function == "calc_mass_diameter_cm":
        return Quantity(lesion.diameter_mm / 10.0, "cm")
    if function == "diameter_mm":
        return Quantity(lesion.diameter_mm, "mm")
    if function == "mean_intensity_hu":
        return Quantity(float(lesion.hu), "HU")
    raise SpecError(f"phantoms cannot state a nominal value for {function!r}")


def _error_bound(unit: str, spec: SyntheticSpec) -> float:
    """How far a measured value may sit from the nominal one, in ``unit``.

    A ball centred on a lattice point has caliper extent in (D - 2s, D], so a nominal
    diameter exactly 2s from a threshold still lands on the right side of it.
    """
    if unit in ("mm", "cm"):
        return convert(2.0 * spec.max_spacing, "mm", unit)
    return 0.0


def real_thresholds(tree: GuidelineTree, attr: str, unit: str) -> list[float]:
    """Every threshold the tree compares ``attr`` against, converted to ``unit``."""
    out = set()
    for node in tree.nodes.values():
        pred = getattr(node, "predicate", None)
        if pred is None:
            continue
        for atom in iter_atoms(pred):
            if getattr(atom, "attr", None) != attr or atom.unit is None:
                continue
            if isinstance(atom, InRange):
                out.update((convert(atom.lo, atom.unit, unit), convert(atom.hi, atom.unit, unit)))
            elif isinstance(atom, Compare) and not isinstance(atom.value, (bool, str)):
                out.add(convert(float(atom.value), atom.unit, unit))
    return sorted(out)


def lesion_attributes(tree: GuidelineTree, spec: SyntheticSpec, lesion: LesionSpec) -> AttributeMap:
    attrs = AttributeMap()
    for decl in tree.attributes:
        if decl.producer == "measure":
            attrs[decl.name] = _nominal_measure(decl.function, lesion)
        elif decl.producer == "classify":
            if decl.name not in lesion.categories:
                raise SpecError(f"lesion does not state category {decl.name!r}")
            attrs[decl.name] = lesion.categories[decl.name]
    return attrs


def check_margins(tree: GuidelineTree, spec: SyntheticSpec, attrs: AttributeMap) -> None:
    for name, value in attrs.items():
        if not isinstance(value, Quantity):
            continue
        err = _error_bound(value.unit, spec)
        for t in real_thresholds(tree, name, value.unit):
            gap = abs(value.value - t)
            if gap <= 1e-9 or gap < err - 1e-9:
                raise SpecError(f"{name}={value} lies within {err:g} {value.unit} of threshold {t:g}")


def case_attributes(tree: GuidelineTree, n_lesions: int) -> AttributeMap:
    attrs = AttributeMap()
    for decl in tree.attributes:
        if decl.producer == "segment":
            if decl.name != "lesion_count":
                raise SpecError(f"phantoms cannot state segmentation attribute {decl.name!r}")
            attrs[decl.name] = Quantity(float(n_lesions), "count")
    return attrs


def patient_facts(tree: GuidelineTree, patient: PatientRecord) -> AttributeMap:
    attrs = patient_attributes(patient)
    attrs.update(assess_patient(tree.risk_rules, patient))
    return attrs


# --- rasterization ---------------------------------------------------------

@lru_cache(maxsize=4096)
def _ball(radius_mm: float, spacing: tuple) -> tuple[np.ndarray, np.ndarray]:
    """Voxel offsets whose centres lie within ``radius_mm`` of the origin, and the outer shell of them.

    Every offset lies on an axis row between two shell offsets, so a convex region holds the
    whole ball whenever it holds the shell.
    """
    reach = [int(math.floor(radius_mm / s)) for s in spacing]
    grids = np.meshgrid(*[np.arange(-r, r + 1) for r in reach], indexing="ij")
    offs = np.stack([g.ravel() for g in grids], axis=1)
    d2 = ((offs * np.asarray(spacing)) ** 2).sum(axis=1)
    keep = d2 <= radius_mm ** 2 + 1e-9
    inner = max(radius_mm - max(spacing), 0.0)
    ball, shell = offs[keep], offs[keep & (d2 > inner ** 2)]
    ball.flags.writeable = False
    shell.flags.writeable = False
    return ball, shell


def _ball_offsets(radius_mm: float, spacing) -> np.ndarray:
    return _ball(float(radius_mm), tuple(float(s) for s in spacing))[0]


def _shell_offsets(radius_mm: float, spacing) -> np.ndarray:
    return _ball(float(radius_mm), tuple(float(s) for s in spacing))[1]


def _center_index(center_mm, spacing) -> np.ndarray:
    idx = np.array([c / s for c, s in zip(center_mm, spacing)])
    if not np.allclose(idx, np.round(idx), atol=1e-9):
        raise SpecError(f"lesion centre {tuple(center_mm)} is not on the voxel lattice")
    return np.round(idx).astype(int)


def _inside_organ(spec: SyntheticSpec, points_idx: np.ndarray, shrink_mm: float) -> bool:
    centre = (np.asarray(spec.dims) - 1) / 2.0
    sp = np.asarray(spec.spacing_mm)
    axes = np.asarray(spec.semi_axes_mm) - shrink_mm
    if np.any(axes <= 0):
        return False
    rel = (points_idx - centre) * sp / axes
    return bool(np.all((rel ** 2).sum(axis=1) <= 1.0))


def lesion_voxels(spec: SyntheticSpec, lesion: LesionSpec) -> np.ndarray:
    offs = _ball_offsets(lesion.diameter_mm / 2.0, spec.spacing_mm)
    return _center_index(lesion.center_mm, spec.spacing_mm) + offs


def first_linear_index(idx: np.ndarray, dims) -> int:
    nx, ny, _ = dims
    return int((idx[:, 0] + nx * (idx[:, 1] + ny * idx[:, 2])).min())


def check_spec(spec: SyntheticSpec, tree: GuidelineTree) -> None:
    """Raise SpecError unless the phantom is unambiguous for ``tree``."""
    windows = organ_windows(spec.organ)
    mass = windows["mass"]
    organ_w = windows["organ"]
    for hu, what in ((spec.background_hu, "background"), (spec.organ_hu, "organ")):
        if mass.hu_low <= hu <= mass.hu_high:
            raise SpecError(f"{what} HU {hu} falls inside the mass window")
    if not organ_w.hu_low <= spec.organ_hu <= organ_w.hu_high:
        raise SpecError(f"organ HU {spec.organ_hu} outside the organ window")
    if organ_w.hu_low <= spec.background_hu <= organ_w.hu_high:
        raise SpecError("background HU falls inside the organ window")
    profile = PROFILES.get(spec.organ)
    gap = 2.0 * spec.max_spacing
    for i, a in enumerate(spec.lesions):
        if not mass.hu_low <= a.hu <= mass.hu_high:
            raise SpecError(f"lesion HU {a.hu} outside the mass window")
        centre = _center_index(a.center_mm, spec.spacing_mm)
        n_vox = len(_ball_offsets(a.diameter_mm / 2.0, spec.spacing_mm))
        if n_vox < mass.min_component_voxels:
            raise SpecError(f"lesion of {a.diameter_mm} mm rasterizes to {n_vox} voxel(s)")
        if not _inside_organ(spec, centre + _shell_offsets(a.diameter_mm / 2.0, spec.spacing_mm), gap):
            raise SpecError(f"lesion {i} is not inside the organ")
        if profile is not None:
            for attr, bands in profile.bands.items():
                want = next(lbl for lbl, (lo, hi) in bands.items() if lo <= a.hu <= hi)
                if a.categories.get(attr, want) != want:
                    raise SpecError(f"lesion {i} states {attr}={a.categories[attr]!r} but HU {a.hu} reads {want!r}")
        for b in spec.lesions[i + 1:]:
            dist = math.dist(a.center_mm, b.center_mm)
            if dist <= (a.diameter_mm + b.diameter_mm) / 2.0 + gap:
                raise SpecError("lesions overlap or touch")
        check_margins(tree, spec, lesion_attributes(tree, spec, a))


def rasterize(spec: SyntheticSpec) -> Volume:
    sp = np.asarray(spec.spacing_mm)
    arr = np.full(spec.dims, spec.background_hu, dtype=np.int16)
    centre = (np.asarray(spec.dims) - 1) / 2.0
    grids = np.ogrid[tuple(slice(0, d) for d in spec.dims)]
    r2 = sum(((g - c) * s / a) ** 2 for g, c, s, a in zip(grids, centre, sp, spec.semi_axes_mm))
    arr[r2 <= 1.0] = spec.organ_hu
    for lesion in spec.lesions:
        vox = lesion_voxels(spec, lesion)
        arr[vox[:, 0], vox[:, 1], vox[:, 2]] = lesion.hu
    return Volume(arr, spec.spacing_mm)


# --- oracle -----------------------------------------------------------------

@dataclass
class Oracle:
    per_lesion: list[LesionOutcome]
    aggregated: Aggregated

    @property
    def path(self) -> DecisionPath:
        return self.aggregated.path

    def to_json(self) -> dict:
        return {"per_lesion": [o.to_json() for o in self.per_lesion], "aggregated": self.aggregated.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "Oracle":
        return cls([LesionOutcome.from_json(o) for o in obj["per_lesion"]], Aggregated.from_json(obj["aggregated"]))


def oracle_for(spec: SyntheticSpec, tree: GuidelineTree) -> Oracle:
    """Tree evaluation on the nominal attributes; lesion ids follow raster order."""
    order = sorted(range(len(spec.lesions)),
                   key=lambda i: first_linear_index(lesion_voxels(spec, spec.lesions[i]), spec.dims))
    shared = case_attributes(tree, len(spec.lesions)).merged(patient_facts(tree, spec.patient))
    outcomes = []
    for lesion_id, i in enumerate(order, start=1):
        attrs = lesion_attributes(tree, spec, spec.lesions[i])
        path = execute_tree(tree, attrs.merged(shared))
        leaf = tree.nodes[path.leaf_id]
        outcomes.append(LesionOutcome(lesion_id, attrs, path, leaf.recommendation, leaf.severity))
    return Oracle(outcomes, aggregate_recommendations(outcomes, tree))


# --- sampling ----------------------------------------------------------------

def _sample_patient(tree: GuidelineTree, profile: OrganProfile, rng, patient_id: str) -> PatientRecord:
    flags = {d.name: bool(rng.random() < 0.5) for d in tree.attributes
             if d.producer == "patient" and d.type == "boolean"}
    return PatientRecord(patient_id, int(rng.integers(18, 96)), str(rng.choice(["F", "M"])),
                         flags, profile.phase)


def _sample_lesion_values(profile: OrganProfile, rng) -> tuple[float, int, dict]:
    mass = organ_windows(profile.organ)["mass"]
    lo, hi = profile.diameter_range_mm
    d = round(float(rng.uniform(lo, hi)), 2)
    hu = int(rng.integers(int(mass.hu_low), int(mass.hu_high) + 1))
    cats = {attr: next(lbl for lbl, (a, b) in bands.items() if a <= hu <= b)
            for attr, bands in profile.bands.items()}
    return d, hu, cats


def _place(profile: OrganProfile, patient: PatientRecord, d: float, placed: list, rng, tries: int = 200):
    sp = profile.spacing_mm
    gap = 2.0 * max(sp)
    probe = SyntheticSpec(0, profile.organ, profile.dims, sp, profile.organ_hu, profile.semi_axes_mm, (), patient)
    offs = _shell_offsets(d / 2.0, sp)
    mid = (np.asarray(profile.dims) - 1) / 2.0
    # the sphere's axis extremes must stay inside the shrunken organ box
    reach = [math.floor((a - gap - d / 2.0) / s) for a, s in zip(profile.semi_axes_mm, sp)]
    if min(reach) < 0:
        return None
    for _ in range(tries):
        idx = np.array([int(np.floor(m)) + int(rng.integers(-r, r + 1)) for m, r in zip(mid, reach)])
        if not _inside_organ(probe, idx + offs, gap):
            continue
        centre = tuple(float(i * s) for i, s in zip(idx, sp))
        if all(math.dist(centre, o.center_mm) > (d + o.diameter_mm) / 2.0 + gap for o in placed):
            return centre
    return None


def sample_spec(tree: GuidelineTree, seed: int, profile: OrganProfile | None = None,
                target_leaf: str | None = None, case_id: str | None = None,
                max_tries: int = 5000) -> SyntheticSpec:
    """Draw a phantom whose aggregated oracle leaf is ``target_leaf`` (uniform over leaves if None).

    Extra lesions, when drawn, have strictly lower severity than the target.
    """
    profile = profile or profile_for(tree.organ)
    rng = np.random.default_rng(seed)
    leaves = sorted(leaf.id for leaf in tree.leaves())
    target = target_leaf or str(rng.choice(leaves))
    if target not in tree.nodes or target not in leaves:
        raise SpecError(f"{target!r} is not a leaf of the tree")
    pid = case_id or f"{tree.organ}-{seed}"
    target_sev = tree.nodes[target].severity

    def make(patient, lesions):
        return SyntheticSpec(seed, profile.organ, profile.dims, profile.spacing_mm, profile.organ_hu,
                             profile.semi_axes_mm, tuple(lesions), patient)

    for _ in range(max_tries):
        patient = _sample_patient(tree, profile, rng, pid)
        if target == tree.no_lesion_leaf:
            spec = make(patient, [])
            if oracle_for(spec, tree).aggregated.leaf_id == target:
                return spec
            continue
        d, hu, cats = _sample_lesion_values(profile, rng)
        centre = _place(profile, patient, d, [], rng)
        if centre is None:
            continue
        first = LesionSpec(centre, d, hu, cats)
        spec = make(patient, [first])
        try:
            check_spec(spec, tree)
        except SpecError:
            continue
        if oracle_for(spec, tree).aggregated.leaf_id != target:
            continue
        lesions = [first]
        n_extra = int(rng.integers(0, profile.max_lesions))
        for _ in range(50 * n_extra):
            if len(lesions) > n_extra:
                break
            d2, hu2, cats2 = _sample_lesion_values(profile, rng)
            c2 = _place(profile, patient, d2, lesions, rng, tries=50)
            if c2 is None:
                continue
            cand = make(patient, lesions + [LesionSpec(c2, d2, hu2, cats2)])
            try:
                check_spec(cand, tree)
            except SpecError:
                continue
            sevs = [o.severity for o in oracle_for(cand, tree).per_lesion]
            if max(sevs) == target_sev and sevs.count(target_sev) == 1:
                lesions.append(cand.lesions[-1])
        spec = make(patient, lesions)
        if oracle_for(spec, tree).aggregated.leaf_id == target:
            return spec
    raise SpecError(f"could not sample a phantom for leaf {target!r} in {max_tries} tries")


@dataclass
class GeneratedCase:
    case_id: str
    spec: SyntheticSpec
    volume: Volume
    patient: PatientRecord
    facts: "ReportFacts"
    oracle: Oracle


def gen_case(spec: SyntheticSpec, tree: GuidelineTree, case_id: str | None = None,
             with_hint: bool = False) -> GeneratedCase:
    from .report import render_facts

    check_spec(spec, tree)
    oracle = oracle_for(spec, tree)
    facts = render_facts(tree, spec, oracle, with_hint=with_hint)
    return GeneratedCase(case_id or spec.patient.patient_id, spec, rasterize(spec), spec.patient, facts, oracle)


def case_seeds(seed: int, n: int) -> list[int]:
    """Independent 63-bit per-case seeds derived from one suite seed."""
    ss = np.random.SeedSequence(seed)
    return [int(s.generate_state(2, np.uint32).view(np.uint64)[0] >> np.uint64(1)) for s in ss.spawn(n)]


def gen_suite(tree: GuidelineTree, n: int, seed: int, profile: OrganProfile | None = None):
    """Yield ``n`` generated cases; the target leaf cycles through every leaf before repeating."""
    leaves = sorted(leaf.id for leaf in tree.leaves())
    rng = np.random.default_rng(seed)
    order = list(rng.permutation(leaves))
    for i, s in enumerate(case_seeds(seed, n)):
        case_id = f"{tree.organ}-{i:04d}"
        spec = sample_spec(tree, s, profile, target_leaf=str(order[i % len(order)]), case_id=case_id)
        yield gen_case(spec, tree, case_id)
