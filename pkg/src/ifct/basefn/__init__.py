"""Base functions invoked by plans: segmentation, measurement and labeling."""

from .geometry import (
    DiameterMethod,
    border_thickness_mm,
    boundary_mask,
    calc_mass_diameter_cm,
    diameter_bbox_mm,
    diameter_equiv_sphere_mm,
    diameter_feret_mm,
    diameter_mm,
    fill_cavities,
    hausdorff_mm,
    lesion_volume_mm3,
    mean_intensity_hu,
)
from .labeler import (
    EmbeddingProvider,
    HashEmbeddingProvider,
    PhantomEmbeddingProvider,
    RemoteEmbeddingProvider,
    SerializedProvider,
    classify_label,
    cosine_similarity,
    ensure_concurrent_safe,
    render_subject,
)
from .segmentation import (
    ORGAN_WINDOWS,
    LesionRecord,
    LesionSet,
    SegmentationParams,
    check_connected,
    organ_windows,
    segment_masses,
    segment_organ,
)

__all__ = [name for name in dir() if not name.startswith("_")]
