"""Contiguous cartograms from integral-image density equalization."""

from .engine import CartogramEngine, RunResult, StoppingCriteria, run, target_weights
from .errors import (
    CartomorphError,
    IngestionError,
    NumericError,
    RasterizationError,
    RegionCollapsedError,
)
from .geomodel import (
    MapModel,
    NormalizationTransform,
    Region,
    attach_statistics,
    densify,
    detect_adjacencies,
    normalize,
    parse_map,
    shoelace_area,
    to_geojson,
)
from .integral import IntegralImageSet, integral_images, straight_inims, tilted_inims
from .displacement import (
    AnchorSet,
    DisplacementField,
    advect,
    anchors,
    base_mapping,
    mapping_point,
    residual_field,
)
from .metrics import (
    QualityReport,
    cartographic_errors,
    full_report,
    relative_position_error,
    shape_distortion,
    topology_distortion,
)
from .raster import (
    DensityTexture,
    LabelTexture,
    build_density,
    default_bdv,
    rasterize_labels,
)
from .temporal import (
    AreaFractionPolicy,
    FrameSequence,
    TimeSeriesDataset,
    background_mass_schedule,
    interpolate_frames,
    run_cumulative,
    run_direct,
)

__version__ = "0.1.0"
