"""Density-field-driven selection engine for 3D point cloud data.

Build a density field once per cloud, then select structures with
target- and context-aware techniques (pointer, filament brush, cluster
paint) or a purely geometric baseline sweep, score selections against
ground truth, and drive everything from the CLI or the local HTTP service.
"""

from .data import (ConfusionStats, DatasetParams, confusion_stats, gen_dataset,
                   load_cloud, load_density_grid, save_cloud_csv,
                   save_density_grid)
from .errors import (InvalidInputError, MetacastError, OutOfDomainError,
                     ParseError)
from .field import (DensityGrid, GridSpec, ParticleCloud,
                    adaptive_smoothing_lengths, epanechnikov, estimate_density,
                    global_smoothing_lengths, grid_spec_for_cloud,
                    prepare_cloud, sample_density, sample_gradient)
from .flow import (FlowResult, MaxLine, Maximum, ascend, ascend_batch,
                   build_maxline, dedupe_maxima)
from .surface import (ComponentGrid, TriangleMesh, classify_particles,
                      component_containing, extract_mesh, label_components,
                      mesh_to_obj)
from .techniques import (Selection, Stroke, adjust_threshold, baseline_brush,
                         combine, meta_brush, meta_paint, meta_point,
                         selection_from_dict, selection_to_dict)

__version__ = "0.1.0"

__all__ = [
    "ConfusionStats", "DatasetParams", "confusion_stats", "gen_dataset",
    "load_cloud", "load_density_grid", "save_cloud_csv", "save_density_grid",
    "InvalidInputError", "MetacastError", "OutOfDomainError", "ParseError",
    "DensityGrid", "GridSpec", "ParticleCloud", "adaptive_smoothing_lengths",
    "epanechnikov", "estimate_density", "global_smoothing_lengths",
    "grid_spec_for_cloud", "prepare_cloud", "sample_density", "sample_gradient",
    "FlowResult", "MaxLine", "Maximum", "ascend", "ascend_batch",
    "build_maxline", "dedupe_maxima",
    "ComponentGrid", "TriangleMesh", "classify_particles",
    "component_containing", "extract_mesh", "label_components", "mesh_to_obj",
    "Selection", "Stroke", "adjust_threshold", "baseline_brush", "combine",
    "meta_brush", "meta_paint", "meta_point", "selection_from_dict",
    "selection_to_dict",
    "__version__",
]
