"""numina: identify-then-guide pipeline for count-accurate layouts.

The library consumes dumped diffusion-transformer attention tensors, detects
numeral/layout misalignment, refines an explicit countable layout to the
prompted object count, and emits an attention-guidance field for
count-correct regeneration.  See the CLI (``numina --help``) for the
file-based workflow.
"""

from ._backend import active_backend
from .config import RunConfig
from .guidance import (
    DecaySchedule,
    GuidanceField,
    apply_guidance,
    build_guidance,
    delta_schedule,
    mean_ref_score,
)
from .heads import (
    GrayscaleMap,
    HeadScore,
    discriminability_score,
    pca_grayscale,
    select_cross_head,
    select_self_head,
)
from .io import (
    AttentionBundle,
    BundleKind,
    CountRecord,
    ValidationReport,
    read_bundle,
    read_count_record,
    read_field,
    read_layout,
    validate_bundle,
    write_bundle,
    write_count_record,
    write_field,
    write_layout,
)
from .layout import (
    FocusMask,
    Layout,
    RegionSet,
    build_focus_mask,
    construct_layout,
    count_instances,
    overlap_score,
    segment_regions,
)
from .metrics import MetricReport, count_acc, evaluate_record, evaluate_records, temporal_consistency
from .pipeline import IdentifyResult, identify
from .prompt import CountEntry, CountSpec, bind_to_tokens, parse_count_spec
from .refine import (
    Edit,
    PlacementCost,
    RefinedLayout,
    Template,
    make_template,
    place_instance,
    placement_cost,
    refine_to_count,
    remove_smallest,
)
from .synth import InstanceSpec, SceneSpec, SynthScene, random_scene_spec, synth_scene

__version__ = "0.1.0"

__all__ = [
    "AttentionBundle",
    "BundleKind",
    "CountEntry",
    "CountRecord",
    "CountSpec",
    "DecaySchedule",
    "Edit",
    "FocusMask",
    "GrayscaleMap",
    "GuidanceField",
    "HeadScore",
    "IdentifyResult",
    "InstanceSpec",
    "Layout",
    "MetricReport",
    "PlacementCost",
    "RefinedLayout",
    "RegionSet",
    "RunConfig",
    "SceneSpec",
    "SynthScene",
    "Template",
    "ValidationReport",
    "active_backend",
    "apply_guidance",
    "bind_to_tokens",
    "build_focus_mask",
    "build_guidance",
    "construct_layout",
    "count_acc",
    "count_instances",
    "delta_schedule",
    "discriminability_score",
    "evaluate_record",
    "evaluate_records",
    "identify",
    "make_template",
    "mean_ref_score",
    "overlap_score",
    "parse_count_spec",
    "pca_grayscale",
    "place_instance",
    "placement_cost",
    "random_scene_spec",
    "read_bundle",
    "read_count_record",
    "read_field",
    "read_layout",
    "refine_to_count",
    "remove_smallest",
    "segment_regions",
    "select_cross_head",
    "select_self_head",
    "synth_scene",
    "temporal_consistency",
    "validate_bundle",
    "write_bundle",
    "write_count_record",
    "write_field",
    "write_layout",
]
