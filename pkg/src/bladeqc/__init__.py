"""Human-in-the-loop QC for wind turbine blade inspection imagery.

External instance-segmentation output becomes reviewable "clues" (minimum
area rotated rectangles around predicted masks); analysts convert, modify
or dismiss them through a two-stage, A/B-tested review workflow; damage-
level recall/precision and production dashboards measure the result.
"""

from .clues import Clue, ClueStatus, PredictionInstance, clue_containment_check, generate_clues
from .exceptions import (
    BladeQCError,
    ConflictError,
    GeometryError,
    NotFoundError,
    TransitionError,
    ValidationError,
)
from .geometry import (
    AxisAlignedBox,
    BitMask,
    Point2,
    Polygon,
    RotatedRect,
    aabb,
    area,
    convex_hull,
    convex_intersection_area,
    iou,
    min_area_rect,
    rasterize,
)
from .journal import EventRecord, Journal
from .masks import (
    ComponentLabeling,
    RleMask,
    component_corner_points,
    connected_components,
    rle_decode,
    rle_encode,
    trace_contour,
)
from .metrics import (
    EvalImage,
    EvalPrediction,
    MatchResult,
    MetricsReport,
    best_subset_oracle,
    evaluate_dataset,
    match_image,
    threshold_sweep,
)
from .reports import (
    ArmComparison,
    ConversionRow,
    ProductivityReport,
    arm_comparison,
    conversion_table,
    export_report,
    productivity_report,
)
from .store import (
    Annotation,
    DatasetSplit,
    ImageRecord,
    InspectionJob,
    InspectionStore,
    Provenance,
    split_dataset,
    to_native,
    to_working,
)
from .workflow import (
    Action,
    Arm,
    ImageWorkflow,
    Stage,
    assign_arm,
    check_transition,
    qc_durations,
    transition_table,
)

__version__ = "0.1.0"
