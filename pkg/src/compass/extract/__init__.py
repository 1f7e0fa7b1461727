from .associate import AssociationContext, Candidate, associate_metadata, build_context
from .geo import find_coordinates, find_depths, format_dms, parse_coordinate, parse_depth
from .tables import (
    BDL_SKIPPED,
    NON_NUMERIC,
    SKIP_FLAGS,
    ExtractionPlan,
    ExtractionResult,
    SkippedCell,
    extract_table_records,
    fan_out,
    parse_value_cell,
)
