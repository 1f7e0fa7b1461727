from .checks import (
    FATAL,
    FLAG,
    CheckOutcome,
    CheckSpec,
    CoordinateSanity,
    GeoBounds,
    Range,
    RequiredFields,
    UnitWhitelist,
    ValidationReport,
    parse_check,
    run_checks,
)
from .ocean import OceanMask, load_mask, parse_mask
from .rollback import (
    PipelineState,
    RollbackEvent,
    Step,
    StepLogEntry,
    execute_with_rollback,
    replay,
)
