from .fusion import ExternalDataset, UnifiedDataset, is_duplicate, load_external, merge_sources, tally
from .headers import FIELDS, HeaderMapping, clean_header, normalize_headers, rule_mapping
from .units import (
    UnitConversion,
    UnitRegistry,
    convert_units,
    default_registry,
    infer_dimension,
    load_registry,
    vet_proposal,
)
