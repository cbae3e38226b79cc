"""Numerical theta-function machinery for secants of Kummer varieties."""

__version__ = "0.1.0"

from .theta_core import (  # noqa: E402
    DirectionalJet,
    SiegelMatrix,
    ThetaCharacteristic,
    TruncationPolicy,
    theta_eval,
    theta_jet,
    truncation_radius,
    validate_siegel,
)
from .kummer import (  # noqa: E402
    KummerPoint,
    SecantConfig,
    SecantReport,
    addition_formula_residual,
    center_config,
    degenerate_secant_test,
    honest_secant_test,
    kummer_map,
    second_order_basis,
)
from .epsilon_series import (  # noqa: E402
    PowerSeries,
    VectorFieldSeq,
    WeightedPartition,
    delta_apply,
    exp_series_oracle,
    partitions_weighted,
    series_add,
    series_mul,
    series_truncate,
)
from .hierarchy import (  # noqa: E402
    AlphaTable,
    HierarchyState,
    SampleGrid,
    p_series_eval,
    q_s_eval,
    rt_cross_check,
    run_hierarchy,
    solve_order,
)
from .geometry import (  # noqa: E402
    DivisorIntersection,
    SecantSearchResult,
    divisor_intersection_points,
    find_degenerate_secant,
    restriction_check,
    translated_configs,
)

__all__ = [
    "DirectionalJet",
    "SiegelMatrix",
    "ThetaCharacteristic",
    "TruncationPolicy",
    "theta_eval",
    "theta_jet",
    "truncation_radius",
    "validate_siegel",
    "KummerPoint",
    "SecantConfig",
    "SecantReport",
    "addition_formula_residual",
    "center_config",
    "degenerate_secant_test",
    "honest_secant_test",
    "kummer_map",
    "second_order_basis",
    "PowerSeries",
    "VectorFieldSeq",
    "WeightedPartition",
    "delta_apply",
    "exp_series_oracle",
    "partitions_weighted",
    "series_add",
    "series_mul",
    "series_truncate",
    "AlphaTable",
    "HierarchyState",
    "SampleGrid",
    "p_series_eval",
    "q_s_eval",
    "rt_cross_check",
    "run_hierarchy",
    "solve_order",
    "DivisorIntersection",
    "SecantSearchResult",
    "divisor_intersection_points",
    "find_degenerate_secant",
    "restriction_check",
    "translated_configs",
]
