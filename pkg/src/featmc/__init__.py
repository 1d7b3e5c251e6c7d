"""featmc: family-based probabilistic model checking for product lines.

A product line's stochastic behaviour is captured in one featured Markov
chain whose transitions carry per-product probability profiles; PCTL and
expected-reward properties are then verified for every valid product by
three interchangeable engines (enumerative, parametric, bounded).
"""

from .features import (
    FeatureDiagram,
    Product,
    conjoin,
    evaluate_expr,
    parse_feature_expression,
)
from .profiles import (
    DenseProfile,
    GuardedProfile,
    Profile,
    add,
    complement,
    constant,
    eval_profile,
    exceeds,
    from_dense,
    indicator,
    mul,
    pointwise_max,
    sub,
    to_dense,
)
from .models import (
    FDTMC,
    FMDP,
    FTS,
    as_fdtmc,
    complete_deterministic,
    fdtmc_as_fmdp,
    fts_to_fmdp,
    is_complete,
    observer_product,
    path_probability,
    project,
    project_fmdp,
    sync_product,
    validate_fdtmc,
    validate_fmdp,
)
from .properties import parse_property, parse_tree, print_property, quantitative_mode
from .dsl import build_model, load_model, parse_model, parse_model_file, print_model_file
from .generators import gen_failure_recovery, gen_service_provider
from .engines.enumerative import check_family_enumerative
from .engines.parametric import check_family_parametric
from .engines.bounded import check_family_bounded
from .cli import bundled_model_path

__version__ = "0.1.0"

__all__ = [
    "FeatureDiagram",
    "Product",
    "conjoin",
    "evaluate_expr",
    "parse_feature_expression",
    "Profile",
    "GuardedProfile",
    "DenseProfile",
    "add",
    "sub",
    "mul",
    "complement",
    "constant",
    "indicator",
    "eval_profile",
    "exceeds",
    "pointwise_max",
    "to_dense",
    "from_dense",
    "FDTMC",
    "FMDP",
    "FTS",
    "as_fdtmc",
    "complete_deterministic",
    "fdtmc_as_fmdp",
    "fts_to_fmdp",
    "is_complete",
    "observer_product",
    "path_probability",
    "project",
    "project_fmdp",
    "sync_product",
    "validate_fdtmc",
    "validate_fmdp",
    "parse_property",
    "parse_tree",
    "print_property",
    "quantitative_mode",
    "build_model",
    "load_model",
    "parse_model",
    "parse_model_file",
    "print_model_file",
    "gen_failure_recovery",
    "gen_service_provider",
    "check_family_enumerative",
    "check_family_parametric",
    "check_family_bounded",
    "bundled_model_path",
]
