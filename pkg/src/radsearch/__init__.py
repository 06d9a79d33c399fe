"""Optimal conjunctive rule search over categorical data, with rule-list learners."""

__version__ = "0.1.0"

from .adtree import ADTree, insert_from_rowtree, query_cube
from .cube import DataCube, build_dc, scan_cube, scan_rule
from .dataset import (
    ConstantOne,
    Dataset,
    Indicator,
    OneHot,
    StatVecSpec,
    Target,
    TargetSquared,
    eval_statvec,
    from_columns,
    load_csv,
    parse_schema,
    write_csv,
)
from .errors import (
    CacheMiss,
    ConfigError,
    ContractViolation,
    DataError,
    MemoryBudgetExceeded,
    RadSearchError,
    RankDeficiency,
)
from .learners import (
    AdditiveRuleModel,
    DecisionList,
    RegressionList,
    kfold_eval,
    learn_dlist,
    learn_radreg,
    learn_reglist,
    least_squares_fit,
)
from .rowtree import RowTree, build_rowtree, measure_lambda, tweak_rowtree
from .score import ScoreContext, ScoreFn, ScoreKind, required_spec
from .search import (
    SEARCHERS,
    Rule,
    RuleScore,
    SearchConfig,
    SearchResult,
    hill_climb,
    naive_search,
    nsn_search,
    radsearch,
    trace_radsearch,
)
