"""Runtime monitoring of spatial-temporal requirements over sensor networks.

Formulas combine signal-threshold atoms, Boolean connectives, bounded
until, and two spatial operators over a weighted location graph: value
aggregation (max/min/sum/avg of a variable across a distance band) and
satisfaction counting (how many nearby locations satisfy a subformula).
Both a Boolean verdict and a real-valued satisfaction margin are computed
for every requirement anchor, offline over complete traces or online as
records stream in.
"""

from .boolean import CostModel, Verdict, and_reordered, cost, monitor_b
from .engine import Counters
from .errors import (
    ConfigError,
    EmptySignalError,
    EvaluationError,
    FormulaError,
    GraphError,
    IncompleteTraceError,
    ParseError,
    SampleOutOfRangeError,
    SastlError,
    SignalError,
    StreamError,
    TemplateError,
    UnknownLocationError,
    UnknownVariableError,
    ValidationError,
)
from .formula import (
    Agg,
    Always,
    And,
    Atom,
    Count,
    Eventually,
    Everywhere,
    Formula,
    Interval,
    Not,
    Or,
    PsiNot,
    PsiOr,
    PsiProp,
    PsiTrue,
    Somewhere,
    SourceSpan,
    SpatialDomain,
    Until,
    Verum,
    desugar,
    formula_to_json,
    horizon,
    validate_formula,
)
from .online import OnlineMonitor
from .parallel import ParallelConfig, aggregate_parallel, counting_parallel
from .parser import format_formula, parse_sastl
from .quantitative import (
    counting_robustness_from_values,
    kth_largest,
    monitor_q,
    selection_rank,
)
from .reports import Report, report_line, robustness_report_line, verdict_report_line
from .requirements import (
    AnchorSpec,
    Requirement,
    RequirementSet,
    StreamPolicy,
    load_requirements,
    requirements_from_obj,
)
from .signal import (
    UNDEFINED,
    Labeling,
    Record,
    SampleGrid,
    SpatialGraph,
    SpatioTemporalSignal,
    normalize_frequency,
    read_signal_csv,
    write_signal_csv,
)
from .spatial import DistanceIndex, build_index, de_scan, eval_psi, load_or_build_index
from .templates import (
    Combo,
    IfThen,
    Prohibited,
    TemplateForm,
    TranslateConfig,
    template_from_json,
    translate_template,
)

__version__ = "0.1.0"
