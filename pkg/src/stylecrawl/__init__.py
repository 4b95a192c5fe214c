"""Style-guided web application exploration toolkit.

Predicts which DOM elements are actionable from 68 structural/visual style
features, ranks candidates by style-signature novelty, and drives a crawler
(simulated or live-browser) that tracks code coverage per crawl action.
"""

from .classifier import (
    BoostedTreeModel,
    EvalReport,
    TrainConfig,
    evaluate,
    load_model,
    predict,
    predictor_importance,
    save_model,
    train,
)
from .coverage import CoverageLedger, IntervalSet, maximal_union
from .dataset import (
    Corpus,
    SplitCorpus,
    balance,
    load_corpus,
    mark_default_actionables,
    propagate_labels,
    save_corpus,
    split_by_site,
)
from .dom import (
    BINARY_PREDICTORS,
    CSS_FEATURES,
    FEATURE_NAMES,
    STRUCTURAL_FEATURES,
    BoundingBox,
    DomSnapshot,
    EventType,
    FeatureVector,
    LabeledElement,
    TreePosition,
    recompute_structural,
)
from .engine import (
    ActionRecord,
    CrawlBudget,
    CrawlResult,
    StateFlowGraph,
    Strategy,
    StrategyKind,
    abstract_state,
    choose_next_state,
    crawl,
    extract_candidates,
    load_graph,
    replay,
    save_graph,
    write_dot,
)
from .errors import (
    BackendError,
    ConfigError,
    DataError,
    StyleCrawlError,
)
from .features import (
    DEFAULT_COMPUTED_STYLE,
    REQUIRED_PROPERTIES,
    RawElementObservation,
    binary_predictor_defaults,
    extract_features,
)
from .ranking import (
    SIGNATURE_SCHEMA,
    ExaminationRegistry,
    StyleSignature,
    delta,
    load_registry,
    rank_actionables,
    record_examination,
    save_registry,
    signature_of,
)
from .simulator import (
    MockAppSpec,
    SimBackend,
    generate_equivalence_app,
    load_app,
    save_app,
)

__version__ = "0.1.0"
