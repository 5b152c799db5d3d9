"""Event classification for single-channel bladder-pressure recordings.

The pipeline: load or synthesize annotated pressure traces, decompose them
with a 5-level Daubechies-2 wavelet transform, extract 55 statistical
features per 0.8 s segment, aggregate consecutive same-label segments into
events, and classify events with hierarchical (VOID/non-VOID then ABD/DO),
cascaded, or single-stage softmax networks.  Evaluation covers confusion
matrices, per-class sensitivity/specificity/balanced accuracy, F1-macro,
ROC/AUC, and permutation feature importance.
"""

from .dwt import (
    InterpolatedDecomposition,
    WaveletDecomposition,
    dwt5_db2,
    idwt5_db2,
    interpolate_full_length,
)
from .events import Event, SplitPlan, build_events, split_by_trace
from .features import (
    FEATURE_NAMES,
    FeatureMatrix,
    SegmentFeatures,
    balance_none,
    extract_all,
    extract_trace,
    segment,
    segment_features,
)
from .metrics import (
    EvaluationReport,
    PfiReport,
    evaluate,
    permutation_importance,
    roc_curve_points,
)
from .nn import (
    MlpClassifier,
    ReliefF,
    TrainConfig,
    ZScoreScaler,
    load_model,
    relieff_rank,
    save_model,
)
from .pipeline import (
    PredictionRecord,
    TwoStageEventClassifier,
    predict_cascaded,
    propose_events,
    train_single_stage,
    train_two_stage,
)
from .synth import SynthConfig, generate
from .trace_io import (
    Annotation,
    EventLabel,
    Trace,
    load_corpus,
    load_trace,
    resample_to_10hz,
    save_trace,
)

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "Event",
    "EventLabel",
    "EvaluationReport",
    "FEATURE_NAMES",
    "FeatureMatrix",
    "InterpolatedDecomposition",
    "MlpClassifier",
    "PfiReport",
    "PredictionRecord",
    "ReliefF",
    "SegmentFeatures",
    "SplitPlan",
    "SynthConfig",
    "Trace",
    "TrainConfig",
    "TwoStageEventClassifier",
    "WaveletDecomposition",
    "ZScoreScaler",
    "balance_none",
    "build_events",
    "dwt5_db2",
    "evaluate",
    "extract_all",
    "extract_trace",
    "generate",
    "idwt5_db2",
    "interpolate_full_length",
    "load_corpus",
    "load_model",
    "load_trace",
    "permutation_importance",
    "predict_cascaded",
    "propose_events",
    "relieff_rank",
    "resample_to_10hz",
    "roc_curve_points",
    "save_model",
    "save_trace",
    "segment",
    "segment_features",
    "split_by_trace",
    "train_single_stage",
    "train_two_stage",
]
