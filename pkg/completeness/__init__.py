from .core import (
    CompletenessError,
    Dataset,
    LossFunction,
    ModelClass,
    Observation,
    PredictionRule,
    ProblemKind,
    MISCLASSIFICATION,
    SQUARED_ERROR,
    evaluate_loss,
    naive_rule,
)
from .evaluation import (
    CvResult,
    FoldPlan,
    completeness,
    cross_validate,
    decompose,
    make_folds,
    subsample_curve,
)
from .lookup import LookupSpec, spec_for, train_lookup
from .fitting import FitConfig, fit
from .recorder import Recorder, FileRecorder
from .filter import SubjectFilter
