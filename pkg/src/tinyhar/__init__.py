"""In-sensor human-activity-recognition pipeline at desk scale.

Signal preprocessing, 78-dimensional statistical features, two
micro-footprint model families, compact binary packaging with a stack
budget auditor, a fixed-buffer streaming classifier, and an automated
incremental class-injection driver.
"""

from .dataset import (
    DatasetSplit,
    LabelTaxonomy,
    SynthSpec,
    build_unclassified,
    kfold_stratified,
    load_csv,
    save_csv,
    split_stratified,
    synth_dataset,
)
from .evaluation import ConfusionMatrix, evaluate
from .features import (
    FEATURE_NAMES,
    MANIFEST_VERSION,
    N_FEATURES,
    FeatureMask,
    apply_mask,
    extract_features,
    select_top_features,
)
from .gbdt import Forest, GbdtConfig, feature_importance, gbdt_predict, gbdt_train
from .inference import Engine, duty_cycle
from .injection import InjectionReport, MergePolicy, assess_overlap, inject_step, run_injection
from .mlp import MlpModel, TrainConfig, mlp_forward, mlp_init, mlp_train
from .modelpack import (
    AccountingModel,
    Budget,
    FootprintReport,
    audit,
    decode,
    encode,
    footprint,
)
from .signal_core import (
    CleansePolicy,
    Recording,
    Window,
    cleanse,
    decimate,
    detect_major_peaks,
    estimate_window_len,
    segment,
)

__version__ = "0.1.0"
