"""Template-matching edge classifier back-end.

The package turns continuous feature maps into per-class templates
(binary bits or per-feature matching windows), classifies queries by
feature-count or similarity-window scoring, emulates the analogue-CAM
hardware path that would run that comparison, and accounts for the
MAC/energy cost of the surrounding pipeline.
"""

from .fmap import (
    FeatureMapSet,
    FmapDType,
    FormatError,
    Template,
    TemplateBank,
    TemplateMode,
    ThresholdMethod,
    TruncationError,
    ValidationError,
    load_fmap,
    load_template_bank,
    save_fmap,
    save_template_bank,
    synth_bimodal_fixture,
    synth_fixture,
)
from .binarize import (
    FeatureBinarizer,
    ThresholdVector,
    affine_quantize8,
    binarize,
    column_thresholds,
)
from .cluster import ClusterResult, kmeans, silhouette
from .templates import AUTO_K, make_templates
from .matcher import (
    ClassDecision,
    MatchMethod,
    MatchParams,
    TemplateMatchingClassifier,
    classify,
    classify_batch,
    hit_ratio,
    score_distance,
    score_fc,
    score_sim,
)
from .acam import (
    AcamBackend,
    AcamConfig,
    VoltageBank,
    backend_energy,
    bank_to_voltages,
    cell_match,
    map_to_voltage,
    perturb_windows,
    row_evaluate,
    wta,
)
from .cost import (
    ConvLayerSpec,
    CostReport,
    EnergyConstants,
    conv_macs,
    effective_macs,
    energy_report,
    frontend_energy,
    network_macs,
    sparsity_schedule,
)
from .evaluate import ConfusionMatrix, confusion, metrics, run_eval, sweep_templates

__version__ = "0.1.0"

__all__ = [
    "AUTO_K",
    "AcamBackend",
    "AcamConfig",
    "ClassDecision",
    "ClusterResult",
    "ConfusionMatrix",
    "ConvLayerSpec",
    "CostReport",
    "EnergyConstants",
    "FeatureBinarizer",
    "FeatureMapSet",
    "FmapDType",
    "FormatError",
    "MatchMethod",
    "MatchParams",
    "Template",
    "TemplateBank",
    "TemplateMatchingClassifier",
    "TemplateMode",
    "ThresholdMethod",
    "ThresholdVector",
    "TruncationError",
    "ValidationError",
    "VoltageBank",
    "affine_quantize8",
    "backend_energy",
    "bank_to_voltages",
    "binarize",
    "cell_match",
    "classify",
    "classify_batch",
    "column_thresholds",
    "confusion",
    "conv_macs",
    "effective_macs",
    "energy_report",
    "frontend_energy",
    "hit_ratio",
    "kmeans",
    "load_fmap",
    "load_template_bank",
    "make_templates",
    "map_to_voltage",
    "metrics",
    "network_macs",
    "perturb_windows",
    "row_evaluate",
    "run_eval",
    "save_fmap",
    "save_template_bank",
    "score_distance",
    "score_fc",
    "score_sim",
    "silhouette",
    "sparsity_schedule",
    "sweep_templates",
    "synth_bimodal_fixture",
    "synth_fixture",
    "wta",
]
