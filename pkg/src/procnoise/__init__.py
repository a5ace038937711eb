"""Procedural noise attacks on image classifiers, and filter defenses."""

from .dataset import DatasetItem, LabeledDataset, load_cifar10_batch, load_image_dir, save_png
from .errors import (
    ClassifierError,
    FormatError,
    HandshakeError,
    ParameterError,
    ProcNoiseError,
    ProtocolError,
)
from .evaluate import (
    EvalRecord,
    EvalReport,
    evasion_rate,
    robust_accuracy,
    run_attack_eval,
    sweep,
)
from .filters import (
    BilateralFilterSpec,
    FilterSpec,
    GaussianFilterSpec,
    MedianFilterSpec,
    apply_filter,
    bilateral_filter,
    gaussian_blur,
    median_filter,
    run_defense_eval,
)
from .gateway import (
    ClassifierPool,
    EmbeddedClassifier,
    GatewayConfig,
    Prediction,
    Preprocessing,
    SubprocessClassifier,
    classify_batch,
    classify_with_embedded,
    open_embedded,
    open_subprocess,
    probe_purity,
)
from .images import ImageTensor
from .noise import (
    GaussianParams,
    NoiseField,
    NoiseParams,
    PerlinParams,
    SaltPepperParams,
    SimplexParams,
    WorleyFeatureSet,
    WorleyParams,
    make_field,
)
from .perturb import (
    Perturbation,
    PerturbationSpec,
    apply,
    field_to_perturbation,
    generate_perturbation,
    linf_norm,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ProcNoiseError",
    "ParameterError",
    "FormatError",
    "ClassifierError",
    "HandshakeError",
    "ProtocolError",
    "NoiseField",
    "NoiseParams",
    "SimplexParams",
    "WorleyParams",
    "PerlinParams",
    "GaussianParams",
    "SaltPepperParams",
    "WorleyFeatureSet",
    "make_field",
    "ImageTensor",
    "Perturbation",
    "PerturbationSpec",
    "field_to_perturbation",
    "generate_perturbation",
    "apply",
    "linf_norm",
    "DatasetItem",
    "LabeledDataset",
    "load_cifar10_batch",
    "load_image_dir",
    "save_png",
    "Prediction",
    "Preprocessing",
    "GatewayConfig",
    "SubprocessClassifier",
    "EmbeddedClassifier",
    "ClassifierPool",
    "open_subprocess",
    "open_embedded",
    "classify_batch",
    "classify_with_embedded",
    "probe_purity",
    "EvalRecord",
    "EvalReport",
    "evasion_rate",
    "robust_accuracy",
    "run_attack_eval",
    "sweep",
    "FilterSpec",
    "GaussianFilterSpec",
    "MedianFilterSpec",
    "BilateralFilterSpec",
    "gaussian_blur",
    "median_filter",
    "bilateral_filter",
    "apply_filter",
    "run_defense_eval",
]
