"""
Experiment Configuration - pydantic schemas for JSON experiment configs

Unknown keys are rejected, defaults come from config/defaults.py, and every
validation failure is re-raised as InvalidConfigError naming the JSON path.
"""

import itertools
import json
import os
from enum import Enum
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from config import defaults
from errors import InvalidConfigError


class StrategyKind(str, Enum):
    """Querying strategies, addressable by these exact lowercase names"""
    RANDOM = "random"
    ENTROPY = "entropy"
    MARGIN = "margin"
    LEAST_CONF = "least_conf"
    VAR_RATIO = "var_ratio"
    ENTROPY_D = "entropy_d"
    MARGIN_D = "margin_d"
    LEAST_CONF_D = "least_conf_d"
    BALD = "bald"
    MEAN_STD = "mean_std"
    CEAL_ENTROPY = "ceal_entropy"
    KMEANS = "kmeans"
    KCENTER = "kcenter"
    BADGE = "badge"
    CLUSTER_MARGIN = "cluster_margin"
    DBAL = "dbal"
    EXPLOIT_EXPLORE = "exploit_explore"
    ADV_BIM = "adv_bim"
    LPL = "lpl"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ============================================================
# LEARNER
# ============================================================

class LearnerConfig(_Strict):
    """Feed-forward classifier hyperparameters"""
    layer_sizes: Optional[List[Annotated[int, Field(ge=1)]]] = None
    hidden_layers: List[Annotated[int, Field(ge=1)]] = Field(
        default_factory=lambda: list(defaults.HIDDEN_LAYERS))
    dropout_rate: float = Field(default=defaults.DROPOUT_RATE, ge=0.0, lt=1.0)
    epochs: int = Field(default=defaults.EPOCHS, ge=0)
    learning_rate: float = Field(default=defaults.LEARNING_RATE, gt=0.0)
    optimizer: Literal["sgd", "adam"] = defaults.OPTIMIZER
    batch_size_train: int = Field(default=defaults.TRAIN_BATCH_SIZE, ge=1)
    weight_init_seed: int = defaults.WEIGHT_INIT_SEED
    loss_head: bool = False
    activation: Literal["relu", "tanh"] = defaults.ACTIVATION
    momentum: float = Field(default=defaults.MOMENTUM, ge=0.0, lt=1.0)
    weight_decay: float = Field(default=defaults.WEIGHT_DECAY, ge=0.0)
    standardize: bool = defaults.STANDARDIZE
    loss_head_width: int = Field(default=defaults.LOSS_HEAD_WIDTH, ge=1)
    loss_head_lr: float = Field(default=defaults.LOSS_HEAD_LR, gt=0.0)
    loss_head_weight: float = Field(default=defaults.LOSS_HEAD_WEIGHT, ge=0.0)
    loss_margin: float = Field(default=defaults.LOSS_MARGIN, ge=0.0)
    loss_head_extra_epochs: int = Field(default=defaults.LOSS_HEAD_EXTRA_EPOCHS, ge=0)

    @model_validator(mode="after")
    def _check_layers(self):
        if self.layer_sizes is not None:
            if len(self.layer_sizes) < 2:
                raise ValueError("layer_sizes needs at least an input and an output width")
            if self.layer_sizes[-1] < 2:
                raise ValueError("output width k must be at least 2")
        return self

    def resolved(self, n_features: int, k: int) -> "LearnerConfig":
        """Copy with layer_sizes filled in as [input, hidden..., k]"""
        if self.layer_sizes is not None:
            if self.layer_sizes[0] != n_features or self.layer_sizes[-1] != k:
                raise InvalidConfigError(
                    f"layer_sizes {self.layer_sizes} do not match data "
                    f"(input {n_features}, classes {k})")
            return self
        return self.model_copy(update={"layer_sizes": [n_features, *self.hidden_layers, k]})


# ============================================================
# ACQUISITION
# ============================================================

class BimConfig(_Strict):
    """Basic iterative method step settings"""
    step: float = Field(default=defaults.BIM_STEP, gt=0.0)
    max_steps: int = Field(default=defaults.BIM_MAX_STEPS, ge=1)
    norm: Literal["linf", "l2"] = "linf"


class StrategyConfig(_Strict):
    """Which strategy to run and its knobs"""
    kind: StrategyKind
    mc_passes: int = Field(default=defaults.MC_PASSES, ge=1)
    ceal_delta: float = Field(default=defaults.CEAL_THRESHOLD, ge=0.0)
    prefilter_rho: float = Field(default=defaults.PREFILTER_FACTOR, ge=1.0)
    beta: float = Field(default=defaults.EXPLOIT_EXPLORE_BETA, ge=0.0)
    pca_dim: int = Field(default=defaults.PCA_DIM, ge=1)
    hac_clusters: Optional[int] = Field(default=None, ge=1)
    similarity: Literal["cosine"] = "cosine"
    bim: BimConfig = Field(default_factory=BimConfig)


# ============================================================
# DATASET SOURCES
# ============================================================

class _SourceBase(_Strict):
    name: Optional[str] = None
    test_fraction: float = Field(default=0.2, ge=0.0, lt=1.0)
    imbalance_ratios: Optional[List[Annotated[float, Field(gt=0.0, le=1.0)]]] = None
    subsample: Optional[int] = Field(default=None, ge=1)
    split_seed: Optional[int] = None


class GaussianSource(_SourceBase):
    kind: Literal["synthetic_gaussians"]
    n_per_class: int = Field(ge=1)
    means: List[List[float]]
    shared_std: float = Field(default=1.0, gt=0.0)


class XorSource(_SourceBase):
    kind: Literal["synthetic_xor"]
    n: int = Field(ge=1)
    noise: float = Field(default=0.1, ge=0.0)


class RingsSource(_SourceBase):
    kind: Literal["synthetic_rings"]
    n: int = Field(ge=1)
    radii: List[Annotated[float, Field(gt=0.0)]] = Field(default_factory=lambda: [1.0, 3.0])
    noise: float = Field(default=0.2, ge=0.0)


class IdxSource(_SourceBase):
    kind: Literal["idx"]
    train_images: str
    train_labels: str
    test_images: Optional[str] = None
    test_labels: Optional[str] = None


class CsvSource(_SourceBase):
    kind: Literal["csv"]
    path: str
    label_column: str
    group_column: Optional[str] = None
    test_path: Optional[str] = None


DatasetSource = Annotated[
    Union[GaussianSource, XorSource, RingsSource, IdxSource, CsvSource],
    Field(discriminator="kind"),
]


# ============================================================
# EXPERIMENT
# ============================================================

class Ablation(_Strict):
    """Grid of learner epochs and batch sizes expanded into separate configs"""
    epochs: Optional[List[Annotated[int, Field(ge=0)]]] = None
    b: Optional[List[Annotated[int, Field(ge=1)]]] = None


class ExperimentConfig(_Strict):
    """One experiment: dataset, learner, strategy, budget and protocol"""
    name: str = "experiment"
    dataset: DatasetSource
    learner: LearnerConfig = Field(default_factory=LearnerConfig)
    strategy: StrategyConfig
    m_init: int = Field(ge=1)
    b: int = Field(ge=1)
    budget: int = Field(ge=0)
    trials: int = Field(default=defaults.TRIALS, ge=1)
    base_seed: int = defaults.BASE_SEED
    output_dir: str = "results"
    include_round0: bool = defaults.INCLUDE_ROUND0
    full_baseline: bool = defaults.FULL_BASELINE
    mismatch_groups: Optional[List[int]] = None
    ablation: Optional[Ablation] = None

    def trial_seed(self, trial: int) -> int:
        return self.base_seed + trial


# ============================================================
# PARSING
# ============================================================

def _format_validation_error(exc: ValidationError) -> str:
    messages = []
    for err in exc.errors():
        loc = ".".join(str(part) for part in err["loc"])
        if err["type"] == "missing":
            key = err["loc"][-1] if err["loc"] else "?"
            messages.append(f"missing required key '{key}' at {loc}")
        elif err["type"] == "extra_forbidden":
            messages.append(f"unknown key at {loc}")
        else:
            messages.append(f"invalid value at {loc}: {err['msg']}")
    return "; ".join(messages)


def config_from_dict(data: Dict[str, Any]) -> ExperimentConfig:
    """Validate a decoded JSON document"""
    if not isinstance(data, dict):
        raise InvalidConfigError("config document must be a JSON object")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise InvalidConfigError(_format_validation_error(exc)) from None


def emit_config(config: ExperimentConfig) -> Dict[str, Any]:
    """Fully resolved config, every default included"""
    return config.model_dump(mode="json")


def _data_dir(config_path: Path) -> Path:
    env_dir = os.getenv("AL_ENGINE_DATA_DIR")
    return Path(env_dir) if env_dir else config_path.parent


def _resolve_paths(config: ExperimentConfig, base: Path) -> ExperimentConfig:
    source = config.dataset
    path_fields = [f for f in ("train_images", "train_labels", "test_images",
                               "test_labels", "path", "test_path") if hasattr(source, f)]
    updates = {}
    for name in path_fields:
        value = getattr(source, name)
        if value and not Path(value).is_absolute():
            updates[name] = str((base / value).resolve())
    if not updates:
        return config
    return config.model_copy(update={"dataset": source.model_copy(update=updates)})


def _load_json(path: Path) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise InvalidConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InvalidConfigError(f"{path} is not valid JSON: {exc}") from None


def parse_config(path: Union[str, Path]) -> ExperimentConfig:
    """Load and validate one experiment config file"""
    path = Path(path)
    config = config_from_dict(_load_json(path))
    return _resolve_paths(config, _data_dir(path))


def parse_suite(path: Union[str, Path]) -> List[ExperimentConfig]:
    """
    Load either a single config or a suite document ``{"configs": [...]}``

    Suite entries are paths (relative to the suite file) or inline configs.
    """
    path = Path(path)
    data = _load_json(path)
    if isinstance(data, dict) and set(data) == {"configs"}:
        entries = data["configs"]
        if not isinstance(entries, list):
            raise InvalidConfigError("suite 'configs' must be a list")
        configs = []
        for position, entry in enumerate(entries):
            if isinstance(entry, str):
                configs.append(parse_config(path.parent / entry))
            else:
                try:
                    config = config_from_dict(entry)
                except InvalidConfigError as exc:
                    raise InvalidConfigError(f"configs[{position}]: {exc}") from None
                configs.append(_resolve_paths(config, _data_dir(path)))
        return configs
    return [_resolve_paths(config_from_dict(data), _data_dir(path))]


def expand_ablation(config: ExperimentConfig) -> List[ExperimentConfig]:
    """One config per (epochs, b) grid cell; configs without ablation pass through"""
    if config.ablation is None:
        return [config]
    epochs_grid = config.ablation.epochs or [config.learner.epochs]
    b_grid = config.ablation.b or [config.b]
    expanded = []
    for epochs, b in itertools.product(epochs_grid, b_grid):
        learner = config.learner.model_copy(update={"epochs": epochs})
        expanded.append(config.model_copy(update={
            "name": f"{config.name}-e{epochs}-b{b}",
            "learner": learner,
            "b": b,
            "ablation": None,
        }))
    return expanded
