from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import orjson
import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from core.errors import ConfigError

EnvProfile = Literal["chemical-full-fork", "chemical-full-chain", "magnetic2d"]
Method = Literal["fcdl", "dense", "modular", "oracle-graph", "ncd"]
Scale = Literal["full", "mini"]


def load_env() -> None:
    """Load environment variables from a local .env file (if present)."""
    load_dotenv()


class RuntimeSettings(BaseSettings):
    """Process-level knobs read from the environment (FCDL_*), never part of the config hash."""

    model_config = SettingsConfigDict(env_prefix="FCDL_", env_file=".env", extra="ignore")

    log_level: str = "INFO"
    output_root: str = "runs"
    workers: int = 1
    show_tech_details: bool = False


def get_settings() -> RuntimeSettings:
    load_env()
    return RuntimeSettings()


# ---------------------------------------------------------------------------
# Experiment config
# ---------------------------------------------------------------------------

class _Group(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class EnvConfig(_Group):
    nodes: Optional[int] = Field(default=None, ge=2)  # None -> 10 (full) / 5 (mini)
    colors: Optional[int] = Field(default=None, ge=2)  # None -> 5 (full) / 3 (mini)
    context_color: int = Field(default=0, ge=0)
    episode_length: int = Field(default=25, ge=1)
    ood_sigma: float = Field(default=100.0, gt=0)
    table_retries: int = Field(default=1000, ge=1)


class ModelConfig(_Group):
    codebook_size: int = Field(default=16, ge=1)
    code_dim: int = Field(default=16, ge=1)
    feature_dim: int = Field(default=128, ge=1)
    hidden_dim: int = Field(default=128, ge=1)
    hidden_layers: int = Field(default=4, ge=1)
    encoder_hidden: List[int] = Field(default_factory=lambda: [128])
    decoder_hidden: int = Field(default=32, ge=1)
    temperature: float = Field(default=1.0, gt=0)
    ema_decay: float = Field(default=0.99, gt=0, lt=1)
    ema_eps: float = Field(default=1e-5, gt=0)
    predict_delta: bool = False
    # Freezes every graph logit at this value (structure learning off); used for baseline parity runs.
    graph_logit_override: Optional[float] = None
    dead_code_restart: Optional[bool] = None  # None -> on only when K <= 2
    restart_every: int = Field(default=1000, ge=1)
    restart_threshold: Optional[float] = Field(default=None, ge=0)  # None -> 1/(10K)

    def restart_enabled(self) -> bool:
        return self.codebook_size <= 2 if self.dead_code_restart is None else self.dead_code_restart

    def restart_fraction(self) -> float:
        if self.restart_threshold is not None:
            return self.restart_threshold
        return 1.0 / (10 * self.codebook_size)


class TrainingConfig(_Group):
    batch_size: int = Field(default=256, ge=1)
    lr: float = Field(default=1e-4, gt=0)
    sparsity: float = Field(default=1e-3, ge=0)  # λ
    commitment: float = Field(default=0.25, ge=0)  # β
    buffer_capacity: int = Field(default=200_000, ge=1)
    init_steps: Optional[int] = Field(default=None, ge=1)  # None -> 1000 Chemical / 2000 Magnetic2D
    total_steps: Optional[int] = Field(default=None, ge=1)  # None -> 1.5e5 Chemical / 2e5 Magnetic2D
    warmup_updates: int = Field(default=0, ge=0)  # gradient steps on the random data before planning
    updates_per_step: int = Field(default=1, ge=0)
    exploration_prob: float = Field(default=0.05, ge=0, le=1)
    exploration_noise: float = Field(default=1e-4, ge=0)
    checkpoint_every: int = Field(default=40, ge=1)  # in training episodes
    metrics_every: int = Field(default=0, ge=0)  # train record every n episodes; 0 disables


class PlannerConfig(_Group):
    horizon: Optional[int] = Field(default=None, ge=1)  # None -> 3 Chemical / 1 Magnetic2D
    candidates: int = Field(default=64, ge=1)
    elites: int = Field(default=32, ge=1)
    iterations: int = Field(default=5, ge=1)
    laplace: float = Field(default=0.1, ge=0)
    init_std: float = Field(default=0.05, gt=0)

    @model_validator(mode="after")
    def _elites_fit(self) -> "PlannerConfig":
        if self.elites > self.candidates:
            raise ValueError("elites must not exceed candidates")
        return self


class EvaluationConfig(_Group):
    every_episodes: int = Field(default=40, ge=1)
    test_episodes: int = Field(default=10, ge=1)
    accuracy_samples: int = Field(default=1000, ge=1)
    noisy_counts: List[int] = Field(default_factory=lambda: [0, 2, 4, 6])


class ExperimentConfig(_Group):
    env: EnvProfile
    scale: Scale = "full"
    method: Method = "fcdl"
    seeds: List[int] = Field(default_factory=lambda: [0])
    output_dir: str = "runs"
    env_options: EnvConfig = Field(default_factory=EnvConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    training: TrainingConfig = Field(default_factory=TrainingConfig)
    planner: PlannerConfig = Field(default_factory=PlannerConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)

    @property
    def is_chemical(self) -> bool:
        return self.env.startswith("chemical")

    @property
    def local_graph(self) -> str:
        return self.env.rsplit("-", 1)[-1] if self.is_chemical else "magnetic"

    def effective_codebook_size(self) -> int:
        """Only fcdl quantizes; every other method behaves as a single subgroup."""
        return self.model.codebook_size if self.method == "fcdl" else 1

    def init_steps(self) -> int:
        return self.training.init_steps or (1000 if self.is_chemical else 2000)

    def total_steps(self) -> int:
        return self.training.total_steps or (150_000 if self.is_chemical else 200_000)

    def horizon(self) -> int:
        return self.planner.horizon or (3 if self.is_chemical else 1)

    def chemical_size(self) -> tuple[int, int]:
        nodes = self.env_options.nodes or (10 if self.scale == "full" else 5)
        colors = self.env_options.colors or (5 if self.scale == "full" else 3)
        return nodes, colors

    def config_hash(self) -> str:
        """SHA-256 of the canonical dump, ignoring seeds and output location."""
        body = self.model_dump(mode="json", exclude={"seeds", "output_dir"})
        return hashlib.sha256(orjson.dumps(body, option=orjson.OPT_SORT_KEYS)).hexdigest()

    def with_updates(self, **changes: Any) -> "ExperimentConfig":
        """Validated copy with top-level or dotted (group.field) overrides."""
        data = self.model_dump(mode="python")
        for key, value in changes.items():
            group, _, field = key.partition(".")
            if field:
                data[group][field] = value
            else:
                data[key] = value
        return build_config(data)


def _offending_keys(err: ValidationError) -> List[str]:
    keys = []
    for item in err.errors():
        loc = ".".join(str(p) for p in item.get("loc", ()))
        keys.append(loc or "<root>")
    return sorted(set(keys))


def build_config(data: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as err:
        keys = _offending_keys(err)
        details = "; ".join(f"{'.'.join(map(str, e['loc']))}: {e['msg']}" for e in err.errors())
        raise ConfigError(f"invalid config keys [{', '.join(keys)}]: {details}", keys) from err


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except yaml.YAMLError as err:
        raise ConfigError(f"config {path} is not valid YAML: {err}") from err
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a key-value mapping")
    return build_config(data)


def profile_config(profile: str, scale: str = "mini", **overrides: Any) -> ExperimentConfig:
    """Defaults for a named environment profile."""
    return build_config({"env": profile, "scale": scale, **overrides})
