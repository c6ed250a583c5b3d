"""Experiment configuration and its INI-style file format.

Files are read with :mod:`configparser`. Keys live in fixed sections and an
unknown section or key is an error::

    [experiment]
    scheme = m_ues_r          ; ia2c | m_r | m_ues | m_ues_r
    layout_variant = training ; training | goal_shift | shelf_shift
    seed = 0
    total_env_steps = 500000  ; summed over the parallel environments

    [a2c]
    learning_rate = 0.0005    ; omitted -> per-scheme default
    entropy_coefficient = 0.05

    [output]
    metrics_path = runs/m_ues_r/metrics.csv
    checkpoint_path = runs/m_ues_r/final.npz
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass
from pathlib import Path

from ..agent_a2c import A2CConfig, Scheme, default_split
from ..comm_bus import MessageSplit
from ..env_warehouse import OBS_SIZE, EnvParams, Variant
from ..uem import UEMConfig

# (learning rate, entropy coefficient) per scheme
SCHEME_DEFAULTS = {
    Scheme.IA2C: (0.0005, 0.01),
    Scheme.M_R: (0.0005, 0.01),
    Scheme.M_UES: (0.001, 0.01),
    Scheme.M_UES_R: (0.0005, 0.05),
}

SECTIONS: dict[str, dict[str, str]] = {
    "experiment": {
        "scheme": "scheme",
        "layout_variant": "layout_variant",
        "seed": "seed",
        "total_env_steps": "total_env_steps",
        "batch_envs": "batch_envs",
        "n_steps": "n_steps",
        "n_agents": "n_agents",
        "episode_length": "episode_length",
        "obstacle_period": "obstacle_period",
    },
    "a2c": {
        "learning_rate": "learning_rate",
        "entropy_coefficient": "entropy_coefficient",
        "gamma": "gamma",
    },
    "messages": {
        "message_len": "message_len",
        "reward_len": "reward_len",
        "zero_ues": "zero_ues",
    },
    "uem": {"learning_rate": "uem_learning_rate"},
    "optimizer": {
        "adam_beta1": "adam_beta1",
        "adam_beta2": "adam_beta2",
        "adam_epsilon": "adam_epsilon",
        "soft_update_tau": "soft_update_tau",
    },
    "transfer": {"finetune_batches": "finetune_batches"},
    "output": {
        "metrics_path": "metrics_path",
        "checkpoint_path": "checkpoint_path",
        "checkpoint_interval": "checkpoint_interval",
        "metric_flush_interval": "metric_flush_interval",
        "log_wall_clock": "log_wall_clock",
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    scheme: Scheme = Scheme.M_UES_R
    layout_variant: Variant = Variant.TRAINING
    seed: int = 0
    total_env_steps: int = 500_000
    batch_envs: int = 10
    n_steps: int = 5
    n_agents: int = 2
    episode_length: int = 50
    obstacle_period: int = 1000
    learning_rate: float | None = None
    entropy_coefficient: float | None = None
    gamma: float = 0.99
    message_len: int = 10
    reward_len: int | None = None
    zero_ues: bool = False
    uem_learning_rate: float = 0.001
    adam_beta1: float = 0.9
    adam_beta2: float = 0.99
    adam_epsilon: float = 1e-5
    soft_update_tau: float = 0.01
    finetune_batches: int = 10
    metrics_path: str = ""
    checkpoint_path: str = ""
    checkpoint_interval: int = 0
    metric_flush_interval: int = 10_000
    log_wall_clock: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "layout_variant", Variant(self.layout_variant))
        if self.episode_length % self.n_steps:
            raise ValueError("episode_length must be a multiple of n_steps")
        if self.n_agents < 1 or self.batch_envs < 1:
            raise ValueError("n_agents and batch_envs must be positive")
        if self.total_env_steps < 0 or self.metric_flush_interval <= 0:
            raise ValueError("total_env_steps must be >= 0 and metric_flush_interval > 0")
        if self.finetune_batches < 0:
            raise ValueError("finetune_batches must be >= 0")
        if self.reward_len is not None and not 0 <= self.reward_len <= self.message_len:
            raise ValueError("reward_len must lie in [0, message_len]")
        # surfaces invalid optimizer / A2C values at construction time
        self.a2c()

    # -- derived settings

    @property
    def effective_learning_rate(self) -> float:
        return self.learning_rate if self.learning_rate is not None else SCHEME_DEFAULTS[self.scheme][0]

    @property
    def effective_entropy(self) -> float:
        if self.entropy_coefficient is not None:
            return self.entropy_coefficient
        return SCHEME_DEFAULTS[self.scheme][1]

    @property
    def split(self) -> MessageSplit:
        if not self.scheme.communicates:
            return MessageSplit(0, 0)
        if self.reward_len is None or not self.scheme.uses_reward_bits:
            return default_split(self.scheme, self.message_len)
        return MessageSplit(self.reward_len, self.message_len - self.reward_len)

    @property
    def n_bits(self) -> int:
        return self.split.reward_len if self.scheme.uses_reward_bits else 0

    @property
    def policy_input_size(self) -> int:
        return OBS_SIZE + self.n_agents * self.message_len

    def a2c(self) -> A2CConfig:
        return A2CConfig(
            learning_rate=self.effective_learning_rate,
            entropy_coefficient=self.effective_entropy,
            gamma=self.gamma,
            n_steps=self.n_steps,
            batch_envs=self.batch_envs,
            scheme=self.scheme,
            adam_beta1=self.adam_beta1,
            adam_beta2=self.adam_beta2,
            adam_epsilon=self.adam_epsilon,
            soft_update_tau=self.soft_update_tau,
        )

    def uem(self) -> UEMConfig:
        return UEMConfig(
            ues_len=self.split.ues_len,
            inbox_len=(self.n_agents - 1) * self.message_len,
            learning_rate=self.uem_learning_rate,
        )

    def env_params(self) -> EnvParams:
        return EnvParams(
            n_agents=self.n_agents, episode_length=self.episode_length, obstacle_period=self.obstacle_period
        )

    def architecture(self) -> dict:
        """Fields that fix every tensor shape; checkpoints must agree on these."""
        return {
            "scheme": self.scheme.value,
            "n_agents": self.n_agents,
            "message_len": self.message_len,
            "split": [self.split.reward_len, self.split.ues_len],
            "policy_input": self.policy_input_size,
        }

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["scheme"] = self.scheme.value
        out["layout_variant"] = self.layout_variant.value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def _coerce(field_type: str, raw: str):
    raw = raw.strip()
    if "bool" in field_type:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if "None" in field_type and raw.lower() in ("", "none", "default"):
        return None
    if "int" in field_type:
        return int(raw.replace("_", ""))
    if "float" in field_type:
        return float(raw)
    return raw


def load_config(path, **overrides) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    with open(Path(path)) as fh:
        parser.read_file(fh)
    types = {f.name: str(f.type) for f in dataclasses.fields(ExperimentConfig)}
    values: dict = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ValueError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in SECTIONS[section]:
                raise ValueError(f"unknown key {key!r} in [{section}]")
            name = SECTIONS[section][key]
            values[name] = _coerce(types[name], raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(values)
