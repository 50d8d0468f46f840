"""Scenario files: plain ``key = value`` lines, ``#`` comments.

Top-level keys configure the experiment; dotted keys address a section::

    episodes = 300
    seeds = 0,1,2,3,4
    world.n_adv = 2
    reward.w_p = 1000
    training.hidden = 64,64

Sections: ``world``, ``dynamics``, ``vanet``, ``reward``, ``training``,
``distribution``. Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..coddpg.agent import TrainingConfig
from ..errors import ConfigError
from ..paramdist import DistributionPolicy
from ..reward import RewardConfig
from ..sim import DynamicsConfig, WorldConfig
from ..vanet import VanetConfig


@dataclass
class ScenarioConfig:
    name: str = "default"
    episodes: int = 300
    seeds: tuple = (0, 1, 2, 3, 4)
    out_dir: str = "runs/default"
    distribution_enabled: bool = True
    budget_init: float = 1e9
    budget_replenish: float = 0.0
    ndv_k_trackpos: float = 0.5
    ndv_k_angle: float = 1.0
    ndv_k_speed: float = 0.1
    latency_warmup: int = 100
    topology_dump: bool = False
    world: WorldConfig = field(default_factory=WorldConfig)
    vanet: VanetConfig = field(default_factory=VanetConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    distribution: DistributionPolicy = field(default_factory=DistributionPolicy)

    def validate(self) -> "ScenarioConfig":
        if self.episodes < 0:
            raise ConfigError("episodes must be >= 0")
        if not self.seeds:
            raise ConfigError("at least one seed required")
        self.world.validate()
        self.vanet.validate()
        self.reward.validate()
        self.training.validate()
        self.distribution.validate()
        return self

    @property
    def T(self) -> int:
        return self.world.T


_SECTIONS = ("world", "dynamics", "vanet", "reward", "training", "distribution")


def _convert(raw: str, default, key: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            kind = type(default[0]) if default else int
            return tuple(kind(x) for x in raw.split(",") if x.strip())
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def _apply(obj, values: dict, section: str):
    """Return a copy of dataclass ``obj`` with string values converted and applied."""
    names = {f.name: f for f in dataclasses.fields(obj)}
    updates = {}
    for key, raw in values.items():
        f = names.get(key)
        if f is None or dataclasses.is_dataclass(getattr(obj, key)):
            raise ConfigError(f"unknown key {section + '.' if section else ''}{key}")
        updates[key] = _convert(raw, getattr(obj, key), f"{section}.{key}" if section else key)
    return dataclasses.replace(obj, **updates)


def parse_scenario(text: str, source: str = "<string>") -> ScenarioConfig:
    top: dict[str, str] = {}
    sections: dict[str, dict[str, str]] = {s: {} for s in _SECTIONS}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if "." in key:
            section, sub = key.split(".", 1)
            if section not in sections:
                raise ConfigError(f"{source}:{lineno}: unknown section {section!r}")
            target = sections[section]
            key = sub
        else:
            target = top
        if key in target:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        target[key] = value
    cfg = _apply(ScenarioConfig(), top, "")
    world = _apply(cfg.world, sections["world"], "world")
    world.dynamics = _apply(world.dynamics, sections["dynamics"], "dynamics")
    cfg = dataclasses.replace(
        cfg,
        world=world,
        vanet=_apply(cfg.vanet, sections["vanet"], "vanet"),
        reward=_apply(cfg.reward, sections["reward"], "reward"),
        training=_apply(cfg.training, sections["training"], "training"),
        distribution=_apply(cfg.distribution, sections["distribution"], "distribution"),
    )
    return cfg.validate()


def load_scenario(path_or_name) -> ScenarioConfig:
    """Load a scenario file, or one of the bundled scenarios by name."""
    path = Path(path_or_name)
    if path.exists():
        return parse_scenario(path.read_text(), str(path))
    bundled = resources.files("codrive.scenarios") / f"{path_or_name}.cfg"
    if bundled.is_file():
        return parse_scenario(bundled.read_text(), str(path_or_name))
    raise ConfigError(f"no scenario file or bundled scenario named {path_or_name!r}")


def bundled_scenarios() -> list[str]:
    return sorted(p.name[:-4] for p in resources.files("codrive.scenarios").iterdir() if p.name.endswith(".cfg"))


def dump_scenario(cfg: ScenarioConfig) -> str:
    """Render a config back into scenario-file syntax."""

    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, tuple):
            return ",".join(str(x) for x in v)
        return str(v)

    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if not dataclasses.is_dataclass(v):
            lines.append(f"{f.name} = {fmt(v)}")
    for section in _SECTIONS:
        obj = cfg.world.dynamics if section == "dynamics" else getattr(cfg, section)
        for f in dataclasses.fields(obj):
            v = getattr(obj, f.name)
            if not dataclasses.is_dataclass(v):
                lines.append(f"{section}.{f.name} = {fmt(v)}")
    return "\n".join(lines) + "\n"


def apply_overrides(cfg: ScenarioConfig, pairs) -> ScenarioConfig:
    """Re-parse ``cfg`` with ``key=value`` overrides (scenario-file keys)."""
    updates = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not key=value")
        key, value = (p.strip() for p in pair.split("=", 1))
        updates[key] = value
    lines = []
    for line in dump_scenario(cfg).splitlines():
        key = line.split("=", 1)[0].strip()
        lines.append(f"{key} = {updates.pop(key)}" if key in updates else line)
    lines += [f"{k} = {v}" for k, v in updates.items()]  # unknown keys fail in the parser
    return parse_scenario("\n".join(lines), "<overrides>")
