"""Experiment configuration files (TOML, or JSON as an alternative).

A config file describes one task, one adapter family, an optimizer and a
schedule. ``variants`` and ``seeds`` optionally sweep the adapter variant
and the seed; each combination becomes one :class:`ExperimentConfig`.

Example::

    name = "ablation"
    seeds = [0, 1, 2, 3, 4]
    epochs = 125
    batch = 16

    [task]
    target_kind = "permuted_scaled"

    [adapter]
    variants = ["lorma_naive", "lorma_plus"]
    r = 4
"""

import hashlib
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from .adapters import AdapterConfig
from .exceptions import ConfigurationError
from .rng import splitmix64
from .trainer import LrSchedule, OptimizerSpec, TaskSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigParseError(ConfigurationError):
    """Syntax error in a config file, with its position when known."""

    def __init__(self, message, path=None, line=None, column=None):
        where = str(path) if path else "<config>"
        if line is not None:
            where += f":{line}:{column}"
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line
        self.column = column


_TOP_KEYS = {"name", "seed", "seeds", "epochs", "batch", "output_dir",
             "task", "adapter", "optimizer", "schedule"}
_SECTION_KEYS = {
    "task": set(TaskSpec.__dataclass_fields__),
    "adapter": {"variant", "variants", "side", "r", "alpha"},
    "optimizer": set(OptimizerSpec.__dataclass_fields__),
    "schedule": {"kind", "warmup_ratio"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One fully specified training run."""

    task: TaskSpec = field(default_factory=TaskSpec)
    adapter: AdapterConfig = field(default_factory=AdapterConfig)
    optimizer: OptimizerSpec = field(default_factory=OptimizerSpec)
    schedule: LrSchedule = field(default_factory=LrSchedule)
    epochs: int = 125
    batch: int = 16
    seed: int = 0
    output_dir: str = "runs/experiment"
    name: str = "experiment"

    def __post_init__(self):
        for attr in ("epochs", "batch"):
            value = getattr(self, attr)
            if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
                raise ConfigurationError(f"{attr} must be a positive integer, got {value!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")

    @property
    def steps_per_epoch(self):
        return -(-self.task.n_train // self.batch)

    @property
    def total_steps(self):
        return self.epochs * self.steps_per_epoch

    def canonical(self):
        """Plain-dict form used for hashing; excludes where output goes."""
        return {
            "name": self.name,
            "seed": self.seed,
            "epochs": self.epochs,
            "batch": self.batch,
            "task": self.task.to_dict(),
            "adapter": self.adapter.to_dict(),
            "optimizer": self.optimizer.to_dict(),
            "schedule": {k: v for k, v in self.schedule.to_dict().items() if k != "total_steps"},
        }

    def run_hash(self):
        return canonical_hash(self.canonical())

    def derived_seeds(self):
        """Independent seeds for data generation, adapter init and data order."""
        state = self.seed
        out = []
        for _ in range(3):
            state, value = splitmix64(state)
            out.append(value)
        return tuple(out)


def canonical_hash(obj):
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ExperimentPlan:
    """Every run described by one config file."""

    name: str
    runs: tuple
    output_dir: str
    source: dict

    @property
    def variants(self):
        seen = []
        for run in self.runs:
            if run.adapter.variant not in seen:
                seen.append(run.adapter.variant)
        return seen

    @property
    def seeds(self):
        return sorted({run.seed for run in self.runs})

    def plan_hash(self):
        return canonical_hash([run.canonical() for run in self.runs])


def parse_text(text, fmt, path=None):
    if fmt == "json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigParseError(exc.msg, path, exc.lineno, exc.colno) from None
    else:
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            msg = str(exc).split(" (at line")[0]
            raise ConfigParseError(
                msg, path, getattr(exc, "lineno", None), getattr(exc, "colno", None)
            ) from None
    if not isinstance(data, dict):
        raise ConfigParseError("top level must be a table/object", path)
    return data


def _check_keys(data, allowed, where):
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigurationError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def build_plan(data, default_name="experiment"):
    """Validate a parsed config mapping and expand its sweeps."""
    _check_keys(data, _TOP_KEYS, "config")
    for section, keys in _SECTION_KEYS.items():
        sub = data.get(section, {})
        if not isinstance(sub, dict):
            raise ConfigurationError(f"[{section}] must be a table")
        _check_keys(sub, keys, f"[{section}]")

    name = str(data.get("name", default_name))
    task = TaskSpec(**data.get("task", {}))
    optimizer = OptimizerSpec(**data.get("optimizer", {}))
    schedule = LrSchedule(**data.get("schedule", {}))

    adapter = dict(data.get("adapter", {}))
    if "variant" in adapter and "variants" in adapter:
        raise ConfigurationError("give either adapter.variant or adapter.variants, not both")
    variants = adapter.pop("variants", None) or [adapter.pop("variant", "lorma_plus")]
    if isinstance(variants, str):
        variants = [variants]
    alpha = adapter.get("alpha")
    r = adapter.get("r", 4)

    if "seed" in data and "seeds" in data:
        raise ConfigurationError("give either seed or seeds, not both")
    seeds = data.get("seeds", [data.get("seed", 0)])
    if not isinstance(seeds, list) or not seeds:
        raise ConfigurationError("seeds must be a non-empty list")

    output_dir = str(data.get("output_dir", f"runs/{name}"))
    runs = []
    for variant in variants:
        for seed in seeds:
            base = ExperimentConfig(
                task=task,
                adapter=AdapterConfig(
                    variant=variant,
                    side=adapter.get("side", "pre"),
                    r=r,
                    alpha=float(r) if alpha is None else alpha,
                    seed=0,
                ),
                optimizer=optimizer,
                schedule=schedule,
                epochs=data.get("epochs", 125),
                batch=data.get("batch", 16),
                seed=seed,
                output_dir=output_dir,
                name=name,
            )
            _, init_seed, _ = base.derived_seeds()
            runs.append(replace(base, adapter=replace(base.adapter, seed=init_seed)))
    return ExperimentPlan(name=name, runs=tuple(runs), output_dir=output_dir, source=data)


def load_plan(path):
    """Read and validate a ``.toml`` or ``.json`` config file."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    fmt = "json" if path.suffix.lower() == ".json" else "toml"
    return build_plan(parse_text(text, fmt, path), default_name=path.stem)


BUNDLED_DIR = Path(__file__).parent / "configs"


def bundled_configs():
    return sorted(p.stem for p in BUNDLED_DIR.glob("*.toml"))


def resolve_config_path(ref):
    """Accept a file path or the name of a bundled config."""
    path = Path(ref)
    if path.exists():
        return path
    candidate = BUNDLED_DIR / f"{ref}.toml"
    if candidate.exists():
        return candidate
    return path
