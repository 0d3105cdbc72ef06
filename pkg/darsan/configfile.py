"""
Run configuration files.

A config file is INI-style text with flat ``key = value`` lines under the
sections ``[simulation]``, ``[incentives]``, ``[agents]`` and
``[experiment]``. Every key is optional; omitted keys keep their defaults.
Unknown sections and keys are rejected. ``dump_config`` writes every
resolved value back, and loading that text reproduces the same
``RunConfig``.
"""

import configparser
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .agents import SELFISH_STRATEGIES, NoiseParams, Strategy
from .config import config as settings
from .core import IncentiveParams
from .exceptions import ArgumentError, ConfigError
from .experiments import DEFAULT_FRACTION_GRID, DEFAULT_QEA_GRID, slope_weights
from .logger import get_logger
from .sim import SimConfig
from .validators import format_slope, parse_slope

logger = get_logger(__name__)


class RunConfig(BaseModel):
    """Everything a CLI command needs: the simulation plus experiment settings"""

    model_config = ConfigDict(frozen=True)

    simulation: SimConfig = Field(default_factory=SimConfig)
    slope: float = -1.0
    repetitions: Optional[int] = Field(default=None, ge=1)
    qea_grid: Tuple[float, ...] = DEFAULT_QEA_GRID
    honest_fractions: Tuple[float, ...] = DEFAULT_FRACTION_GRID
    selfish_strategies: Tuple[Strategy, ...] = SELFISH_STRATEGIES
    workers: int = Field(default=0, ge=0)


def _parse_bool(text: str) -> bool:
    token = text.strip().lower()
    if token in ("1", "true", "yes", "on"):
        return True
    if token in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_floats(text: str) -> Tuple[float, ...]:
    return tuple(float(part) for part in text.split(",") if part.strip())


def _parse_strategies(text: str) -> Tuple[Strategy, ...]:
    return tuple(Strategy(part.strip()) for part in text.split(",") if part.strip())


def _parse_mix(text: str) -> Dict[Strategy, float]:
    mix: Dict[Strategy, float] = {}
    for part in text.split(","):
        if not part.strip():
            continue
        name, _, fraction = part.partition(":")
        mix[Strategy(name.strip())] = float(fraction)
    return mix


def _format_float(value: float) -> str:
    return repr(float(value))


def _format_floats(values: Tuple[float, ...]) -> str:
    return ", ".join(_format_float(v) for v in values)


# section -> key -> (parser, formatter)
SCHEMA: Dict[str, Dict[str, Tuple[Callable[[str], Any], Callable[[Any], str]]]] = {
    "simulation": {
        "n_reviewers": (int, str),
        "n_rounds": (int, str),
        "k_experts": (int, str),
        "initial_expertise": (float, _format_float),
        "trait_mean": (float, _format_float),
        "trait_std": (float, _format_float),
        "min_initial_qea": (float, _format_float),
        "sale_noise_sigma": (float, _format_float),
        "arrivals_enabled": (_parse_bool, lambda v: "true" if v else "false"),
        "arrival_count": (int, str),
        "arrival_interval": (int, str),
        "seed": (int, str),
        "entry_fee": (float, _format_float),
        "sale_price": (float, _format_float),
        "max_admission_attempts": (int, str),
        "area": (str.strip, str),
    },
    "incentives": {
        "slope": (parse_slope, format_slope),
        "alpha": (float, _format_float),
        "beta": (float, _format_float),
        "c1": (float, _format_float),
        "c2": (float, _format_float),
        "pool_scale": (float, _format_float),
        "thresh": (float, _format_float),
        "burn_fraction": (float, _format_float),
        "broad_dividends": (_parse_bool, lambda v: "true" if v else "false"),
        "token_payout_fraction": (float, _format_float),
        "revenue_fraction": (float, _format_float),
        "gainer_token_share": (float, _format_float),
    },
    "agents": {
        "w_max": (float, _format_float),
        "w_min": (float, _format_float),
        "strategy_mix": (
            _parse_mix,
            lambda mix: ", ".join(f"{s.value}:{_format_float(f)}" for s, f in mix.items()),
        ),
        "non_expert_strategy": (lambda t: Strategy(t.strip()), lambda s: s.value),
    },
    "experiment": {
        "repetitions": (int, str),
        "qea_grid": (_parse_floats, _format_floats),
        "honest_fractions": (_parse_floats, _format_floats),
        "selfish_strategies": (
            _parse_strategies,
            lambda strategies: ", ".join(s.value for s in strategies),
        ),
        "workers": (int, str),
    },
}


def build_run_config(
    values: Dict[str, Dict[str, Any]], defaults: Optional[Dict[str, Any]] = None
) -> RunConfig:
    """
    Assemble a RunConfig from parsed per-section values.

    Args:
        values: Section -> key -> parsed value
        defaults: ``[simulation]`` values used where ``values`` has none

    Raises:
        ConfigError: If any value fails validation
    """
    simulation = {**(defaults or {}), **values.get("simulation", {})}
    incentives = dict(values.get("incentives", {}))
    agents = dict(values.get("agents", {}))
    experiment = dict(values.get("experiment", {}))
    slope = incentives.pop("slope", -1.0)
    try:
        w_endorse, w_predict = slope_weights(slope)
        params = IncentiveParams(
            **incentives,
            k=simulation.get("k_experts", SimConfig.model_fields["k_experts"].default),
            w_endorse=w_endorse,
            w_predict=w_predict,
        )
        noise = NoiseParams(
            **{k: agents.pop(k) for k in ("w_max", "w_min") if k in agents}
        )
        sim = SimConfig(**simulation, **agents, incentives=params, noise=noise)
        return RunConfig(simulation=sim, slope=slope, **experiment)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}")
    except ArgumentError as e:
        raise ConfigError(str(e))


def parse_config(
    text: str, source: str = "<string>", defaults: Optional[Dict[str, Any]] = None
) -> RunConfig:
    """Parse config file text; ``source`` names the file in error messages"""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"Malformed config {source}: {e}")
    values: Dict[str, Dict[str, Any]] = {}
    for section in parser.sections():
        if section not in settings.CONFIG_SECTIONS:
            raise ConfigError(f"Unknown section [{section}] in {source}")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"Unknown key '{key}' in [{section}] of {source}")
            parse, _ = SCHEMA[section][key]
            try:
                values.setdefault(section, {})[key] = parse(raw)
            except (ValueError, ArgumentError) as e:
                raise ConfigError(f"Invalid value for {section}.{key} in {source}: {raw!r} ({e})")
    return build_run_config(values, defaults)


def load_config(
    path: Union[str, Path], defaults: Optional[Dict[str, Any]] = None
) -> RunConfig:
    """
    Read a config file; ``defaults`` fills ``[simulation]`` keys the file omits.

    Raises:
        ConfigError: If the file is missing, malformed or invalid
    """
    target = Path(path)
    if not target.is_file():
        raise ConfigError(f"Config file not found: {target}")
    run_config = parse_config(
        target.read_text(encoding="utf-8"), source=str(target), defaults=defaults
    )
    logger.info(f"Loaded config {target}")
    return run_config


def config_values(run_config: RunConfig) -> Dict[str, Dict[str, Any]]:
    """Every resolved value, keyed like the file sections"""
    sim = run_config.simulation
    params = sim.incentives
    values: Dict[str, Dict[str, Any]] = {
        "simulation": {key: getattr(sim, key) for key in SCHEMA["simulation"]},
        "incentives": {"slope": run_config.slope},
        "agents": {
            "w_max": sim.noise.w_max,
            "w_min": sim.noise.w_min,
            "strategy_mix": sim.strategy_mix,
            "non_expert_strategy": sim.non_expert_strategy,
        },
        "experiment": {
            "qea_grid": run_config.qea_grid,
            "honest_fractions": run_config.honest_fractions,
            "selfish_strategies": run_config.selfish_strategies,
            "workers": run_config.workers,
        },
    }
    for key in SCHEMA["incentives"]:
        if key != "slope":
            values["incentives"][key] = getattr(params, key)
    if run_config.repetitions is not None:
        values["experiment"]["repetitions"] = run_config.repetitions
    return values


def dump_config(run_config: RunConfig) -> str:
    """Config file text that loads back to ``run_config``"""
    lines: List[str] = []
    for section, entries in config_values(run_config).items():
        lines.append(f"[{section}]")
        for key in SCHEMA[section]:
            if key in entries:
                _, fmt = SCHEMA[section][key]
                lines.append(f"{key} = {fmt(entries[key])}")
        lines.append("")
    return "\n".join(lines)


def apply_overrides(
    run_config: RunConfig,
    seed: Optional[int] = None,
    slope: Optional[Union[float, str]] = None,
    rounds: Optional[int] = None,
    repetitions: Optional[int] = None,
) -> RunConfig:
    """Layer command-line flags over a loaded config"""
    values = config_values(run_config)
    if seed is not None:
        values["simulation"]["seed"] = seed
    if rounds is not None:
        values["simulation"]["n_rounds"] = rounds
    if slope is not None:
        try:
            values["incentives"]["slope"] = parse_slope(slope)
        except ArgumentError as e:
            raise ConfigError(str(e))
    if repetitions is not None:
        values["experiment"]["repetitions"] = repetitions
    return build_run_config(values)
