"""JSON run configuration.

A config file is one JSON object::

    {
      "params": {"lambda2": 0, "detuning": 0, "nbar": 100},
      "initial": "bell_correlated",
      "grid": {"tau_start": 0, "tau_end": 100, "samples": 4001},
      "engine": "analytic",
      "truncation": {"tail_eps": 1e-12, "low_block_policy": "numeric-exact"},
      "outputs": ["concurrence", "eof", "sigma_z", "norm"]
    }

``initial`` is a preset name or four ``[re, im]`` pairs ``(a, b, c, d)``
for ``|ee>, |eg>, |ge>, |gg>``. ``grid`` may also be a
``"START:END:SAMPLES"`` string. Unknown keys are errors.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .esd import Engine, TimeGrid
from .model import PRESETS, AtomicAmplitudes, LowBlockPolicy, SystemParams, preset_state

__all__ = ["ConfigError", "Truncation", "RunConfig", "OUTPUTS", "load_config", "parse_config"]

OUTPUTS = ("concurrence", "eof", "sigma_z", "norm")


class ConfigError(ValueError):
    """Invalid configuration; ``where`` names the field or file position."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


@dataclass(frozen=True)
class Truncation:
    tail_eps: float = 1e-12
    low_block_policy: LowBlockPolicy = LowBlockPolicy.NUMERIC_EXACT


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    initial: str | tuple = "bell_correlated"
    grid: TimeGrid = field(default_factory=lambda: TimeGrid(0.0, 100.0, 4001))
    engine: Engine = Engine.ANALYTIC
    truncation: Truncation = field(default_factory=Truncation)
    outputs: tuple = OUTPUTS
    seed: int | None = None

    def atomic(self) -> AtomicAmplitudes:
        if isinstance(self.initial, str):
            return preset_state(self.initial)
        return AtomicAmplitudes(*self.initial)

    def with_overrides(self, **changes) -> "RunConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_dict(self) -> dict:
        p = self.params
        initial = self.initial if isinstance(self.initial, str) else \
            [[z.real, z.imag] for z in self.initial]
        return {
            "params": {"lambda2": p.lambda2, "detuning": p.detuning, "nbar": p.nbar,
                       "alpha_phase": p.alpha_phase, "lambda1": p.lambda1},
            "initial": initial,
            "grid": {"tau_start": self.grid.tau_start, "tau_end": self.grid.tau_end,
                     "samples": self.grid.samples},
            "engine": self.engine.value,
            "truncation": {"tail_eps": self.truncation.tail_eps,
                           "low_block_policy": self.truncation.low_block_policy.value},
            "outputs": list(self.outputs),
            "seed": self.seed,
        }


def _obj(value, where, allowed):
    if not isinstance(value, dict):
        raise ConfigError(where, "expected an object")
    extra = sorted(set(value) - set(allowed))
    if extra:
        raise ConfigError(f"{where}.{extra[0]}" if where else extra[0],
                          f"unknown field (allowed: {', '.join(allowed)})")
    return value


def _num(value, where, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(where, f"expected a number, got {json.dumps(value)}")
    if not math.isfinite(value):
        raise ConfigError(where, "must be finite")
    if integer:
        if int(value) != value:
            raise ConfigError(where, "expected an integer")
        return int(value)
    return float(value)


def _params(raw) -> SystemParams:
    keys = ("lambda2", "detuning", "nbar", "alpha_phase", "lambda1")
    raw = _obj(raw, "params", keys)
    vals = {k: _num(raw[k], f"params.{k}") for k in keys if k in raw}
    try:
        return SystemParams(**vals)
    except ValueError as exc:
        raise ConfigError("params", str(exc)) from None


def _initial(raw):
    if isinstance(raw, str):
        if raw not in PRESETS:
            raise ConfigError("initial", f"unknown preset {raw!r}; known: {', '.join(PRESETS)}")
        return raw
    if not isinstance(raw, list) or len(raw) != 4:
        raise ConfigError("initial", "expected a preset name or four [re, im] pairs")
    amps = []
    for k, pair in enumerate(raw):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(f"initial[{k}]", "expected [re, im]")
        amps.append(complex(_num(pair[0], f"initial[{k}][0]"), _num(pair[1], f"initial[{k}][1]")))
    norm = sum(abs(z) ** 2 for z in amps)
    if abs(norm - 1.0) > 1e-6:
        raise ConfigError("initial", f"amplitudes must be normalized, |.|^2 = {norm!r}")
    return tuple(AtomicAmplitudes.normalized(*amps).as_array().tolist())


def _grid(raw) -> TimeGrid:
    try:
        if isinstance(raw, str):
            return TimeGrid.parse(raw)
        raw = _obj(raw, "grid", ("tau_start", "tau_end", "samples"))
        missing = [k for k in ("tau_end", "samples") if k not in raw]
        if missing:
            raise ConfigError(f"grid.{missing[0]}", "required")
        return TimeGrid(_num(raw.get("tau_start", 0.0), "grid.tau_start"),
                        _num(raw["tau_end"], "grid.tau_end"),
                        _num(raw["samples"], "grid.samples", integer=True))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("grid", str(exc)) from None


def _choice(enum, raw, where):
    try:
        return enum(raw)
    except ValueError:
        raise ConfigError(where, f"expected one of {[e.value for e in enum]}, "
                                 f"got {json.dumps(raw)}") from None


def _truncation(raw) -> Truncation:
    raw = _obj(raw, "truncation", ("tail_eps", "low_block_policy"))
    eps = _num(raw.get("tail_eps", 1e-12), "truncation.tail_eps")
    if not 0 < eps <= 1e-6:
        raise ConfigError("truncation.tail_eps", "must lie in (0, 1e-6]")
    pol = _choice(LowBlockPolicy, raw.get("low_block_policy", "numeric-exact"),
                  "truncation.low_block_policy")
    return Truncation(eps, pol)


def _outputs(raw) -> tuple:
    if not isinstance(raw, list) or not raw:
        raise ConfigError("outputs", "expected a non-empty list")
    for k, name in enumerate(raw):
        if name not in OUTPUTS:
            raise ConfigError(f"outputs[{k}]", f"unknown observable {name!r}; "
                                               f"known: {', '.join(OUTPUTS)}")
    return tuple(n for n in OUTPUTS if n in raw)


def parse_config(doc) -> RunConfig:
    """Validate a decoded JSON document."""
    doc = _obj(doc, "", ("params", "initial", "grid", "engine", "truncation", "outputs", "seed"))
    if "params" not in doc:
        raise ConfigError("params", "required")
    seed = doc.get("seed")
    if seed is not None:
        seed = _num(seed, "seed", integer=True)
    return RunConfig(
        params=_params(doc["params"]),
        initial=_initial(doc.get("initial", "bell_correlated")),
        grid=_grid(doc.get("grid", {"tau_end": 100.0, "samples": 4001})),
        engine=_choice(Engine, doc.get("engine", "analytic"), "engine"),
        truncation=_truncation(doc.get("truncation", {})),
        outputs=_outputs(doc.get("outputs", list(OUTPUTS))),
        seed=seed,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(str(path), exc.strerror or str(exc)) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None
    return parse_config(doc)
