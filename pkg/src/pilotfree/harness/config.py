"""
Simulation configuration.

Configs are TOML files with one table per concern::

    [grid]       n_rb, n_symbols
    [channel]    n_t, n_r, delay_spread [s], speed [m/s] or speed_kmh,
                 carrier [Hz], scs [Hz], n_taps
    [link]       layers, mode ("multilayer" | "interference"),
                 power_norm ("paper" | "unit-total"), alpha, snr_db
    [pattern]    kind ("time" | "frequency"), n_per_rb, n_bsg,
                 phase_ref ("pilot" | "genie"), eps ("auto" | float)
    [pilots]     symbols, stride
    [receivers]  enabled (subset of "cca", "pilot", "pchan")
    [sweep]      axis ("snr_db" | "sir_db" | "n_bsg" | "pattern"), points
    [run]        seeds, frames_per_seed, master_seed, workers,
                 frame_period [s], timing
    [output]     path

``snr_db = inf`` means noiseless. The SNR is per receive antenna: noise
variance ``10**(-snr_db/10)`` against unit-power symbols and unit average
channel gain. In ``mode = "interference"`` layer 0 is decoded and layers
1.. are an unknown interferer without pilots or repetition.
"""

import dataclasses
import hashlib
import json
import math
import re
from dataclasses import dataclass, field

from ..errors import ConfigurationError
from ..grid import GridDims, PatternKind, partition_subgrids

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = ["SimConfig", "SweepPoint", "load_config", "parse_config", "SWEEP_AXES", "RECEIVERS"]

SWEEP_AXES = ("snr_db", "sir_db", "n_bsg", "pattern")
RECEIVERS = ("cca", "pilot", "pchan")
KMH = 1 / 3.6


@dataclass(frozen=True)
class SimConfig:
    n_rb: int = 12
    n_symbols: int = 14
    n_t: int = 8
    n_r: int = 2
    delay_spread: float = 30e-9
    speed: float = 0.0
    carrier: float = 4e9
    scs: float = 30e3
    n_taps: int = 8
    layers: int = 1
    mode: str = "multilayer"
    power_norm: str = "paper"
    alpha: tuple = None
    snr_db: float = 15.0
    kind: str = "time"
    n_per_rb: int = 8
    n_bsg: int = 2
    phase_ref: str = "pilot"
    eps: object = "auto"
    pilot_symbols: tuple = (2, 11)
    pilot_stride: int = 2
    receivers: tuple = RECEIVERS
    sweep_axis: str = "snr_db"
    sweep_points: tuple = (15.0,)
    seeds: int = 20
    frames_per_seed: int = 10
    master_seed: int = 1
    workers: int = 1
    frame_period: float = 10e-3
    timing: bool = False
    output: str = "results.csv"
    source: str = field(default="<defaults>", compare=False)

    def dims(self):
        return GridDims(self.n_rb, self.n_symbols, self.layers)

    @property
    def decoded_layers(self):
        return tuple(range(self.layers)) if self.mode == "multilayer" else (0,)

    def points(self):
        return [SweepPoint.make(self, i, p) for i, p in enumerate(self.sweep_points)]

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def config_hash(self):
        """SHA-256 over every field that can change results."""
        skip = {"workers", "output", "source", "timing"}
        d = {k: v for k, v in dataclasses.asdict(self).items() if k not in skip}
        blob = json.dumps(d, sort_keys=True, default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()

    def validate(self):
        """Collect every violation and raise them together."""
        errs = []
        try:
            GridDims(self.n_rb, self.n_symbols, self.layers)
        except ConfigurationError as exc:
            errs.append(str(exc))
        if self.mode not in ("multilayer", "interference"):
            errs.append(f"link.mode must be 'multilayer' or 'interference', got {self.mode!r}")
        if self.mode == "interference" and self.layers < 2:
            errs.append("link.mode = 'interference' needs layers >= 2")
        if self.layers > min(self.n_t, self.n_r):
            errs.append(f"link.layers={self.layers} exceeds min(n_t, n_r)")
        if self.power_norm not in ("paper", "unit-total"):
            errs.append(f"link.power_norm must be 'paper' or 'unit-total', got {self.power_norm!r}")
        if self.alpha is not None and len(self.alpha) != self.layers:
            errs.append(f"link.alpha has {len(self.alpha)} entries for {self.layers} layers")
        if self.phase_ref not in ("pilot", "genie"):
            errs.append(f"pattern.phase_ref must be 'pilot' or 'genie', got {self.phase_ref!r}")
        bad_rx = [r for r in self.receivers if r not in RECEIVERS]
        if bad_rx or not self.receivers:
            errs.append(f"receivers.enabled must be a nonempty subset of {RECEIVERS}, got {self.receivers}")
        if self.sweep_axis not in SWEEP_AXES:
            errs.append(f"sweep.axis must be one of {SWEEP_AXES}, got {self.sweep_axis!r}")
        elif not self.sweep_points:
            errs.append("sweep.points is empty")
        if self.sweep_axis == "sir_db" and self.mode != "interference":
            errs.append("an sir_db sweep needs link.mode = 'interference'")
        for name in ("seeds", "frames_per_seed", "workers", "n_taps", "n_per_rb", "pilot_stride"):
            if getattr(self, name) < 1:
                errs.append(f"{name} must be >= 1")
        for name in ("delay_spread", "speed"):
            if getattr(self, name) < 0:
                errs.append(f"channel.{name} must be nonnegative")
        for name in ("carrier", "scs"):
            if getattr(self, name) <= 0:
                errs.append(f"channel.{name} must be positive")
        if not errs:
            from ..grid import make_layer_patterns
            from ..rx_baseline import PilotConfig
            for pt in self.points():
                try:
                    layout = partition_subgrids(self.dims(), pt.n_bsg)
                    dims = self.dims()
                    make_layer_patterns(
                        GridDims(dims.n_rb, dims.n_symbols, len(self.decoded_layers)),
                        layout, pt.kind, self.n_per_rb,
                    )
                except ValueError as exc:
                    errs.append(f"sweep point {pt.label}: {exc}")
            if {"pilot", "pchan"} & set(self.receivers):
                try:
                    PilotConfig(self.pilot_symbols, self.pilot_stride).validate(
                        self.dims(), len(self.decoded_layers))
                except ConfigurationError as exc:
                    errs.append(str(exc))
        if errs:
            raise ConfigurationError(f"{self.source}: " + "; ".join(errs))
        return self


@dataclass(frozen=True)
class SweepPoint:
    """Resolved settings of one sweep point."""

    index: int
    value: object
    snr_db: float
    noise_var: float
    alpha: tuple
    n_bsg: int
    kind: PatternKind

    @property
    def label(self):
        return format_point(self.value)

    @classmethod
    def make(cls, cfg, index, value):
        from ..txchain import default_alpha

        snr_db, n_bsg, kind = cfg.snr_db, cfg.n_bsg, cfg.kind
        alpha = tuple(cfg.alpha) if cfg.alpha is not None else tuple(
            float(a) for a in default_alpha(cfg.layers, cfg.power_norm))
        noise_scale = 1.0
        if cfg.sweep_axis == "snr_db":
            snr_db = float(value)
        elif cfg.sweep_axis == "n_bsg":
            n_bsg = int(value)
        elif cfg.sweep_axis == "pattern":
            kind = value
        elif cfg.sweep_axis == "sir_db":
            a1 = sir_to_alpha(float(value))
            rest = (1.0 - a1) / (cfg.layers - 1)
            alpha = (a1,) + (rest,) * (cfg.layers - 1)
            noise_scale = a1
        noise_var = 0.0 if math.isinf(snr_db) and snr_db > 0 else noise_scale * 10 ** (-snr_db / 10)
        return cls(index, value, float(snr_db), float(noise_var), alpha, int(n_bsg), PatternKind(kind))


def sir_to_alpha(sir_db):
    """``alpha_1`` such that ``alpha_1 / (1 - alpha_1)`` equals the SIR."""
    sir = 10 ** (sir_db / 10)
    return sir / (1 + sir)


def format_point(value):
    if isinstance(value, str):
        return value
    if isinstance(value, PatternKind):
        return value.value
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.6g}"


_SECTIONS = {
    "grid": {"n_rb": "n_rb", "n_symbols": "n_symbols"},
    "channel": {
        "n_t": "n_t", "n_r": "n_r", "delay_spread": "delay_spread", "speed": "speed",
        "speed_kmh": None, "carrier": "carrier", "scs": "scs", "n_taps": "n_taps",
    },
    "link": {
        "layers": "layers", "mode": "mode", "power_norm": "power_norm",
        "alpha": "alpha", "snr_db": "snr_db",
    },
    "pattern": {
        "kind": "kind", "n_per_rb": "n_per_rb", "n_bsg": "n_bsg",
        "phase_ref": "phase_ref", "eps": "eps",
    },
    "pilots": {"symbols": "pilot_symbols", "stride": "pilot_stride"},
    "receivers": {"enabled": "receivers"},
    "sweep": {"axis": "sweep_axis", "points": "sweep_points"},
    "run": {
        "seeds": "seeds", "frames_per_seed": "frames_per_seed", "master_seed": "master_seed",
        "workers": "workers", "frame_period": "frame_period", "timing": "timing",
    },
    "output": {"path": "output"},
}

_INT_FIELDS = {"n_rb", "n_symbols", "n_t", "n_r", "n_taps", "layers", "n_per_rb", "n_bsg",
               "pilot_stride", "seeds", "frames_per_seed", "master_seed", "workers"}
_FLOAT_FIELDS = {"delay_spread", "speed", "carrier", "scs", "snr_db", "frame_period"}
_STR_FIELDS = {"mode", "power_norm", "kind", "phase_ref", "sweep_axis", "output"}
_TUPLE_FIELDS = {"alpha", "pilot_symbols", "receivers", "sweep_points"}


def _line_of(text, section, key=None):
    """1-based line of ``[section]`` (or ``key`` inside it), or None."""
    in_sec = False
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"^\[\s*([^\]]+?)\s*\]", s)
        if m:
            in_sec = m.group(1) == section
            if in_sec and key is None:
                return no
            continue
        if in_sec and key is not None and re.match(rf"^{re.escape(key)}\s*=", s):
            return no
    return None


def _coerce(name, value):
    if name in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError("expected an integer")
        return value
    if name in _FLOAT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeError("expected a number")
        return float(value)
    if name in _STR_FIELDS:
        if not isinstance(value, str):
            raise TypeError("expected a string")
        return value
    if name in _TUPLE_FIELDS:
        if not isinstance(value, list):
            raise TypeError("expected an array")
        return tuple(value)
    if name == "timing":
        if not isinstance(value, bool):
            raise TypeError("expected true/false")
        return value
    if name == "eps":
        if value == "auto":
            return value
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value < 0:
            raise TypeError("expected \"auto\" or a nonnegative number")
        return float(value)
    return value


def parse_config(text, source="<string>"):
    """Build and validate a :class:`SimConfig` from TOML text.

    Errors carry ``source:line:`` prefixes when the offending key can be
    located.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        where = f"{source}:{m.group(1)}" if m else source
        raise ConfigurationError(f"{where}: malformed config: {exc}") from None
    kw = {}
    errs = []
    for section, body in doc.items():
        if section not in _SECTIONS or not isinstance(body, dict):
            errs.append(f"{source}:{_line_of(text, section) or '?'}: unknown section [{section}]")
            continue
        for key, value in body.items():
            line = _line_of(text, section, key) or "?"
            if key not in _SECTIONS[section]:
                errs.append(f"{source}:{line}: unknown key {section}.{key}")
                continue
            if key == "speed_kmh":
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    errs.append(f"{source}:{line}: {section}.{key}: expected a number")
                else:
                    kw["speed"] = float(value) * KMH
                continue
            name = _SECTIONS[section][key]
            try:
                kw[name] = _coerce(name, value)
            except TypeError as exc:
                errs.append(f"{source}:{line}: {section}.{key}: {exc}")
    if "sweep_points" in kw and kw.get("sweep_axis", "snr_db") == "n_bsg":
        kw["sweep_points"] = tuple(int(p) for p in kw["sweep_points"])
    if "sweep_points" in kw and kw.get("sweep_axis", "snr_db") in ("snr_db", "sir_db"):
        pts = kw["sweep_points"]
        if any(isinstance(p, bool) or not isinstance(p, (int, float)) for p in pts):
            errs.append(f"{source}:{_line_of(text, 'sweep', 'points') or '?'}: sweep.points must be numbers")
        else:
            kw["sweep_points"] = tuple(float(p) for p in pts)
    if errs:
        raise ConfigurationError("\n".join(errs))
    return SimConfig(source=source, **kw).validate()


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"{path}: cannot read config: {exc}") from None
    return parse_config(text, source=str(path))
