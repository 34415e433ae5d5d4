"""Config-driven Monte-Carlo sweeps and inspection tools.

Configs are TOML files written as flat dotted keys, e.g.::

    system.n_bs = 512
    system.f_c = 50e9
    scenario.r0_min = 13.0
    sweep.axis = "snr_db"
    sweep.values = [0, 5, 10, 15, 20]
    run.schemes = ["hierarchical", "dft-exhaustive", "perfect-csi"]
    run.trials = 200
    run.seed = 2023
    run.output = "fig6.csv"
"""

from __future__ import annotations

import dataclasses
import datetime as _dt
import io
import json
import math
import sys
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterator

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .analysis import (MetricRow, aggregate, ideal_coherence, kb_coherence_map, overhead_of,
                       success, sum_rate, write_metric_rows, write_pattern)
from .codebook import (angular_span, dft_codebook, distance_ring_codebook, elementary_codebook,
                       hierarchy_depth, layer_codewords, top_layer_count, write_codebook)
from .core import (KbPoint, Scenario, SystemConfig, fresnel_min_distance, generate_channel,
                   rayleigh_distance)
from .training import SCHEMES, NoiseSpec, perfect_csi, run_scheme

SWEEP_AXES = ("snr_db", "r0", "n_bs")
# data-phase SNR used for the rate when training itself is noiseless
LINK_SNR_DB = 10.0


class ConfigError(ValueError):
    """Invalid or unknown configuration key."""


_SCHEMA: dict[str, dict[str, type | tuple[type, ...]]] = {
    "system": {"n_bs": int, "f_c": (int, float), "d": (int, float),
               "r_min_override": (int, float), "c": (int, float)},
    "scenario": {"r0_min": (int, float), "r0_max": (int, float), "theta_min": (int, float),
                 "theta_max": (int, float), "rho_db": (int, float), "n_nlos": int},
    "noise": {"snr_db": (int, float), "reference": str, "noise_floor": (int, float)},
    "sweep": {"axis": str, "values": list},
    "run": {"schemes": list, "trials": int, "seed": int, "output": str, "n_rings": int,
            "mode": str},
}


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig
    scenario: Scenario = Scenario()
    noise: NoiseSpec = NoiseSpec(10.0)
    sweep_axis: str = "snr_db"
    sweep_values: tuple[float, ...] = (10.0,)
    schemes: tuple[str, ...] = SCHEMES
    trials: int = 100
    seed: int = 0
    output: str = "results.csv"
    n_rings: int = 16
    mode: str = "simulate"
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ConfigError("run.trials must be >= 1")
        if not self.sweep_values:
            raise ConfigError("sweep.values must be non-empty")
        if self.sweep_axis not in SWEEP_AXES:
            raise ConfigError(f"sweep.axis must be one of {SWEEP_AXES}, got {self.sweep_axis!r}")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad or not self.schemes:
            raise ConfigError(f"run.schemes: unknown {bad}; allowed {list(SCHEMES)}")
        if self.mode not in ("simulate", "overhead"):
            raise ConfigError(f"run.mode must be 'simulate' or 'overhead', got {self.mode!r}")
        if self.n_rings < 1:
            raise ConfigError("run.n_rings must be >= 1")


def _flatten(d: dict, prefix: str = "") -> dict[str, Any]:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def parse_config(text: str, seed: int | None = None) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from TOML text; unknown keys fail fast."""
    try:
        flat = _flatten(tomllib.loads(text))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    sections: dict[str, dict[str, Any]] = {s: {} for s in _SCHEMA}
    for key, value in flat.items():
        sec, _, name = key.partition(".")
        if sec not in _SCHEMA or name not in _SCHEMA[sec]:
            raise ConfigError(f"unknown config key {key!r}")
        expected = _SCHEMA[sec][name]
        if isinstance(value, bool) or not isinstance(value, expected):
            raise ConfigError(f"config key {key!r} has wrong type {type(value).__name__}")
        sections[sec][name] = value
    sy, sc, no, sw, ru = (sections[s] for s in ("system", "scenario", "noise", "sweep", "run"))
    try:
        if "n_bs" not in sy or "f_c" not in sy:
            raise ConfigError("system.n_bs and system.f_c are required")
        system = SystemConfig(**sy)
        scen_kw: dict[str, Any] = {}
        if "r0_min" in sc or "r0_max" in sc:
            scen_kw["r0_range"] = (float(sc.get("r0_min", 13.0)), float(sc.get("r0_max", 100.0)))
        if "theta_min" in sc or "theta_max" in sc:
            scen_kw["theta_range"] = (float(sc.get("theta_min", -1.0)),
                                      float(sc.get("theta_max", 1.0)))
        for name in ("rho_db", "n_nlos"):
            if name in sc:
                scen_kw[name] = sc[name]
        scenario = Scenario(**scen_kw)
        noise = NoiseSpec(float(no.get("snr_db", 10.0)), no.get("reference", "los"),
                          float(no.get("noise_floor", 1.0)))
        values = tuple(float(v) for v in sw.get("values", [noise.snr_db]))
        return ExperimentConfig(
            system=system, scenario=scenario, noise=noise,
            sweep_axis=sw.get("axis", "snr_db"), sweep_values=values,
            schemes=tuple(ru.get("schemes", SCHEMES)), trials=ru.get("trials", 100),
            seed=ru.get("seed", 0) if seed is None else seed,
            output=ru.get("output", "results.csv"), n_rings=ru.get("n_rings", 16),
            mode=ru.get("mode", "simulate"), raw=flat)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path, seed: int | None = None) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), seed)


def derived_constants(cfg: SystemConfig) -> dict[str, float | int]:
    return {
        "wavelength": cfg.wavelength,
        "aperture": cfg.aperture,
        "r_min": cfg.r_min,
        "fresnel_min_distance": fresnel_min_distance(cfg),
        "rayleigh_distance": rayleigh_distance(cfg),
        "k_max": cfg.k_max,
        "B_max": angular_span(cfg),
        "N1": top_layer_count(cfg),
        "L": hierarchy_depth(cfg),
    }


def trial_seed(master: int, sweep_index: int, trial: int) -> int:
    """Per-trial seed from the master seed; independent of the scheme list."""
    ss = np.random.SeedSequence(master, spawn_key=(sweep_index, trial))
    return int(ss.generate_state(1, np.uint32)[0])


def _trial_rngs(seed: int, schemes: tuple[str, ...]):
    ch = np.random.default_rng([seed, 0])
    return ch, {s: np.random.default_rng([seed, 1, zlib.crc32(s.encode())]) for s in schemes}


def _point_config(cfg: ExperimentConfig, value: float):
    system, scenario, noise = cfg.system, cfg.scenario, cfg.noise
    if cfg.sweep_axis == "snr_db":
        noise = replace(noise, snr_db=value)
    elif cfg.sweep_axis == "r0":
        scenario = replace(scenario, r0_range=(value, value))
    else:
        if value != int(value):
            raise ConfigError(f"sweep.values for n_bs must be integers, got {value}")
        system = replace(system, n_bs=int(value))
    return system, scenario, noise


def iter_rows(cfg: ExperimentConfig) -> Iterator[MetricRow]:
    """Per-trial rows in (sweep value, trial, scheme) order."""
    for s_idx, value in enumerate(cfg.sweep_values):
        system, scenario, noise = _point_config(cfg, value)
        overheads = {s: overhead_of(s, system, cfg.n_rings) for s in cfg.schemes}
        if cfg.mode == "overhead":
            for scheme in cfg.schemes:
                yield MetricRow(scheme, cfg.sweep_axis, value, 0, math.nan, math.nan, math.nan,
                                math.nan, math.nan, overheads[scheme], cfg.seed)
            continue
        for t in range(cfg.trials):
            seed = trial_seed(cfg.seed, s_idx, t)
            ch_rng, rngs = _trial_rngs(seed, cfg.schemes)
            channel = generate_channel(system, scenario, ch_rng)
            p_gain = perfect_csi(channel).gain
            var = noise.variance(channel)
            rate_var = var or replace(noise, snr_db=LINK_SNR_DB).variance(channel)
            for scheme in cfg.schemes:
                res = run_scheme(scheme, channel, system, noise, rngs[scheme], cfg.n_rings)
                yield MetricRow(scheme, cfg.sweep_axis, value, t, channel.los.r0,
                                channel.los.theta0, res.gain, sum_rate(res.gain, rate_var),
                                success(res, p_gain, channel.kb), res.measurements_used, seed)


@dataclass
class SweepResult:
    rows: list[MetricRow]
    aggregates: list[MetricRow]
    manifest: dict

    def csv_text(self) -> str:
        buf = io.StringIO()
        write_metric_rows(buf, self.rows)
        write_metric_rows(buf, self.aggregates, header=False)
        return buf.getvalue()


def build_manifest(cfg: ExperimentConfig, n_rows: int) -> dict:
    values = cfg.sweep_values if cfg.sweep_axis == "n_bs" else (None,)
    per_point = {}
    for v in values:
        system = cfg.system if v is None else replace(cfg.system, n_bs=int(v))
        per_point[str(system.n_bs)] = {
            "derived": derived_constants(system),
            "overhead": {s: overhead_of(s, system, cfg.n_rings) for s in cfg.schemes},
        }
    return {
        "config": {k: cfg.raw[k] for k in sorted(cfg.raw)},
        "resolved": {
            "system": dataclasses.asdict(cfg.system),
            "scenario": dataclasses.asdict(cfg.scenario),
            "noise": dataclasses.asdict(cfg.noise),
            "sweep": {"axis": cfg.sweep_axis, "values": list(cfg.sweep_values)},
            "schemes": list(cfg.schemes), "trials": cfg.trials, "mode": cfg.mode,
            "n_rings": cfg.n_rings,
        },
        "constants": per_point,
        "seed": cfg.seed,
        "rows": n_rows,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def run_sweep(cfg: ExperimentConfig, output: str | Path | None = None) -> SweepResult:
    """Run every scheme on every (sweep value, trial) channel draw.

    Writes the CSV (per-trial rows then ``trial=mean`` aggregates) and a
    ``.manifest.json`` next to it when ``output`` is given.
    """
    rows = list(iter_rows(cfg))
    aggs = aggregate(rows) if cfg.mode == "simulate" else []
    result = SweepResult(rows, aggs, build_manifest(cfg, len(rows)))
    if output is not None:
        out = Path(output)
        out.write_text(result.csv_text())
        out.with_suffix(".manifest.json").write_text(
            json.dumps(result.manifest, indent=2, default=_json_default) + "\n")
    return result


def _json_default(o):
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    if isinstance(o, (np.integer, np.floating)):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def inspect_pattern(cfg: SystemConfig, k0: float, b0: float, resolution: tuple[int, int],
                    output: str | Path, b_span: float | None = None) -> Path:
    """Write the k-b coherence map of the chirp at ``(k0, b0)`` and its rect-model overlay.

    The map goes to ``output`` and the overlay to ``<output stem>.ideal<suffix>``.
    ``b_span`` limits the intercept axis to ``b0 +- b_span/2``; the default is
    the full ``[-1, 1)`` range.
    """
    if not (cfg.k_min <= k0 <= cfg.k_max * (1 + 1e-12)) or not -1 <= b0 <= 1:
        raise ValueError(f"(k0, b0) = ({k0}, {b0}) outside the domain "
                         f"k in [{cfg.k_min}, {cfg.k_max}], b in [-1, 1]")
    nk, nb = resolution
    if nk < 2 or nb < 2:
        raise ValueError("resolution must be at least 2x2")
    ks = np.linspace(cfg.k_min, cfg.k_max, nk)
    if b_span is None:
        bs = -1.0 + 2.0 * np.arange(nb) / nb
    else:
        bs = np.linspace(b0 - b_span / 2, b0 + b_span / 2, nb)
    src = KbPoint(k0, b0)
    pm = kb_coherence_map(cfg, src, ks, bs)
    out = Path(output)
    meta = f"k0={k0!r} b0={b0!r} n_bs={cfg.n_bs} f_c={cfg.f_c!r}\nrows: k, columns: b"
    with out.open("w") as fh:
        write_pattern(fh, pm, comment="coherence |w^H f|\n" + meta)
    with out.with_name(out.stem + ".ideal" + out.suffix).open("w") as fh:
        write_pattern(fh, pm, ideal_coherence(cfg, src, ks, bs),
                      comment="rect-model coherence\n" + meta)
    return out


def codebook_for(cfg: SystemConfig, which: str, n_rings: int = 16):
    """Resolve a selector: ``top``, ``layer:<l>``, ``elementary``, ``dft`` or ``distance-ring``."""
    if which == "top":
        return layer_codewords(cfg, 1)
    if which.startswith("layer:"):
        try:
            layer = int(which.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad layer selector {which!r}") from None
        if not 1 <= layer <= hierarchy_depth(cfg):
            raise ValueError(f"layer must be in 1..{hierarchy_depth(cfg)}")
        return layer_codewords(cfg, layer)
    if which == "elementary":
        return elementary_codebook(cfg)
    if which == "dft":
        return dft_codebook(cfg)
    if which == "distance-ring":
        return distance_ring_codebook(cfg, n_rings)
    raise ValueError(f"unknown codebook selector {which!r}; expected top, layer:<l>, "
                     "elementary, dft or distance-ring")


def inspect_codebook(cfg: SystemConfig, which: str, output: str | Path,
                     include_vectors: bool = False, n_rings: int = 16) -> int:
    """Export the selected codebook; returns the number of rows written."""
    cb = codebook_for(cfg, which, n_rings)
    with Path(output).open("w", newline="") as fh:
        return write_codebook(fh, cb, include_vectors)
