"""Beam-pattern analytics, link metrics and overhead accounting."""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields
from typing import Iterable, TextIO

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .codebook import (Codeword, chirp_codeword, chirp_vectors, hierarchy_depth,
                       intercept_grid, top_layer_count)
from .core import KbPoint, SystemConfig
from .training import SCHEMES, TrainingResult

SUCCESS_FRACTION = 0.9


def ideal_pattern(cfg: SystemConfig, source: KbPoint, k1: float) -> tuple[float, float]:
    """Rect-model coverage of a chirp beam on column ``k1``.

    Returns ``(width, gain)`` with ``width = |k0 - k1| N + 2/N`` and
    ``gain = 1 / sqrt(|k0 - k1| + 2/N^2)``; the support is centered on ``b0``.
    """
    if not cfg.k_min - 1e-15 <= k1 <= cfg.k_max * (1 + 1e-12):
        raise ValueError(f"k1={k1!r} outside [{cfg.k_min}, {cfg.k_max}]")
    n = cfg.n_bs
    dk = abs(source.k - k1)
    return dk * n + 2.0 / n, 1.0 / math.sqrt(dk + 2.0 / n**2)


def ideal_coherence(cfg: SystemConfig, source: KbPoint, k_samples: ArrayLike,
                    b_samples: ArrayLike) -> NDArray[np.float64]:
    """Rect model on a grid, rescaled to unit-norm coherence ``|w^H f|``.

    A column holding the whole beam power spread evenly over its support has
    ``|w^H f|^2 = 2 / (N * width)`` at each ``2/N``-spaced grid point.
    """
    ks = np.atleast_1d(np.asarray(k_samples, float))
    bs = np.atleast_1d(np.asarray(b_samples, float))
    out = np.zeros((ks.size, bs.size))
    for i, k1 in enumerate(ks):
        width, _ = ideal_pattern(cfg, source, float(k1))
        offset = np.abs(np.mod(bs - source.b + 1.0, 2.0) - 1.0)
        out[i] = np.where(offset <= width / 2, math.sqrt(2.0 / (cfg.n_bs * width)), 0.0)
    return np.minimum(out, 1.0)


@dataclass(frozen=True, eq=False)
class PatternMap:
    """Coherence of one beam against probe codewords on a k-b grid.

    ``coherence[i, j]`` belongs to ``(k_axis[i], b_axis[j])``.
    """

    k_axis: NDArray[np.float64]
    b_axis: NDArray[np.float64]
    coherence: NDArray[np.float64]
    source_id: int = 0

    def __post_init__(self) -> None:
        if self.coherence.shape != (self.k_axis.size, self.b_axis.size):
            raise ValueError("coherence shape does not match axes")

    def peak(self) -> tuple[float, float, float]:
        i, j = np.unravel_index(int(np.argmax(self.coherence)), self.coherence.shape)
        return float(self.k_axis[i]), float(self.b_axis[j]), float(self.coherence[i, j])


def kb_coherence_map(cfg: SystemConfig, codeword: Codeword | KbPoint, k_samples: ArrayLike,
                     b_samples: ArrayLike) -> PatternMap:
    """``|w_{k,b}^H f|`` over a grid of unit-norm chirp probes."""
    if isinstance(codeword, KbPoint):
        codeword = chirp_codeword(cfg, codeword)
    ks = np.asarray(k_samples, float)
    bs = np.asarray(b_samples, float)
    if ks.size < 2 or bs.size < 2:
        raise ValueError("need at least two samples per axis")
    f = codeword.vector / np.linalg.norm(codeword.vector)
    coh = np.empty((ks.size, bs.size))
    for i, k in enumerate(ks):
        coh[i] = np.abs(chirp_vectors(cfg, np.full(bs.size, k), bs).conj() @ f)
    return PatternMap(ks, bs, coh, codeword.id)


def column_power(cfg: SystemConfig, codeword: Codeword, k1: float) -> float:
    """Sum of ``|w^H f|^2`` over the ``N``-point intercept grid at column ``k1``."""
    pm = kb_coherence_map(cfg, codeword, [k1, k1], intercept_grid(cfg.n_bs))
    return float(np.sum(pm.coherence[0] ** 2))


def half_power_support(cfg: SystemConfig, source: KbPoint, k1: float,
                       oversample: int = 16) -> float:
    """Measured -3 dB intercept extent of a chirp beam on column ``k1``.

    The column is sampled ``oversample`` times finer than the ``2/N`` grid
    over a window twice the rect-model width; the result is the distance
    between the outermost samples within half the column peak power.
    """
    width, _ = ideal_pattern(cfg, source, k1)
    half = max(width, 4.0 / cfg.n_bs)
    step = 2.0 / (cfg.n_bs * oversample)
    bs = source.b + np.arange(-half, half + step / 2, step)
    pm = kb_coherence_map(cfg, source, [k1, k1], bs)
    p = pm.coherence[0] ** 2
    above = bs[p >= 0.5 * p.max()]
    return float(above.max() - above.min())


def sum_rate(gain: float, sigma2: float) -> float:
    """Spectral efficiency ``log2(1 + gain / sigma^2)`` in bits/s/Hz."""
    if gain < 0:
        raise ValueError("gain must be non-negative")
    if gain == 0:
        return 0.0
    if sigma2 == 0:
        return math.inf
    return math.log2(1.0 + gain / sigma2)


def success(result: TrainingResult, perfect_gain: float, true_point: KbPoint | None = None) -> bool:
    """Training succeeds when the beam reaches 90% of the perfect-CSI gain, or
    when the resolved k-b cell contains the true LoS point."""
    if not perfect_gain > 0:
        raise ValueError("perfect_gain must be positive")
    if result.gain >= SUCCESS_FRACTION * perfect_gain:
        return True
    return true_point is not None and result.cell_contains(true_point)


def overhead_closed_form(cfg: SystemConfig) -> int:
    """Hierarchical pilot count ``N^(1) + 3 (L - 1)``."""
    return top_layer_count(cfg) + 3 * (hierarchy_depth(cfg) - 1)


def overhead_of(scheme: str, cfg: SystemConfig, n_rings: int = 16,
                slope_bins: int | None = None) -> int:
    """Pilot measurements a scheme spends on one training run."""
    n = cfg.n_bs
    if scheme == "hierarchical":
        return overhead_closed_form(cfg)
    if scheme == "elementary-exhaustive":
        return (slope_bins or 2 ** (hierarchy_depth(cfg) - 1)) * n
    if scheme == "dft-exhaustive":
        return n
    if scheme == "distance-ring":
        return n_rings * n
    if scheme == "perfect-csi":
        return 0
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {', '.join(SCHEMES)}")


@dataclass(frozen=True)
class MetricRow:
    """One CSV record; field order is the file's column order."""

    scheme: str
    sweep_axis: str
    sweep_value: float
    trial: int | str
    r0: float
    theta0: float
    gain: float
    sum_rate: float
    success: bool | float
    overhead: float
    seed: int | str

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_metric_rows(out: TextIO, rows: Iterable[MetricRow], header: bool = True) -> int:
    w = csv.writer(out, lineterminator="\n")
    if header:
        w.writerow(MetricRow.columns())
    n = 0
    for row in rows:
        w.writerow([_fmt(v) for v in astuple(row)])
        n += 1
    return n


def aggregate(rows: Iterable[MetricRow]) -> list[MetricRow]:
    """Per ``(sweep_value, scheme)`` means, in first-seen order, tagged ``trial="mean"``."""
    groups: dict[tuple, list[MetricRow]] = {}
    for r in rows:
        groups.setdefault((r.sweep_axis, r.sweep_value, r.scheme), []).append(r)
    out = []
    for (axis, value, scheme), grp in groups.items():
        def mean(attr):
            return float(np.mean([float(getattr(r, attr)) for r in grp]))
        out.append(MetricRow(scheme, axis, value, "mean", mean("r0"), mean("theta0"),
                             mean("gain"), mean("sum_rate"), mean("success"),
                             mean("overhead"), ""))
    return out


def write_pattern(out: TextIO, pm: PatternMap, values: NDArray[np.float64] | None = None,
                  comment: str = "") -> None:
    """Plain-text matrix: first row ``nan b_0 .. b_M``, then ``k_i c_i0 .. c_iM``.

    Readable with ``numpy.loadtxt``; ``#`` lines carry metadata.
    """
    mat = pm.coherence if values is None else values
    if comment:
        for line in comment.splitlines():
            out.write(f"# {line}\n")
    out.write(" ".join(["nan"] + [repr(float(b)) for b in pm.b_axis]) + "\n")
    for k, row in zip(pm.k_axis, mat):
        out.write(" ".join([repr(float(k))] + [repr(float(v)) for v in row]) + "\n")


def read_pattern(path: str) -> PatternMap:
    data = np.loadtxt(path, ndmin=2)
    return PatternMap(data[1:, 0], data[0, 1:], data[1:, 1:])
