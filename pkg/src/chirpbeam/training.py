"""Pilot measurements and beam-training procedures.

Every probe transmits the conjugated template of a unit-norm codeword with
pilot symbol ``s = 1``, so a noiseless measurement equals ``w^H h``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from .codebook import (Codeword, CodebookGrid, TriangleRegion, child_codewords,
                       distance_ring_codebook, dft_codebook, elementary_codebook,
                       hierarchy_depth, top_layer_codebook)
from .core import Channel, KbPoint, SystemConfig

SCHEMES = ("hierarchical", "elementary-exhaustive", "dft-exhaustive", "distance-ring",
           "perfect-csi")


@dataclass(frozen=True)
class NoiseSpec:
    """Measurement noise level.

    With ``reference="los"`` the SNR is taken against the perfect-CSI power of
    the instance's LoS component, ``sigma^2 = |beta_los|^2 N / 10^(snr/10)``,
    which keeps the SNR axis comparable across distances. With
    ``reference="absolute"``, ``sigma^2 = noise_floor / 10^(snr/10)``.
    ``snr_db = inf`` turns noise off.
    """

    snr_db: float = math.inf
    reference: Literal["los", "absolute"] = "los"
    noise_floor: float = 1.0

    def __post_init__(self) -> None:
        if self.reference not in ("los", "absolute"):
            raise ValueError(f"unknown SNR reference {self.reference!r}")

    @property
    def noiseless(self) -> bool:
        return math.isinf(self.snr_db) and self.snr_db > 0

    def reference_power(self, channel: Channel) -> float:
        if self.reference == "los":
            return abs(channel.los_gain) ** 2 * len(channel.h)
        return self.noise_floor

    def variance(self, channel: Channel) -> float:
        if self.noiseless:
            return 0.0
        return self.reference_power(channel) / 10.0 ** (self.snr_db / 10.0)


NOISELESS = NoiseSpec()


def _noise(rng: np.random.Generator, var: float, size: int) -> NDArray[np.complex128] | float:
    if var == 0.0:
        return 0.0
    z = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    return z * math.sqrt(var / 2.0)


def measure(channel: Channel, codeword: Codeword, noise: NoiseSpec = NOISELESS,
            rng: np.random.Generator | None = None) -> complex:
    """One received pilot sample ``h^T f + n`` with ``f = conj(w)``."""
    if len(codeword.vector) != len(channel.h):
        raise ValueError("codeword and channel dimensions differ")
    y = complex(channel.h @ codeword.beamformer)
    var = noise.variance(channel)
    if var:
        if rng is None:
            raise ValueError("a noisy measurement needs an rng")
        y += complex(_noise(rng, var, 1)[0])
    return y


def measure_many(channel: Channel, templates: NDArray[np.complex128], noise: NoiseSpec,
                 rng: np.random.Generator | None) -> NDArray[np.complex128]:
    """Vectorized :func:`measure` over stacked template rows."""
    y = np.conj(templates) @ channel.h
    var = noise.variance(channel)
    if var:
        if rng is None:
            raise ValueError("a noisy measurement needs an rng")
        y = y + _noise(rng, var, len(y))
    return y


def beamforming_gain(channel: Channel, codeword: Codeword) -> float:
    """Noiseless ``|h^T f|^2`` for the conjugated codeword."""
    return abs(complex(channel.h @ codeword.beamformer)) ** 2


@dataclass(frozen=True)
class RectCell:
    """Axis-aligned k-b cell; intercepts compared modulo 2."""

    k_lo: float
    k_hi: float
    b_lo: float
    b_hi: float

    def contains(self, p: KbPoint, tol: float = 1e-12) -> bool:
        if not self.k_lo - tol <= p.k <= self.k_hi + tol:
            return False
        b = self.b_lo + float(np.mod(p.b - self.b_lo, 2.0))
        return b <= self.b_hi + tol or b >= self.b_lo + 2.0 - tol


@dataclass(frozen=True)
class LayerTrace:
    layer: int
    probed: tuple[int, ...]
    magnitudes: tuple[float, ...]
    winner: int


@dataclass(frozen=True, eq=False)
class TrainingResult:
    """Outcome of one training run.

    ``cell`` is the k-b cell the winning codeword resolves (a triangle for the
    hierarchy, a rectangle for k-b grids, ``None`` when the scheme has no k
    resolution).
    """

    chosen: Codeword
    measurements_used: int
    gain: float
    scheme: str
    trace: tuple[LayerTrace, ...] = ()
    cell: TriangleRegion | RectCell | None = field(default=None, repr=False)

    def cell_contains(self, p: KbPoint) -> bool:
        return self.cell is not None and self.cell.contains(p)


@functools.lru_cache(maxsize=16)
def _top_layer(cfg: SystemConfig):
    cws, regions = top_layer_codebook(cfg)
    return cws, regions, np.stack([c.vector for c in cws])


def hierarchical_search(channel: Channel, cfg: SystemConfig, noise: NoiseSpec = NOISELESS,
                        rng: np.random.Generator | None = None,
                        g_th: float | None = None) -> TrainingResult:
    """Chirp-based hierarchical beam training.

    Probes all top-layer codewords, then descends ``L - 1`` layers. Each
    layer probes the three midpoint codewords of the current triangle and
    compares them with the parent's cached measurement; the winner's
    sub-triangle becomes the next region. ``g_th`` stops the descent once a
    winning measured power ``|y|^2`` reaches it.
    """
    cws, regions, mat = _top_layer(cfg)
    y = np.abs(measure_many(channel, mat, noise, rng))
    j = int(np.argmax(y))
    parent, region, y_parent = cws[j], regions[j], float(y[j])
    trace = [LayerTrace(1, tuple(c.id for c in cws), tuple(map(float, y)), parent.id)]
    used = len(cws)
    for _ in range(2, hierarchy_depth(cfg) + 1):
        if g_th is not None and y_parent**2 >= g_th:
            break
        sub = child_codewords(cfg, region, parent)
        y_new = np.abs(measure_many(channel, np.stack([c.vector for c in sub.children]),
                                    noise, rng))
        used += 3
        mags = np.concatenate([[y_parent], y_new])
        j = int(np.argmax(mags))
        parent, region, y_parent = sub.owners[j], sub.regions[j], float(mags[j])
        trace.append(LayerTrace(region.layer, tuple(c.id for c in sub.children),
                                tuple(map(float, y_new)), parent.id))
    return TrainingResult(parent, used, beamforming_gain(channel, parent), "hierarchical",
                          tuple(trace), region)


def _grid_cell(codebook: CodebookGrid, i: int, n_bs: int) -> RectCell | None:
    slopes = codebook.slopes
    if slopes is None or len(slopes) < 2:
        return None
    k, b = codebook.points[i]
    dk = (slopes[-1] - slopes[0]) / (len(slopes) - 1)
    db = 1.0 / n_bs
    return RectCell(k - dk / 2, k + dk / 2, b - db, b + db)


def exhaustive_search(channel: Channel, codebook: CodebookGrid, noise: NoiseSpec = NOISELESS,
                      rng: np.random.Generator | None = None,
                      scheme: str | None = None) -> TrainingResult:
    """Probe every codeword once and keep the strongest; ties go to the lowest id."""
    if len(codebook) == 0:
        raise ValueError("empty codebook")
    y = np.abs(measure_many(channel, codebook.matrix, noise, rng))
    i = int(np.argmax(y))
    cw = codebook[i]
    return TrainingResult(cw, len(codebook), beamforming_gain(channel, cw),
                          scheme or f"{codebook.name}-exhaustive",
                          (LayerTrace(1, tuple(range(len(codebook))), (), i),),
                          _grid_cell(codebook, i, channel.h.size))


def perfect_csi_beamformer(channel: Channel) -> Codeword:
    """Phase-conjugate unit-modulus beamformer, gain ``(sum |h_n|)^2 / N``."""
    h = channel.h
    template = np.exp(1j * np.angle(h)) / math.sqrt(h.size)
    return Codeword(channel.kb if not channel.los.is_far_field else KbPoint(0.0, channel.los.theta0),
                    template, 0, -1)


def perfect_csi(channel: Channel) -> TrainingResult:
    cw = perfect_csi_beamformer(channel)
    return TrainingResult(cw, 0, beamforming_gain(channel, cw), "perfect-csi")


@functools.lru_cache(maxsize=8)
def scheme_codebook(cfg: SystemConfig, scheme: str, n_rings: int = 16) -> CodebookGrid:
    """Cached codebook behind an exhaustive scheme."""
    if scheme == "elementary-exhaustive":
        return elementary_codebook(cfg)
    if scheme == "dft-exhaustive":
        return dft_codebook(cfg)
    if scheme == "distance-ring":
        return distance_ring_codebook(cfg, n_rings)
    raise ValueError(f"no codebook for scheme {scheme!r}")


def run_scheme(scheme: str, channel: Channel, cfg: SystemConfig, noise: NoiseSpec = NOISELESS,
               rng: np.random.Generator | None = None, n_rings: int = 16) -> TrainingResult:
    """Dispatch one of :data:`SCHEMES` on ``channel``."""
    if scheme == "hierarchical":
        return hierarchical_search(channel, cfg, noise, rng)
    if scheme == "perfect-csi":
        return perfect_csi(channel)
    if scheme in SCHEMES:
        return exhaustive_search(channel, scheme_codebook(cfg, scheme, n_rings), noise, rng, scheme)
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {', '.join(SCHEMES)}")
