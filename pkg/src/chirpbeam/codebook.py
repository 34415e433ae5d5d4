"""Slope-intercept codebooks built from spatial-chirp codewords.

A chirp codeword at ``(k, b)`` has entries ``exp(-j pi (k n^2 + b n)) / sqrt(N)``
over the centered antenna indices. The stored vector is the *template*
``w``; the transmitted beamformer is its conjugate, so a noiseless
measurement reads the coherence ``|w^H h|``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterator, Literal, NamedTuple, Sequence, TextIO

import numpy as np
from numpy.typing import NDArray

from .core import KbPoint, SystemConfig, UserGeometry, nearfield_steering, rayleigh_distance

__all__ = [
    "KbPoint", "Codeword", "TriangleRegion", "CodebookGrid", "Subdivision",
    "wrap_intercept", "chirp_vectors", "chirp_codeword", "hierarchy_depth", "angular_span",
    "top_layer_count", "top_layer_codebook", "child_codewords", "layer_codewords",
    "elementary_codebook", "dft_codebook", "distance_ring_codebook", "intercept_grid",
    "write_codebook", "read_codebook",
]

_EPS = 1e-9


def wrap_intercept(b):
    """Fold intercepts into ``[-1, 1)``; ``b`` and ``b + 2`` give the same codeword."""
    return np.mod(np.asarray(b, dtype=float) + 1.0, 2.0) - 1.0


def intercept_grid(n_bs: int) -> NDArray[np.float64]:
    """``n_bs`` intercepts ``-1 + 2q/n_bs`` covering ``[-1, 1)``."""
    return -1.0 + 2.0 * np.arange(n_bs) / n_bs


def chirp_vectors(cfg: SystemConfig, k, b) -> NDArray[np.complex128]:
    """Rows of normalized chirp templates for broadcastable ``k`` and ``b``."""
    n = cfg.indices.astype(float)
    k = np.asarray(k, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    return np.exp(-1j * np.pi * (k * n**2 + b * n)) / math.sqrt(cfg.n_bs)


@dataclass(frozen=True, eq=False)
class Codeword:
    point: KbPoint
    vector: NDArray[np.complex128]
    layer: int = 1
    id: int = 0

    @property
    def beamformer(self) -> NDArray[np.complex128]:
        """Transmit weights: elementwise conjugate of the template."""
        return np.conj(self.vector)


def chirp_codeword(cfg: SystemConfig, p: KbPoint, layer: int = 1, id: int = 0) -> Codeword:
    """Synthesize the unit-norm chirp codeword for ``p``."""
    if p.k < 0:
        raise ValueError(f"slope must be non-negative, got {p.k!r}")
    b = float(wrap_intercept(p.b))
    return Codeword(KbPoint(float(p.k), b), chirp_vectors(cfg, p.k, b), layer, id)


def angular_span(cfg: SystemConfig) -> float:
    """Largest intercept spacing ``B_max = k_max * N`` at the top layer."""
    return cfg.k_max * cfg.n_bs


def hierarchy_depth(cfg: SystemConfig) -> int:
    """Smallest ``L`` with ``B_max / 2**(L-1) <= 2 / N``."""
    ratio = angular_span(cfg) * cfg.n_bs / 2.0
    if ratio <= 1.0 + _EPS:
        return 1
    return 1 + math.ceil(math.log2(ratio) - _EPS)


def top_layer_count(cfg: SystemConfig) -> int:
    """``N^(1) = 2 * ceil(2 / B_max)`` top-layer codewords."""
    return 2 * math.ceil(2.0 / angular_span(cfg) - _EPS)


@dataclass(frozen=True)
class TriangleRegion:
    """Triangle in the k-b plane, dominated by the codeword at its apex.

    Vertices are stored apex first; the two base corners share one k column
    and are ordered by increasing intercept. Intercepts are kept unwrapped so
    neighbouring regions stay contiguous across ``b = +-1``.
    """

    vertices: tuple[KbPoint, KbPoint, KbPoint]
    apex_index: int = 0
    layer: int = 1
    code: int = 0

    def __post_init__(self) -> None:
        if self.area <= 0:
            raise ValueError("degenerate triangle region")

    @property
    def apex(self) -> KbPoint:
        return self.vertices[self.apex_index]

    @property
    def base(self) -> tuple[KbPoint, KbPoint]:
        others = [v for i, v in enumerate(self.vertices) if i != self.apex_index]
        return tuple(sorted(others, key=lambda v: v.b))  # type: ignore[return-value]

    @property
    def orientation(self) -> Literal["left", "right"]:
        """``left`` when the apex has the smaller slope (Case 1), else ``right``."""
        return "left" if self.apex.k < self.base[0].k else "right"

    @property
    def area(self) -> float:
        (k1, b1), (k2, b2), (k3, b3) = self.vertices
        return 0.5 * abs((k2 - k1) * (b3 - b1) - (k3 - k1) * (b2 - b1))

    @property
    def k_extent(self) -> float:
        ks = [v.k for v in self.vertices]
        return max(ks) - min(ks)

    @property
    def b_extent(self) -> float:
        bs = [v.b for v in self.vertices]
        return max(bs) - min(bs)

    def contains(self, p: KbPoint, tol: float = 1e-12) -> bool:
        """Point-in-triangle test with the intercept taken modulo 2."""
        bs = [v.b for v in self.vertices]
        lo = min(bs)
        b = lo + float(np.mod(p.b - lo, 2.0))
        for cand in (b, b - 2.0):
            if self._contains_unwrapped(p.k, cand, tol):
                return True
        return False

    def _contains_unwrapped(self, k: float, b: float, tol: float) -> bool:
        (k1, b1), (k2, b2), (k3, b3) = self.vertices
        # scale k so both axes are O(1) before the sign tests
        s = 1.0 / max(self.k_extent, 1e-300)
        d1 = ((k2 - k1) * (b - b1) - (k - k1) * (b2 - b1)) * s
        d2 = ((k3 - k2) * (b - b2) - (k - k2) * (b3 - b2)) * s
        d3 = ((k1 - k3) * (b - b3) - (k - k3) * (b1 - b3)) * s
        neg = min(d1, d2, d3) < -tol
        pos = max(d1, d2, d3) > tol
        return not (neg and pos)


class Subdivision(NamedTuple):
    """Midpoint split of a region: three new codewords and four sub-regions.

    ``owners[i]`` dominates ``regions[i]``; ``owners[0]`` is the parent.
    """

    children: tuple[Codeword, Codeword, Codeword]
    regions: tuple[TriangleRegion, TriangleRegion, TriangleRegion, TriangleRegion]
    owners: tuple[Codeword, Codeword, Codeword, Codeword]


def _mid(p: KbPoint, q: KbPoint) -> KbPoint:
    return KbPoint(0.5 * (p.k + q.k), 0.5 * (p.b + q.b))


def top_layer_codebook(cfg: SystemConfig) -> tuple[list[Codeword], list[TriangleRegion]]:
    """Top-layer codewords on the ``k_min`` and ``k_max`` columns and their regions.

    Left-column codeword ``j`` sits at ``(k_min, -1 + j*B)`` and owns the
    left-pointing triangle reaching ``k_max``; right-column codewords sit half
    a spacing higher at ``k_max`` and own the complementary triangles. The
    spacing ``B = 4 / N^(1)`` never exceeds ``B_max``, so the regions tile
    ``[k_min, k_max] x [-1, 1)`` exactly.
    """
    n_top = top_layer_count(cfg)
    half = n_top // 2
    spacing = 2.0 / half
    k0, k1 = cfg.k_min, cfg.k_max
    left_cw, left_rg, right_cw, right_rg = [], [], [], []
    for j in range(half):
        b = -1.0 + j * spacing
        apex = KbPoint(k0, b)
        left_rg.append(TriangleRegion(
            (apex, KbPoint(k1, b - spacing / 2), KbPoint(k1, b + spacing / 2)), 0, 1, j))
        left_cw.append(chirp_codeword(cfg, apex, 1, j))
        apex = KbPoint(k1, b + spacing / 2)
        right_rg.append(TriangleRegion(
            (apex, KbPoint(k0, b), KbPoint(k0, b + spacing)), 0, 1, half + j))
        right_cw.append(chirp_codeword(cfg, apex, 1, half + j))
    return left_cw + right_cw, left_rg + right_rg


def child_codewords(cfg: SystemConfig, region: TriangleRegion, parent: Codeword) -> Subdivision:
    """Split ``region`` at its edge midpoints.

    With apex ``P`` and base ``A`` (lower intercept), ``B``: the new codewords
    sit at ``m_PA``, ``m_PB`` and ``m_AB``. The parent keeps the apex triangle;
    each new codeword dominates the sub-triangle whose apex it is, the central
    one (at ``m_AB``) being orientation-flipped.
    """
    P = region.apex
    if not (math.isclose(parent.point.k, P.k, rel_tol=1e-12, abs_tol=1e-18)
            and math.isclose(float(wrap_intercept(parent.point.b)), float(wrap_intercept(P.b)),
                             abs_tol=1e-12)):
        raise ValueError("parent codeword must sit at the region apex")
    A, B = region.base
    m_pa, m_pb, m_ab = _mid(P, A), _mid(P, B), _mid(A, B)
    layer = region.layer + 1
    c = region.code * 4
    regions = (
        TriangleRegion((P, m_pa, m_pb), 0, layer, c),
        TriangleRegion((m_pa, A, m_ab), 0, layer, c + 1),
        TriangleRegion((m_pb, B, m_ab), 0, layer, c + 2),
        TriangleRegion((m_ab, m_pa, m_pb), 0, layer, c + 3),
    )
    children = (
        chirp_codeword(cfg, m_pa, layer, c + 1),
        chirp_codeword(cfg, m_pb, layer, c + 2),
        chirp_codeword(cfg, m_ab, layer, c + 3),
    )
    return Subdivision(children, regions, (parent,) + children)


def layer_codewords(cfg: SystemConfig, layer: int) -> list[Codeword]:
    """All codewords first introduced at hierarchy ``layer`` (1 = top)."""
    if layer < 1:
        raise ValueError(f"layer must be >= 1, got {layer}")
    cws, regions = top_layer_codebook(cfg)
    if layer == 1:
        return cws
    owners = list(cws)
    for _ in range(layer - 2):
        nxt_r, nxt_o = [], []
        for reg, own in zip(regions, owners):
            sub = child_codewords(cfg, reg, own)
            nxt_r.extend(sub.regions)
            nxt_o.extend(sub.owners)
        regions, owners = nxt_r, nxt_o
    out: list[Codeword] = []
    for reg, own in zip(regions, owners):
        out.extend(child_codewords(cfg, reg, own).children)
    return out


@dataclass(frozen=True, eq=False)
class CodebookGrid:
    """Flat codebook with template vectors stacked row-wise in ``matrix``.

    ``points`` holds ``(k, b)`` per row. For k-b grids ``slopes`` and
    ``intercepts`` list the levels and rows run in row-major ``(k, b)`` order.
    """

    points: NDArray[np.float64]
    matrix: NDArray[np.complex128]
    name: str = "codebook"
    layer: int = 1
    slopes: NDArray[np.float64] | None = None
    intercepts: NDArray[np.float64] | None = None
    geometries: tuple[UserGeometry, ...] | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def __getitem__(self, i: int) -> Codeword:
        k, b = self.points[i]
        return Codeword(KbPoint(float(k), float(b)), self.matrix[i], self.layer, int(i))

    def __iter__(self) -> Iterator[Codeword]:
        return (self[i] for i in range(len(self)))

    @property
    def codewords(self) -> list[Codeword]:
        return list(self)


def _grid(cfg: SystemConfig, slopes: NDArray[np.float64], name: str) -> CodebookGrid:
    b = intercept_grid(cfg.n_bs)
    kk, bb = np.meshgrid(slopes, b, indexing="ij")
    pts = np.column_stack([kk.ravel(), bb.ravel()])
    # separable: slope chirp times intercept tone, one outer product per slope
    n = cfg.indices.astype(float)
    chirp = np.exp(-1j * np.pi * slopes[:, None] * n**2)
    tone = np.exp(-1j * np.pi * b[:, None] * n) / math.sqrt(cfg.n_bs)
    mat = (chirp[:, None, :] * tone[None, :, :]).reshape(-1, cfg.n_bs)
    return CodebookGrid(pts, mat, name, slopes=slopes, intercepts=b)


def elementary_codebook(cfg: SystemConfig, slope_bins: int | None = None) -> CodebookGrid:
    """Uniform ``slope_bins x N`` grid over ``[k_min, k_max] x [-1, 1)``.

    Slope levels include both ends of the interval; the default count
    ``2**(L-1)`` matches the bottom-layer resolution of the hierarchy.
    """
    if slope_bins is None:
        slope_bins = 2 ** (hierarchy_depth(cfg) - 1)
    if slope_bins < 1:
        raise ValueError(f"slope_bins must be >= 1, got {slope_bins}")
    if slope_bins == 1:
        slopes = np.array([cfg.k_min])
    else:
        slopes = np.linspace(cfg.k_min, cfg.k_max, slope_bins)
    return _grid(cfg, slopes, "elementary")


def dft_codebook(cfg: SystemConfig) -> CodebookGrid:
    """Orthonormal far-field codebook: the ``k = 0`` column."""
    return _grid(cfg, np.array([0.0]), "dft")


def distance_ring_codebook(cfg: SystemConfig, n_rings: int = 16,
                           r_cap: float | None = None) -> CodebookGrid:
    """Distance-sampled polar codebook.

    Exact spherical-wave steering vectors on every ``(r, theta)`` pair, with
    ``theta`` on the ``N``-point intercept grid and ``n_rings`` distances
    spaced uniformly on ``[r_min, r_cap]`` (``r_cap`` alone when a single
    ring is requested). ``r_cap`` defaults to the Rayleigh distance; pass
    ``inf`` for plane waves. Rows run ring-major.
    """
    if n_rings < 1:
        raise ValueError(f"n_rings must be >= 1, got {n_rings}")
    if r_cap is None:
        r_cap = rayleigh_distance(cfg)
    radii = [r_cap] if n_rings == 1 else list(np.linspace(cfg.r_min, r_cap, n_rings))
    thetas = intercept_grid(cfg.n_bs)
    geos = tuple(UserGeometry(float(r), float(t)) for r in radii for t in thetas)
    mat = np.stack([nearfield_steering(cfg, g, "exact") for g in geos]) / math.sqrt(cfg.n_bs)
    lam = cfg.wavelength
    pts = np.array([(0.0 if g.is_far_field else lam * (1 - g.theta0**2) / (4 * g.r0), g.theta0)
                    for g in geos])
    return CodebookGrid(pts, mat, "distance-ring", geometries=geos)


def write_codebook(out: TextIO | str, codewords: Sequence[Codeword] | CodebookGrid,
                   include_vectors: bool = False) -> int:
    """Write one CSV row per codeword: ``id, layer, k, b`` plus optional ``re_n, im_n`` pairs.

    Returns the number of rows written.
    """
    if isinstance(out, str):
        with open(out, "w", newline="") as fh:
            return write_codebook(fh, codewords, include_vectors)
    w = csv.writer(out, lineterminator="\n")
    rows = list(codewords)
    header = ["id", "layer", "k", "b"]
    if include_vectors and rows:
        for i in range(len(rows[0].vector)):
            header += [f"re_{i}", f"im_{i}"]
    w.writerow(header)
    for cw in rows:
        row = [cw.id, cw.layer, repr(cw.point.k), repr(cw.point.b)]
        if include_vectors:
            row += [repr(float(x)) for z in cw.vector for x in (z.real, z.imag)]
        w.writerow(row)
    return len(rows)


def read_codebook(src: TextIO | str) -> list[dict]:
    """Parse a file written by :func:`write_codebook` back into row dicts."""
    if isinstance(src, str) and "\n" not in src:
        with open(src, newline="") as fh:
            return read_codebook(fh)
    fh = io.StringIO(src) if isinstance(src, str) else src
    rows = []
    for rec in csv.DictReader(fh):
        out = {"id": int(rec["id"]), "layer": int(rec["layer"]),
               "k": float(rec["k"]), "b": float(rec["b"])}
        if "re_0" in rec:
            n = sum(1 for key in rec if key.startswith("re_"))
            out["vector"] = np.array([complex(float(rec[f"re_{i}"]), float(rec[f"im_{i}"]))
                                      for i in range(n)])
        rows.append(out)
    return rows

