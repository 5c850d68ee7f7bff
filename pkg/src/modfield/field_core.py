"""Box domains, evaluation grids, sampled fields, and regularity functionals.

The functionals are discrete analogues of Hoelder-type norms: the plain
variant is ``sup |f|`` plus the largest increment-to-modulus ratio
``|f(x) - f(y)| / theta(|x - y|)`` over point pairs; the anchored variant
replaces the sup with ``|f(x0)|`` at a distinguished point, which changes
the value by at most the factor ``1 + theta(diam)``; the smooth variant
adds up derivative sups through a given order and applies the increment
ratio to the top derivative.

Everything operates on finite samples, so each "norm" here is a grid
under-approximation of its continuum counterpart; callers that need
certified upper bounds get them from the series-specific envelope
machinery instead (:mod:`modfield.martingale_sim`).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import IO, Iterable

import numpy as np

from .modulus import Modulus, ModulusError

__all__ = [
    "BoxDomain",
    "Grid",
    "FieldSample",
    "SmoothFieldSample",
    "SeminormBreakdown",
    "sup_norm",
    "modulus_seminorm",
    "holder_norm",
    "anchored_holder_norm",
    "cm_norm",
    "smooth_holder_norm",
]

_PAIR_BLOCK = 256  # rows per block in pairwise scans; caps memory at block * n


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box, dimension 1 or 2: ``intervals[k] = (a_k, b_k)``."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        object.__setattr__(self, "intervals", ivs)
        if len(ivs) not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {len(ivs)}")
        for a, b in ivs:
            if not (math.isfinite(a) and math.isfinite(b)):
                raise ValueError(f"interval ({a}, {b}) must be finite")
            if not a < b:
                raise ValueError(f"interval ({a}, {b}) must have a < b")

    @property
    def dim(self) -> int:
        return len(self.intervals)

    @property
    def lower(self) -> np.ndarray:
        return np.array([a for a, _ in self.intervals])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b for _, b in self.intervals])

    @property
    def diameter(self) -> float:
        return float(np.sqrt(sum((b - a) ** 2 for a, b in self.intervals)))

    def contains(self, points: np.ndarray, slack: float = 1e-12) -> bool:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            return False
        pad = slack * max(1.0, self.diameter)
        return bool(
            np.all(pts >= self.lower - pad) and np.all(pts <= self.upper + pad)
        )

    def to_dict(self) -> dict:
        return {"intervals": [[a, b] for a, b in self.intervals]}

    @classmethod
    def from_dict(cls, data: dict) -> "BoxDomain":
        return cls(intervals=tuple(tuple(iv) for iv in data["intervals"]))

    @classmethod
    def unit_interval(cls) -> "BoxDomain":
        return cls(intervals=((0.0, 1.0),))


@dataclass(frozen=True)
class Grid:
    """Regular product grid on a box; points enumerate in row-major order.

    Only ``(domain, shape)`` participate in equality/hashing/pickling
    semantics; the point array is derived lazily.
    """

    domain: BoxDomain
    shape: tuple[int, ...]

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        object.__setattr__(self, "shape", shape)
        if len(shape) != self.domain.dim:
            raise ValueError(
                f"shape {shape} does not match domain dimension {self.domain.dim}"
            )
        if any(n < 2 for n in shape):
            raise ValueError(f"need at least 2 points per axis, got {shape}")

    @property
    def n_points(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(
            np.linspace(a, b, n)
            for (a, b), n in zip(self.domain.intervals, self.shape)
        )

    @cached_property
    def points(self) -> np.ndarray:
        """All grid points, shape ``(n_points, dim)``, row-major."""
        if self.domain.dim == 1:
            pts = self.axes[0][:, None]
        else:
            xx, yy = np.meshgrid(*self.axes, indexing="ij")
            pts = np.column_stack([xx.ravel(), yy.ravel()])
        pts.setflags(write=False)
        return pts

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(
            (b - a) / (n - 1)
            for (a, b), n in zip(self.domain.intervals, self.shape)
        )

    def to_dict(self) -> dict:
        return {"domain": self.domain.to_dict(), "shape": list(self.shape)}

    @classmethod
    def from_dict(cls, data: dict) -> "Grid":
        return cls(domain=BoxDomain.from_dict(data["domain"]), shape=tuple(data["shape"]))

    @classmethod
    def regular(cls, domain: BoxDomain, points_per_axis: int | Iterable[int]) -> "Grid":
        if isinstance(points_per_axis, int):
            shape = (points_per_axis,) * domain.dim
        else:
            shape = tuple(points_per_axis)
        return cls(domain=domain, shape=shape)


def _frozen_values(values, n_expected: int, what: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != (n_expected,):
        raise ValueError(f"{what} must have shape ({n_expected},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FieldSample:
    """Values of a scalar field on a grid (``values[i]`` at ``grid.points[i]``)."""

    grid: Grid
    values: np.ndarray
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "values", _frozen_values(self.values, self.grid.n_points, "values")
        )

    def to_dict(self) -> dict:
        d = {"grid": self.grid.to_dict(), "values": self.values.tolist()}
        if self.label is not None:
            d["label"] = self.label
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "FieldSample":
        return cls(
            grid=Grid.from_dict(data["grid"]),
            values=np.array(data["values"], dtype=float),
            label=data.get("label"),
        )

    def write_csv(self, fh: IO[str]) -> None:
        """Columns: one per coordinate axis, then the value."""
        writer = csv.writer(fh, lineterminator="\n")
        dim = self.grid.domain.dim
        writer.writerow([f"x{k}" for k in range(dim)] + ["value"])
        for pt, v in zip(self.grid.points, self.values):
            writer.writerow([repr(float(c)) for c in pt] + [repr(float(v))])


@dataclass(frozen=True, eq=False)
class SmoothFieldSample:
    """A 1-d field with its derivatives: ``jets[l]`` samples the l-th derivative.

    ``jets`` has shape ``(order + 2, n_points)`` — derivative orders
    ``0 .. order + 1`` — so the smooth functionals through ``order`` are
    computable without re-differentiation.
    """

    grid: Grid
    jets: np.ndarray
    label: str | None = None

    def __post_init__(self):
        if self.grid.domain.dim != 1:
            raise ValueError("smooth samples are one-dimensional")
        jets = np.array(self.jets, dtype=float)
        if jets.ndim != 2 or jets.shape[1] != self.grid.n_points or jets.shape[0] < 2:
            raise ValueError(
                f"jets must have shape (order + 2 >= 2, {self.grid.n_points}), got {jets.shape}"
            )
        if not np.all(np.isfinite(jets)):
            raise ValueError("jets must be finite")
        jets.setflags(write=False)
        object.__setattr__(self, "jets", jets)

    @property
    def order(self) -> int:
        return self.jets.shape[0] - 2

    def derivative(self, level: int) -> FieldSample:
        if not 0 <= level < self.jets.shape[0]:
            raise ValueError(f"derivative order {level} outside stored range")
        return FieldSample(grid=self.grid, values=self.jets[level], label=self.label)

    def to_dict(self) -> dict:
        d = {"grid": self.grid.to_dict(), "jets": self.jets.tolist()}
        if self.label is not None:
            d["label"] = self.label
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SmoothFieldSample":
        return cls(
            grid=Grid.from_dict(data["grid"]),
            jets=np.array(data["jets"], dtype=float),
            label=data.get("label"),
        )


@dataclass(frozen=True)
class SeminormBreakdown:
    """Hoelder-type functional split into its two contributions.

    ``witness_pair`` gives the (i, j) grid indices attaining the increment
    ratio; the first maximizer in row-major pair order wins ties.
    """

    sup_norm: float
    theta_seminorm: float
    total: float
    witness_pair: tuple[int, int]

    def to_dict(self) -> dict:
        return {
            "sup_norm": self.sup_norm,
            "theta_seminorm": self.theta_seminorm,
            "total": self.total,
            "witness_pair": list(self.witness_pair),
        }


def sup_norm(sample: FieldSample) -> float:
    """``max_i |values[i]|`` — exact on the sample."""
    return float(np.max(np.abs(sample.values)))


def _neighbor_pairs(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs of lattice neighbors (the minimal-spacing pairs per axis)."""
    if grid.domain.dim == 1:
        n = grid.shape[0]
        i = np.arange(n - 1)
        return i, i + 1
    n0, n1 = grid.shape
    idx = np.arange(n0 * n1).reshape(n0, n1)
    i_right, j_right = idx[:, :-1].ravel(), idx[:, 1:].ravel()
    i_down, j_down = idx[:-1, :].ravel(), idx[1:, :].ravel()
    return np.concatenate([i_right, i_down]), np.concatenate([j_right, j_down])


def _stratified_pairs(grid: Grid, budget: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic pair subsample: all lattice neighbors, then geometric
    strides through the row-major order until the budget is spent."""
    n = grid.n_points
    i_nn, j_nn = _neighbor_pairs(grid)
    chunks_i, chunks_j = [i_nn], [j_nn]
    remaining = budget - len(i_nn)
    stride = 2
    while remaining > 0 and stride < n:
        i = np.arange(0, n - stride)
        if len(i) > remaining:
            step = int(np.ceil(len(i) / remaining))
            i = i[::step]
        chunks_i.append(i)
        chunks_j.append(i + stride)
        remaining -= len(i)
        stride *= 2
    return np.concatenate(chunks_i), np.concatenate(chunks_j)


def _pair_ratio_scan(
    points: np.ndarray, values: np.ndarray, modulus: Modulus
) -> tuple[float, tuple[int, int]]:
    """Exhaustive max of |dv| / theta(|dx|) over i < j, blocked for memory.

    Returns the first maximizer in row-major pair order.
    """
    n = len(values)
    best = -1.0
    witness = (0, 1)
    for lo in range(0, n - 1, _PAIR_BLOCK):
        hi = min(lo + _PAIR_BLOCK, n - 1)
        rows = np.arange(lo, hi)
        # For row i only columns j > i matter; compute the full block and
        # mask the lower triangle with -inf ratios.
        dx = np.sqrt(
            np.sum((points[rows, None, :] - points[None, :, :]) ** 2, axis=-1)
        )
        dv = np.abs(values[rows, None] - values[None, :])
        col = np.arange(n)[None, :]
        mask = col > rows[:, None]
        theta = np.asarray(modulus(np.where(mask, dx, 0.0)))
        if np.any((theta <= 0.0) & mask & (dx > 0.0)):
            raise ModulusError(
                "modulus vanishes at a positive pair distance; increment "
                "ratios are unbounded"
            )
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(mask, dv / theta, -np.inf)
        k = int(np.argmax(ratio))
        r = float(ratio.flat[k])
        if r > best:
            best = r
            witness = (int(rows[k // n]), int(k % n))
    return best, witness


def _subsampled_ratio(
    points: np.ndarray,
    values: np.ndarray,
    modulus: Modulus,
    i_idx: np.ndarray,
    j_idx: np.ndarray,
) -> tuple[float, tuple[int, int]]:
    dx = np.sqrt(np.sum((points[i_idx] - points[j_idx]) ** 2, axis=-1))
    dv = np.abs(values[i_idx] - values[j_idx])
    theta = np.asarray(modulus(dx))
    if np.any((theta <= 0.0) & (dx > 0.0)):
        raise ModulusError(
            "modulus vanishes at a positive pair distance; increment ratios "
            "are unbounded"
        )
    ratio = dv / theta
    k = int(np.argmax(ratio))
    return float(ratio[k]), (int(i_idx[k]), int(j_idx[k]))


def modulus_seminorm(
    sample: FieldSample, modulus: Modulus, pair_budget: int | None = None
) -> tuple[float, tuple[int, int]]:
    """Largest increment-to-modulus ratio over grid point pairs, with witness.

    ``pair_budget=None`` (or a budget at least the full pair count) scans all
    ``n (n - 1) / 2`` pairs.  A smaller budget scans a deterministic
    stratified subsample that always includes every lattice-neighbor pair,
    then widening geometric strides — short-range pairs are where concave
    moduli bind, so the subsample under-approximates the full scan but keeps
    its sharpest region exact.

    Raises :class:`~modfield.modulus.ModulusError` if the modulus vanishes at
    a positive sampled distance (the ratio would be unbounded).
    """
    n = sample.grid.n_points
    if n < 2:
        raise ValueError("need at least two points")
    points = sample.grid.points
    total_pairs = n * (n - 1) // 2
    if pair_budget is None or pair_budget >= total_pairs:
        return _pair_ratio_scan(points, sample.values, modulus)
    if pair_budget < 1:
        raise ValueError(f"pair budget must be positive, got {pair_budget}")
    i_idx, j_idx = _stratified_pairs(sample.grid, pair_budget)
    return _subsampled_ratio(points, sample.values, modulus, i_idx, j_idx)


def holder_norm(
    sample: FieldSample, modulus: Modulus, pair_budget: int | None = None
) -> SeminormBreakdown:
    """Sup norm plus increment-ratio seminorm (a norm on sampled fields)."""
    sem, witness = modulus_seminorm(sample, modulus, pair_budget=pair_budget)
    sup = sup_norm(sample)
    return SeminormBreakdown(
        sup_norm=sup, theta_seminorm=sem, total=sup + sem, witness_pair=witness
    )


def anchored_holder_norm(
    sample: FieldSample,
    modulus: Modulus,
    origin_index: int = 0,
    pair_budget: int | None = None,
) -> SeminormBreakdown:
    """Like :func:`holder_norm` but anchored: ``|f(x0)|`` replaces the sup.

    Comparable to the sup variant within a factor ``1 + theta(diam)``: the
    anchored value is never larger, and never smaller than the sup variant
    divided by ``1 + theta(diam)``.
    """
    n = sample.grid.n_points
    if not 0 <= origin_index < n:
        raise ValueError(f"origin index {origin_index} outside 0..{n - 1}")
    sem, witness = modulus_seminorm(sample, modulus, pair_budget=pair_budget)
    at_origin = float(abs(sample.values[origin_index]))
    return SeminormBreakdown(
        sup_norm=at_origin, theta_seminorm=sem, total=at_origin + sem, witness_pair=witness
    )


def cm_norm(sample: SmoothFieldSample, order: int) -> float:
    """Sum of derivative sup norms through ``order`` (classical C^m norm)."""
    if not 0 <= order <= sample.order + 1:
        raise ValueError(
            f"order {order} outside stored derivative range 0..{sample.order + 1}"
        )
    return float(np.sum(np.max(np.abs(sample.jets[: order + 1]), axis=1)))


def smooth_holder_norm(
    sample: SmoothFieldSample, modulus: Modulus, pair_budget: int | None = None
) -> SeminormBreakdown:
    """C^{order+1} norm plus the increment-ratio seminorm of the top derivative.

    The breakdown reuses ``sup_norm`` for the C^{order+1} part and
    ``theta_seminorm`` for the top-derivative ratio; ``total`` is their sum.
    """
    cm = cm_norm(sample, sample.order + 1)
    top = FieldSample(grid=sample.grid, values=sample.jets[-1])
    sem, witness = modulus_seminorm(top, modulus, pair_budget=pair_budget)
    return SeminormBreakdown(
        sup_norm=cm, theta_seminorm=sem, total=cm + sem, witness_pair=witness
    )
