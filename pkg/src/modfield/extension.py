"""Modulus-preserving extension of scattered data by inf-convolution.

Given anchors ``(x_i, v_i)`` and a constant ``M`` with
``|v_i - v_j| <= M * theta(|x_i - x_j|)`` over all anchor pairs, the
envelope

    ext(x) = min_i ( v_i + M * theta(|x - x_i|) )

interpolates the anchors and obeys the same increment bound everywhere on
the box — the classical way to extend a function off a finite set without
degrading its modulus of continuity.  It is also one-sided extremal: any
other extension with the same constant and anchor values lies pointwise at
or below it.

``build`` is the validated constructor (it fits or checks the constant);
the verifier functions re-check the defining inequalities numerically on
caller-supplied probes and report worst slacks rather than raising, so a
deliberately broken model (constructed directly, bypassing ``build``) shows
up as a failed report with a witness.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO

import numpy as np

from .field_core import BoxDomain
from .modulus import Modulus, ModulusError, modulus_from_dict

__all__ = [
    "InconsistencyError",
    "AnchorSet",
    "ExtensionModel",
    "fit_constant",
    "build",
    "VerificationReport",
    "verify_restriction",
    "verify_sandwich",
    "verify_modulus",
    "anchors_to_csv",
    "anchors_from_csv",
]

_PROBE_BLOCK = 512  # probes per block when evaluating against all anchors


class InconsistencyError(ValueError):
    """Anchor data incompatible with the requested increment bound."""


@dataclass(frozen=True, eq=False)
class AnchorSet:
    """Scattered sample: ``points`` of shape (n, dim) inside ``domain``,
    ``values`` of shape (n,).

    Coincident points are legal only with equal values; the pairwise
    consistency ops treat them as zero-distance pairs and reject unequal
    values there.
    """

    points: np.ndarray
    values: np.ndarray
    domain: BoxDomain

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        vals = np.array(self.values, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.domain.dim:
            raise ValueError(
                f"points must have shape (n, {self.domain.dim}), got {pts.shape}"
            )
        if vals.shape != (pts.shape[0],):
            raise ValueError(
                f"values must have shape ({pts.shape[0]},), got {vals.shape}"
            )
        if pts.shape[0] < 1:
            raise ValueError("need at least one anchor")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(vals))):
            raise ValueError("anchor points and values must be finite")
        if not self.domain.contains(pts):
            raise ValueError("anchor points must lie inside the domain")
        pts.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.points.shape[0]

    def extend(self, points: np.ndarray, values: np.ndarray) -> "AnchorSet":
        """New anchor set with extra points appended (originals first)."""
        extra = np.atleast_2d(np.asarray(points, dtype=float))
        if extra.shape[1] != self.domain.dim:
            extra = extra.reshape(-1, self.domain.dim)
        return AnchorSet(
            points=np.vstack([self.points, extra]),
            values=np.concatenate([self.values, np.asarray(values, dtype=float)]),
            domain=self.domain,
        )

    def to_dict(self) -> dict:
        return {
            "points": self.points.tolist(),
            "values": self.values.tolist(),
            "domain": self.domain.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AnchorSet":
        return cls(
            points=np.array(data["points"], dtype=float),
            values=np.array(data["values"], dtype=float),
            domain=BoxDomain.from_dict(data["domain"]),
        )


def _pair_distances(points: np.ndarray, lo: int, hi: int) -> np.ndarray:
    return np.sqrt(
        np.sum((points[lo:hi, None, :] - points[None, :, :]) ** 2, axis=-1)
    )


def fit_constant(anchors: AnchorSet, modulus: Modulus) -> float:
    """Smallest constant consistent with the anchors:
    ``max over pairs of |v_i - v_j| / theta(|x_i - x_j|)``.

    Zero-distance pairs with unequal values raise
    :class:`InconsistencyError` (no finite constant works); a modulus that
    vanishes at some positive pair distance raises
    :class:`~modfield.modulus.ModulusError`.  A single anchor fits with 0.
    """
    n = len(anchors)
    pts, vals = anchors.points, anchors.values
    best = 0.0
    for lo in range(0, n - 1, _PROBE_BLOCK):
        hi = min(lo + _PROBE_BLOCK, n - 1)
        dx = _pair_distances(pts, lo, hi)
        dv = np.abs(vals[lo:hi, None] - vals[None, :])
        col = np.arange(n)[None, :]
        mask = col > np.arange(lo, hi)[:, None]
        zero_d = mask & (dx == 0.0)
        if np.any(zero_d & (dv > 0.0)):
            k = int(np.argmax(zero_d & (dv > 0.0)))
            i, j = lo + k // n, k % n
            raise InconsistencyError(
                f"anchors {i} and {j} coincide at {pts[j]} with values "
                f"{vals[i]} != {vals[j]}"
            )
        theta = np.asarray(modulus(np.where(mask, dx, 0.0)))
        if np.any(mask & (theta <= 0.0) & (dx > 0.0)):
            raise ModulusError(
                "modulus vanishes at a positive anchor distance; no finite "
                "constant bounds the increments"
            )
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(mask & (dx > 0.0), dv / theta, -np.inf)
        best = max(best, float(np.max(ratio, initial=-np.inf)))
    return max(best, 0.0)


@dataclass(frozen=True, eq=False)
class ExtensionModel:
    """Inf-convolution extension ``x -> min_i (v_i + constant * theta(|x - x_i|))``.

    Construct through :func:`build` for the consistency-checked path; direct
    construction skips the check (useful for negative tests of the
    verifiers).  Calling the model evaluates it: a single point gives a
    float, a batch of shape (p, dim) gives an array.  Ties in the minimum
    resolve to the lowest anchor index.
    """

    anchors: AnchorSet
    modulus: Modulus
    constant: float

    def __post_init__(self):
        if not (self.constant >= 0.0) or not math.isfinite(self.constant):
            raise ValueError(f"constant must be finite and >= 0, got {self.constant}")

    def _batch(self, probes: np.ndarray, want_witness: bool):
        out = np.empty(len(probes))
        arg = np.empty(len(probes), dtype=int) if want_witness else None
        pts, vals, m = self.anchors.points, self.anchors.values, self.constant
        for lo in range(0, len(probes), _PROBE_BLOCK):
            hi = min(lo + _PROBE_BLOCK, len(probes))
            dx = np.sqrt(
                np.sum((probes[lo:hi, None, :] - pts[None, :, :]) ** 2, axis=-1)
            )
            cand = vals[None, :] + m * np.asarray(self.modulus(dx))
            out[lo:hi] = np.min(cand, axis=1)
            if want_witness:
                arg[lo:hi] = np.argmin(cand, axis=1)
        return out, arg

    def __call__(self, x):
        probes = np.asarray(x, dtype=float)
        single = probes.ndim <= 1
        probes = np.atleast_2d(probes)
        if probes.shape[1] != self.anchors.domain.dim:
            raise ValueError(
                f"probe dimension {probes.shape[1]} does not match domain "
                f"dimension {self.anchors.domain.dim}"
            )
        out, _ = self._batch(probes, want_witness=False)
        return float(out[0]) if single else out

    def evaluate_with_witness(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Values and the index of the anchor attaining each minimum."""
        probes = np.atleast_2d(np.asarray(x, dtype=float))
        out, arg = self._batch(probes, want_witness=True)
        return out, arg

    def to_dict(self) -> dict:
        return {
            "anchors": self.anchors.to_dict(),
            "modulus": self.modulus.to_dict(),
            "constant": self.constant,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExtensionModel":
        return cls(
            anchors=AnchorSet.from_dict(data["anchors"]),
            modulus=modulus_from_dict(data["modulus"]),
            constant=float(data["constant"]),
        )


def build(
    anchors: AnchorSet,
    modulus: Modulus,
    constant: float | None = None,
    tol: float | None = None,
) -> ExtensionModel:
    """Consistency-checked constructor.

    With ``constant=None`` the fitted constant is used.  An explicit
    constant below the fitted one (beyond ``tol``, default
    ``1e-9 * constant * theta(diam)``) raises :class:`InconsistencyError`
    naming the worst anchor pair.
    """
    fitted = fit_constant(anchors, modulus)
    if constant is None:
        return ExtensionModel(anchors=anchors, modulus=modulus, constant=fitted)
    constant = float(constant)
    if tol is None:
        tol = 1e-9 * constant * float(modulus(min(anchors.domain.diameter, modulus.domain_cap)))
    if constant < fitted - tol:
        i, j = _worst_pair(anchors, modulus)
        raise InconsistencyError(
            f"constant {constant} is below the fitted constant {fitted}; "
            f"worst anchor pair ({i}, {j}) with values "
            f"{anchors.values[i]} and {anchors.values[j]}"
        )
    return ExtensionModel(anchors=anchors, modulus=modulus, constant=constant)


def _worst_pair(anchors: AnchorSet, modulus: Modulus) -> tuple[int, int]:
    n = len(anchors)
    pts, vals = anchors.points, anchors.values
    best, wi, wj = -1.0, 0, 1
    for lo in range(0, n - 1, _PROBE_BLOCK):
        hi = min(lo + _PROBE_BLOCK, n - 1)
        dx = _pair_distances(pts, lo, hi)
        dv = np.abs(vals[lo:hi, None] - vals[None, :])
        col = np.arange(n)[None, :]
        mask = col > np.arange(lo, hi)[:, None]
        theta = np.asarray(modulus(np.where(mask, dx, 0.0)))
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(mask & (dx > 0.0) & (theta > 0.0), dv / theta, -np.inf)
        k = int(np.argmax(ratio))
        if float(ratio.flat[k]) > best:
            best = float(ratio.flat[k])
            wi, wj = lo + k // n, k % n
    return wi, wj


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of one numerical property check.

    ``worst_violation`` is the largest slack past the inequality (negative
    or zero means the property held everywhere sampled); ``witness``
    identifies where it occurred — index pairs for pairwise checks, a single
    index for the restriction check.  ``max_ratio`` is filled by the modulus
    check with the largest increment ratio relative to the model constant.
    """

    check: str
    passed: bool
    worst_violation: float
    witness: tuple
    tol: float
    max_ratio: float | None = None

    def to_dict(self) -> dict:
        d = {
            "check": self.check,
            "pass": self.passed,
            "worst_violation": self.worst_violation,
            "witness": list(self.witness),
            "tol": self.tol,
        }
        if self.max_ratio is not None:
            d["max_ratio"] = self.max_ratio
        return d


def verify_restriction(model: ExtensionModel, tol: float = 1e-12) -> VerificationReport:
    """The extension must reproduce anchor values exactly (to ``tol``)."""
    vals_at_anchors = model(model.anchors.points)
    dev = np.abs(vals_at_anchors - model.anchors.values)
    k = int(np.argmax(dev))
    worst = float(dev[k])
    return VerificationReport(
        check="restriction",
        passed=worst <= tol,
        worst_violation=worst,
        witness=(k,),
        tol=tol,
    )


def _default_verify_tol(model: ExtensionModel) -> float:
    diam = min(model.anchors.domain.diameter, model.modulus.domain_cap)
    return 1e-9 * max(model.constant * float(model.modulus(diam)), 1e-300)


def verify_sandwich(
    model: ExtensionModel, probes: np.ndarray, tol: float | None = None
) -> VerificationReport:
    """``|ext(x) - v_i| <= constant * theta(|x - x_i|)`` for every probe x
    against every anchor i."""
    if tol is None:
        tol = _default_verify_tol(model)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    ext = model(probes)
    pts, vals, m = model.anchors.points, model.anchors.values, model.constant
    worst, witness = -np.inf, (0, 0)
    for lo in range(0, len(probes), _PROBE_BLOCK):
        hi = min(lo + _PROBE_BLOCK, len(probes))
        dx = np.sqrt(np.sum((probes[lo:hi, None, :] - pts[None, :, :]) ** 2, axis=-1))
        slack = np.abs(ext[lo:hi, None] - vals[None, :]) - m * np.asarray(
            model.modulus(dx)
        )
        k = int(np.argmax(slack))
        if float(slack.flat[k]) > worst:
            worst = float(slack.flat[k])
            witness = (lo + k // len(pts), k % len(pts))
    return VerificationReport(
        check="sandwich",
        passed=worst <= tol,
        worst_violation=worst,
        witness=witness,
        tol=float(tol),
    )


def verify_modulus(
    model: ExtensionModel,
    probes_a: np.ndarray,
    probes_b: np.ndarray,
    tol: float | None = None,
) -> VerificationReport:
    """``|ext(x) - ext(y)| <= constant * theta(|x - y|)`` over probe pairs.

    ``max_ratio`` reports ``max |d ext| / (constant * theta(d))`` over pairs
    with positive distance — at or slightly above 1 means the extension
    saturates its own bound, the expected behavior.
    """
    if tol is None:
        tol = _default_verify_tol(model)
    a = np.atleast_2d(np.asarray(probes_a, dtype=float))
    b = np.atleast_2d(np.asarray(probes_b, dtype=float))
    if a.shape != b.shape:
        raise ValueError(f"probe arrays must match in shape, got {a.shape} vs {b.shape}")
    ea, eb = model(a), model(b)
    dx = np.sqrt(np.sum((a - b) ** 2, axis=-1))
    bound = model.constant * np.asarray(model.modulus(dx))
    dv = np.abs(ea - eb)
    slack = dv - bound
    k = int(np.argmax(slack))
    positive = bound > 0.0
    max_ratio = float(np.max(dv[positive] / bound[positive], initial=0.0))
    return VerificationReport(
        check="modulus",
        passed=float(slack[k]) <= tol,
        worst_violation=float(slack[k]),
        witness=(k,),
        tol=float(tol),
        max_ratio=max_ratio,
    )


def anchors_to_csv(anchors: AnchorSet, fh: IO[str] | str | Path) -> None:
    """Write anchors as CSV: coordinate columns then value; the domain is
    recorded in a leading comment line."""
    if isinstance(fh, (str, Path)):
        with open(fh, "w", newline="") as f:
            anchors_to_csv(anchors, f)
        return
    fh.write(
        "# domain: "
        + ";".join(f"{a!r},{b!r}" for a, b in anchors.domain.intervals)
        + "\n"
    )
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow([f"x{k}" for k in range(anchors.domain.dim)] + ["value"])
    for pt, v in zip(anchors.points, anchors.values):
        writer.writerow([repr(float(c)) for c in pt] + [repr(float(v))])


def anchors_from_csv(fh: IO[str] | str | Path, domain: BoxDomain | None = None) -> AnchorSet:
    """Read anchors written by :func:`anchors_to_csv`.

    ``domain`` overrides the recorded one; if neither is present, the tight
    bounding box of the points is used.
    """
    if isinstance(fh, (str, Path)):
        with open(fh, newline="") as f:
            return anchors_from_csv(f, domain=domain)
    lines = fh.read().splitlines()
    recorded = None
    data_lines = []
    for line in lines:
        if line.startswith("# domain:"):
            ivs = tuple(
                tuple(float(x) for x in part.split(","))
                for part in line.split(":", 1)[1].strip().split(";")
            )
            recorded = BoxDomain(intervals=ivs)
        elif line.strip() and not line.startswith("#"):
            data_lines.append(line)
    reader = csv.reader(data_lines)
    header = next(reader)
    dim = len(header) - 1
    rows = np.array([[float(x) for x in row] for row in reader])
    if rows.size == 0:
        raise ValueError("anchor CSV contains no data rows")
    pts, vals = rows[:, :dim], rows[:, dim]
    if domain is None:
        domain = recorded
    if domain is None:
        domain = BoxDomain(
            intervals=tuple(
                (float(pts[:, k].min()), float(pts[:, k].max())) for k in range(dim)
            )
        )
    return AnchorSet(points=pts, values=vals, domain=domain)
