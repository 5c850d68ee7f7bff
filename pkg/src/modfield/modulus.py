"""Moduli of continuity: standard families, evaluation, and axiom checking.

A modulus of continuity is a function ``theta: [0, cap] -> [0, inf)`` with
``theta(0) = 0`` that is continuous, nondecreasing, and subadditive
(``theta(s + t) <= theta(s) + theta(t)`` whenever ``s + t`` stays in the
domain).  Such functions calibrate oscillation: a field ``f`` is
theta-regular with constant ``C`` when ``|f(x) - f(y)| <= C * theta(|x - y|)``.
The power family ``t**alpha`` recovers the Hoelder scale.

Every family constructed through the factory functions here is concave with
``theta(0) = 0``, and concavity plus a zero at the origin implies
subadditivity, so factory-built moduli are valid by construction.
:func:`validate` exists for data that arrives from outside (piecewise knot
tables read from disk, hand-edited configs): it samples the axioms on a grid
and reports the worst violation with a witness instead of raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import ClassVar, Union

import numpy as np

__all__ = [
    "ModulusError",
    "PowerModulus",
    "PiecewiseModulus",
    "ScaledModulus",
    "Modulus",
    "power_modulus",
    "piecewise_modulus",
    "scaled_modulus",
    "modulus_from_dict",
    "ModulusValidationReport",
    "validate",
]


class ModulusError(ValueError):
    """Bad modulus parameters, or evaluation at an inadmissible argument."""


def _checked_arg(t, cap: float) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if arr.size and not np.all(np.isfinite(arr)):
        raise ModulusError("modulus argument must be finite")
    if arr.size and float(arr.min()) < 0.0:
        raise ModulusError(f"modulus argument must be nonnegative, got min {arr.min()}")
    # Arguments are distances, so anything beyond the cap (plus fp slack from
    # distance computations) indicates a caller bug rather than round-off.
    if arr.size and float(arr.max()) > cap * (1.0 + 1e-9) + 1e-300:
        raise ModulusError(
            f"modulus argument {arr.max()} exceeds domain cap {cap}"
        )
    return np.minimum(arr, cap)


class _ModulusBase:
    """Shared call protocol: scalar in, float out; array in, array out."""

    domain_cap: float

    def _eval(self, t: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def __call__(self, t):
        arr = _checked_arg(t, self.domain_cap)
        out = self._eval(arr)
        if isinstance(t, np.ndarray):
            return out
        return float(out)


@dataclass(frozen=True)
class PowerModulus(_ModulusBase):
    """``theta(t) = t**alpha`` with ``alpha`` in (0, 1]."""

    alpha: float
    domain_cap: float = 1.0
    family: ClassVar[str] = "power"

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0) or not math.isfinite(self.alpha):
            raise ModulusError(f"power exponent must lie in (0, 1], got {self.alpha}")
        if not (self.domain_cap > 0.0) or not math.isfinite(self.domain_cap):
            raise ModulusError(f"domain cap must be positive and finite, got {self.domain_cap}")

    def _eval(self, t: np.ndarray) -> np.ndarray:
        return np.power(t, self.alpha)

    def to_dict(self) -> dict:
        return {"family": "power", "alpha": self.alpha, "domain_cap": self.domain_cap}


@dataclass(frozen=True)
class PiecewiseModulus(_ModulusBase):
    """Piecewise-linear interpolant of knot pairs ``(t_i, v_i)``.

    Structural requirements (checked here): the first knot is ``(0, 0)``,
    abscissae strictly increase, values are finite and nondecreasing.
    Concavity — slopes nonincreasing, which is what actually guarantees
    subadditivity — is enforced by the :func:`piecewise_modulus` factory,
    not by the constructor, so that :func:`validate` can be exercised on
    non-concave knot data built directly.

    Beyond the last knot the final segment extends linearly up to
    ``domain_cap``.
    """

    knots: tuple[tuple[float, float], ...]
    domain_cap: float = 1.0
    family: ClassVar[str] = "piecewise"
    _ts: np.ndarray = field(init=False, repr=False, compare=False)
    _vs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        knots = tuple((float(t), float(v)) for t, v in self.knots)
        object.__setattr__(self, "knots", knots)
        if len(knots) < 2:
            raise ModulusError("piecewise modulus needs at least two knots")
        ts = np.array([t for t, _ in knots])
        vs = np.array([v for _, v in knots])
        if not (np.all(np.isfinite(ts)) and np.all(np.isfinite(vs))):
            raise ModulusError("piecewise knots must be finite")
        if ts[0] != 0.0 or vs[0] != 0.0:
            raise ModulusError(f"first knot must be (0, 0), got {knots[0]}")
        if np.any(np.diff(ts) <= 0.0):
            raise ModulusError("knot abscissae must be strictly increasing")
        if np.any(np.diff(vs) < 0.0):
            raise ModulusError("knot values must be nondecreasing")
        if not (self.domain_cap > 0.0) or not math.isfinite(self.domain_cap):
            raise ModulusError(f"domain cap must be positive and finite, got {self.domain_cap}")
        object.__setattr__(self, "_ts", ts)
        object.__setattr__(self, "_vs", vs)

    def _eval(self, t: np.ndarray) -> np.ndarray:
        ts, vs = self._ts, self._vs
        inside = np.interp(t, ts, vs)
        last_slope = (vs[-1] - vs[-2]) / (ts[-1] - ts[-2])
        beyond = vs[-1] + last_slope * (t - ts[-1])
        return np.where(t > ts[-1], beyond, inside)

    def to_dict(self) -> dict:
        return {
            "family": "piecewise",
            "knots": [[t, v] for t, v in self.knots],
            "domain_cap": self.domain_cap,
        }


@dataclass(frozen=True)
class ScaledModulus(_ModulusBase):
    """``theta(t) = scale * inner(t)`` — positive scaling preserves the axioms."""

    scale: float
    inner: Union["PowerModulus", "PiecewiseModulus", "ScaledModulus"]
    family: ClassVar[str] = "scaled"

    def __post_init__(self):
        if not (self.scale > 0.0) or not math.isfinite(self.scale):
            raise ModulusError(f"scale must be positive and finite, got {self.scale}")
        if not isinstance(self.inner, _ModulusBase):
            raise ModulusError(f"inner must be a modulus, got {type(self.inner).__name__}")

    @property
    def domain_cap(self) -> float:  # type: ignore[override]
        return self.inner.domain_cap

    def _eval(self, t: np.ndarray) -> np.ndarray:
        return self.scale * self.inner._eval(t)

    def to_dict(self) -> dict:
        return {"family": "scaled", "scale": self.scale, "inner": self.inner.to_dict()}


Modulus = Union[PowerModulus, PiecewiseModulus, ScaledModulus]


def power_modulus(alpha: float, domain_cap: float = 1.0) -> PowerModulus:
    """Hoelder modulus ``t**alpha``; concave on [0, cap] for alpha in (0, 1]."""
    return PowerModulus(alpha=float(alpha), domain_cap=float(domain_cap))


def piecewise_modulus(
    knots, domain_cap: float = 1.0, slope_tol: float = 1e-12
) -> PiecewiseModulus:
    """Concave piecewise-linear modulus through ``knots``.

    Rejects knot data whose segment slopes increase (beyond a relative
    tolerance of ``slope_tol`` on the larger slope): increasing slopes break
    concavity, and with it the constructive subadditivity guarantee.
    """
    mod = PiecewiseModulus(knots=tuple(tuple(k) for k in knots), domain_cap=float(domain_cap))
    ts, vs = mod._ts, mod._vs
    slopes = np.diff(vs) / np.diff(ts)
    for i in range(len(slopes) - 1):
        allow = slope_tol * max(abs(slopes[i]), abs(slopes[i + 1]), 1.0)
        if slopes[i + 1] > slopes[i] + allow:
            raise ModulusError(
                "knots are not concave: slope increases from "
                f"{slopes[i]:.6g} to {slopes[i + 1]:.6g} at knot t={ts[i + 1]:.6g}"
            )
    return mod


def scaled_modulus(scale: float, inner: Modulus) -> ScaledModulus:
    """Rescale an existing modulus by a positive constant."""
    return ScaledModulus(scale=float(scale), inner=inner)


def modulus_from_dict(data: dict, strict: bool = True) -> Modulus:
    """Inverse of ``to_dict``; raises :class:`ModulusError` on unknown families.

    With ``strict=True`` piecewise data re-enters through the
    concavity-checking factory, so a hand-edited knot table that lost
    concavity is rejected at load time.  ``strict=False`` skips that check
    (structural checks still apply) so that :func:`validate` can examine and
    report on suspect data instead.
    """
    if not isinstance(data, dict) or "family" not in data:
        raise ModulusError("modulus dict needs a 'family' key")
    family = data["family"]
    try:
        if family == "power":
            return power_modulus(data["alpha"], data.get("domain_cap", 1.0))
        if family == "piecewise":
            if strict:
                return piecewise_modulus(data["knots"], data.get("domain_cap", 1.0))
            return PiecewiseModulus(
                knots=tuple(tuple(k) for k in data["knots"]),
                domain_cap=float(data.get("domain_cap", 1.0)),
            )
        if family == "scaled":
            return scaled_modulus(
                data["scale"], modulus_from_dict(data["inner"], strict=strict)
            )
    except KeyError as exc:
        raise ModulusError(f"modulus dict missing key {exc}") from None
    raise ModulusError(f"unknown modulus family {family!r}")


@dataclass(frozen=True)
class ModulusValidationReport:
    """Sampled axiom check: worst violations and where they occurred.

    ``worst_monotonicity`` is the largest drop ``theta(s) - theta(t)`` over
    sampled ``s < t`` (positive means theta decreased); ``worst_subadditivity``
    is the largest excess ``theta(s + t) - theta(s) - theta(t)`` over sampled
    pairs with ``s + t`` inside the domain.  Both are clamped below at 0 when
    no violation exists.  Witnesses are the attaining pairs ``(s, t)``.
    """

    passed: bool
    samples: int
    tol: float
    worst_monotonicity: float
    monotonicity_witness: tuple[float, float]
    n_monotonicity_violations: int
    worst_subadditivity: float
    subadditivity_witness: tuple[float, float]
    n_subadditivity_violations: int
    origin_value: float

    def to_dict(self) -> dict:
        return {
            "check": "modulus-axioms",
            "pass": self.passed,
            "samples": self.samples,
            "tol": self.tol,
            "worst_monotonicity": self.worst_monotonicity,
            "monotonicity_witness": list(self.monotonicity_witness),
            "n_monotonicity_violations": self.n_monotonicity_violations,
            "worst_subadditivity": self.worst_subadditivity,
            "subadditivity_witness": list(self.subadditivity_witness),
            "n_subadditivity_violations": self.n_subadditivity_violations,
            "origin_value": self.origin_value,
        }


@lru_cache(maxsize=4)
def _upper_pairs(samples: int) -> tuple[np.ndarray, np.ndarray]:
    iu, ju = np.triu_indices(samples)
    iu.setflags(write=False)
    ju.setflags(write=False)
    return iu, ju


def validate(
    modulus: Modulus, samples: int = 1024, tol: float | None = None
) -> ModulusValidationReport:
    """Sample the modulus axioms on an even grid over ``[0, domain_cap]``.

    Checks ``theta(0) == 0``, monotonicity over all sampled pairs, and
    subadditivity ``theta(s + t) <= theta(s) + theta(t)`` over all sampled
    pairs whose sum stays within the cap.  ``tol`` defaults to
    ``1e-12 * theta(domain_cap)``.  Reporting, not raising: invalid input
    data yields a failed report with the worst witness.
    """
    if samples < 3:
        raise ValueError(f"need at least 3 samples, got {samples}")
    cap = modulus.domain_cap
    ts = np.linspace(0.0, cap, samples)
    vals = np.asarray(modulus(ts))
    if tol is None:
        tol = 1e-12 * abs(float(vals[-1]))

    origin = float(vals[0])

    # Monotonicity: the worst pair (s, t), s < t, maximizing theta(s) - theta(t)
    # always takes s at the running prefix argmax, so a linear scan is exact.
    prefix_max = np.maximum.accumulate(vals)
    drops = prefix_max[:-1] - vals[1:]
    j = int(np.argmax(drops))
    worst_mono = float(drops[j])
    i = int(np.argmax(vals[: j + 1]))
    mono_witness = (float(ts[i]), float(ts[j + 1]))
    n_mono = int(np.count_nonzero(drops > tol))

    # Subadditivity over all sampled pairs with s + t in range (s <= t suffices
    # by symmetry).  theta(s) and theta(t) are grid lookups; only theta(s + t)
    # needs fresh evaluation.
    iu, ju = _upper_pairs(samples)
    keep = ts[iu] + ts[ju] <= cap * (1.0 + 1e-15)
    iu, ju = iu[keep], ju[keep]
    s, t = ts[iu], ts[ju]
    excess = np.asarray(modulus(s + t)) - vals[iu] - vals[ju]
    k = int(np.argmax(excess))
    worst_sub = float(excess[k])
    sub_witness = (float(s[k]), float(t[k]))
    n_sub = int(np.count_nonzero(excess > tol))

    passed = (
        abs(origin) <= tol
        and worst_mono <= tol
        and worst_sub <= tol
    )
    return ModulusValidationReport(
        passed=passed,
        samples=samples,
        tol=float(tol),
        worst_monotonicity=max(worst_mono, 0.0),
        monotonicity_witness=mono_witness,
        n_monotonicity_violations=n_mono,
        worst_subadditivity=max(worst_sub, 0.0),
        subadditivity_witness=sub_witness,
        n_subadditivity_violations=n_sub,
        origin_value=origin,
    )
