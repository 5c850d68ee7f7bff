"""Random-field martingales from basis series with independent coefficients.

Partial sums ``S_n(x) = sum_{k<=n} z_k * phi_k(x)`` of independent,
mean-zero, unit-variance coefficients against a fixed basis form a
martingale in ``n`` by construction (each increment ``z_{n+1} * phi_{n+1}``
is independent of the past with mean zero), so no conditional-expectation
estimation is ever involved; :func:`martingale_check` tests the defining
orthogonality on simulated increments instead.

Two bases:

* ``"faber_schauder"`` — triangular hat functions on dyadic levels.  Term
  ``k >= 1`` lives on level ``j = floor(log2 k)`` at in-level position
  ``i = k - 2**j`` (zero-based), supported on ``[i / 2**j, (i + 1) / 2**j]``
  in normalized coordinates and peaking at height ``scale_j / 2`` mid-cell.
  With ``scale_j = 2**(-j * holder)`` the paths have Hoelder-type roughness
  controlled by ``holder``; ``holder = 0.5`` gives the classical
  Brownian-motion construction.
* ``"trig_smooth"`` — ``phi_k(x) = k**(-p) * sin(k * w * (x - a))`` with
  ``w = pi / (b - a)``.  Derivatives are available in closed form
  (each differentiation multiplies by ``k * w`` and advances the phase by
  ``pi / 2``), so jets of partial sums are exact.  Decay ``p`` at least
  ``smooth_order + 3`` keeps the ``(smooth_order + 1)``-th derivative series
  summable with room for a Hoelder-type envelope.

All randomness is counter-based: coefficient ``k`` of a path is the k-th
element of the Philox stream keyed by the path seed, so a coefficient's
value depends only on ``(seed, k)`` — never on batch size, evaluation
order, or scheduling.  :func:`coefficient` reproduces any single element
by counter arithmetic, which the tests pin down against batch draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtri

from .field_core import BoxDomain, FieldSample, Grid, SmoothFieldSample
from .modulus import Modulus, PiecewiseModulus, PowerModulus, ScaledModulus

__all__ = [
    "BasisCapabilityError",
    "EnvelopeDivergenceError",
    "SeriesSpec",
    "PathHandle",
    "draw_path",
    "coefficient",
    "partial_sum",
    "partial_sum_jets",
    "term_bound",
    "term_bound_smooth",
    "per_path_bound",
    "envelope_bound",
    "GStatistic",
    "MartingaleCheckReport",
    "martingale_check",
]

_BASES = ("faber_schauder", "trig_smooth")
_LAWS = ("gaussian", "rademacher", "uniform_symmetric")

# E|Z| for each unit-variance law: folded normal, signs, and uniform on
# [-sqrt(3), sqrt(3)].
_ABS_MEAN = {
    "gaussian": math.sqrt(2.0 / math.pi),
    "rademacher": 1.0,
    "uniform_symmetric": math.sqrt(3.0) / 2.0,
}

_KEY_MASK = (1 << 128) - 1


class BasisCapabilityError(ValueError):
    """The requested operation needs structure this basis does not provide."""


class EnvelopeDivergenceError(ValueError):
    """The envelope series fails its summability condition; no certificate."""


@dataclass(frozen=True)
class SeriesSpec:
    """Static description of one coefficient series.

    ``p`` (decay exponent) and ``smooth_order`` apply to the trig basis;
    ``holder`` or explicit ``level_scales`` (exactly one) apply to the hat
    basis.  ``domain`` must be one-dimensional.
    """

    basis: str
    law: str
    n_max: int
    domain: BoxDomain
    p: float | None = None
    smooth_order: int = 0
    holder: float | None = None
    level_scales: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.basis not in _BASES:
            raise ValueError(f"basis must be one of {_BASES}, got {self.basis!r}")
        if self.law not in _LAWS:
            raise ValueError(f"law must be one of {_LAWS}, got {self.law!r}")
        if not isinstance(self.n_max, int) or self.n_max < 1:
            raise ValueError(f"n_max must be a positive integer, got {self.n_max}")
        if self.domain.dim != 1:
            raise ValueError("series fields are one-dimensional")
        if self.basis == "trig_smooth":
            if self.holder is not None or self.level_scales is not None:
                raise ValueError("holder/level_scales apply to the hat basis only")
            if self.p is None:
                raise ValueError("trig basis needs a decay exponent p")
            if not (math.isfinite(self.p) and self.p > 1.0):
                raise ValueError(f"decay exponent must be finite and > 1, got {self.p}")
            if not isinstance(self.smooth_order, int) or self.smooth_order < 0:
                raise ValueError(f"smooth_order must be >= 0, got {self.smooth_order}")
            if self.p < self.smooth_order + 3:
                raise ValueError(
                    f"decay p={self.p} too slow for smooth_order="
                    f"{self.smooth_order}; need p >= smooth_order + 3"
                )
        else:
            if self.p is not None:
                raise ValueError("decay exponent p applies to the trig basis only")
            if self.smooth_order != 0:
                raise BasisCapabilityError(
                    "hat-basis paths are not differentiable; smooth_order must be 0"
                )
            if (self.holder is None) == (self.level_scales is None):
                raise ValueError("hat basis needs exactly one of holder or level_scales")
            if self.holder is not None and not (0.0 < self.holder <= 1.0):
                raise ValueError(f"holder must lie in (0, 1], got {self.holder}")
            if self.level_scales is not None:
                scales = tuple(float(s) for s in self.level_scales)
                object.__setattr__(self, "level_scales", scales)
                if any(not (math.isfinite(s) and s > 0.0) for s in scales):
                    raise ValueError("level scales must be positive and finite")
                if len(scales) < self._levels_needed(self.n_max):
                    raise ValueError(
                        f"n_max={self.n_max} spans {self._levels_needed(self.n_max)} "
                        f"levels but only {len(scales)} scales were given"
                    )

    @staticmethod
    def _levels_needed(n: int) -> int:
        return n.bit_length()

    def level_scale(self, j: int) -> float:
        """Peak-height multiplier for hat level ``j``."""
        if self.basis != "faber_schauder":
            raise BasisCapabilityError("levels are a hat-basis notion")
        if self.holder is not None:
            return 2.0 ** (-j * self.holder)
        return self.level_scales[j]

    def to_dict(self) -> dict:
        d = {
            "basis": self.basis,
            "law": self.law,
            "n_max": self.n_max,
            "domain": [self.domain.intervals[0][0], self.domain.intervals[0][1]],
        }
        if self.basis == "trig_smooth":
            d["p"] = self.p
            d["m"] = self.smooth_order
        elif self.holder is not None:
            d["holder"] = self.holder
        else:
            d["level_scales"] = list(self.level_scales)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SeriesSpec":
        a, b = data["domain"]
        kwargs = dict(
            basis=data["basis"],
            law=data["law"],
            n_max=int(data["n_max"]),
            domain=BoxDomain(intervals=((float(a), float(b)),)),
        )
        if "p" in data and data["p"] is not None:
            kwargs["p"] = float(data["p"])
        if "m" in data and data["m"] is not None:
            kwargs["smooth_order"] = int(data["m"])
        if "holder" in data and data["holder"] is not None:
            kwargs["holder"] = float(data["holder"])
        if "level_scales" in data and data["level_scales"] is not None:
            kwargs["level_scales"] = tuple(data["level_scales"])
        return cls(**kwargs)


# --------------------------------------------------------------------------
# Counter-based coefficient streams


def _uniform_stream(seed: int, n: int) -> np.ndarray:
    """First ``n`` uniforms of the Philox stream keyed by ``seed``."""
    bitgen = np.random.Philox(key=seed & _KEY_MASK)
    return np.random.Generator(bitgen).random(n)


def _transform(law: str, u: np.ndarray) -> np.ndarray:
    if law == "gaussian":
        # Center each 53-bit uniform half a step into the open interval and
        # invert the normal CDF.  Evaluated from the nearer edge: near 1 the
        # centered value u + 2^-54 rounds to exactly 1.0 in doubles (inf),
        # while the reflected distance (1 - u) - 2^-54 stays representable.
        # The reflection also makes the map exactly antisymmetric.
        lower = u < 0.5
        edge_gap = np.where(lower, u, 1.0 - u) + np.where(lower, 2.0**-54, -(2.0**-54))
        mag = ndtri(edge_gap)  # argument in (0, 0.5) -> finite, negative
        return np.where(lower, mag, -mag)
    if law == "rademacher":
        return np.where(u < 0.5, -1.0, 1.0)
    return (2.0 * u - 1.0) * math.sqrt(3.0)


@dataclass(frozen=True, eq=False)
class PathHandle:
    """One realized path: spec, seed, and the drawn coefficient block."""

    spec: SeriesSpec
    seed: int
    coefficients: np.ndarray

    def __post_init__(self):
        coeff = np.array(self.coefficients, dtype=float)
        if coeff.shape != (self.spec.n_max,):
            raise ValueError(
                f"coefficients must have shape ({self.spec.n_max},), got {coeff.shape}"
            )
        coeff.setflags(write=False)
        object.__setattr__(self, "coefficients", coeff)


def draw_path(spec: SeriesSpec, seed: int) -> PathHandle:
    """Draw all ``n_max`` coefficients for ``(spec, seed)``.

    Deterministic in ``(spec.law, spec.n_max, seed)`` alone.
    """
    u = _uniform_stream(seed, spec.n_max)
    return PathHandle(spec=spec, seed=seed, coefficients=_transform(spec.law, u))


def coefficient(spec: SeriesSpec, seed: int, k: int) -> float:
    """Coefficient ``k`` (1-based) alone, via counter arithmetic.

    Philox advances in blocks of four 64-bit words, so element ``k - 1`` of
    the stream is reached by advancing ``(k - 1) // 4`` blocks and drawing
    ``(k - 1) % 4 + 1`` doubles.  Bit-identical to ``draw_path``'s element.
    """
    if not 1 <= k <= spec.n_max:
        raise ValueError(f"coefficient index {k} outside 1..{spec.n_max}")
    bitgen = np.random.Philox(key=seed & _KEY_MASK)
    bitgen.advance((k - 1) // 4)
    u = np.random.Generator(bitgen).random((k - 1) % 4 + 1)[-1]
    return float(_transform(spec.law, np.array([u]))[0])


# --------------------------------------------------------------------------
# Basis evaluation


def _normalized(spec: SeriesSpec, x: np.ndarray) -> np.ndarray:
    a, b = spec.domain.intervals[0]
    return (x - a) / (b - a)


def _hat_level_values(level: int, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """For each normalized coordinate: the in-level hat index holding it and
    the unit hat value there.  Level-``j`` hats have disjoint supports, so a
    point sees exactly one hat per level."""
    cells = 1 << level
    idx = np.clip(np.floor(u * cells).astype(int), 0, cells - 1)
    s = u * cells - idx
    tent = np.maximum(0.5 - np.abs(s - 0.5), 0.0)
    return idx, tent


def _hat_partial(
    spec: SeriesSpec, coeff: np.ndarray, n: int, x: np.ndarray
) -> np.ndarray:
    u = _normalized(spec, x)
    out = np.zeros_like(u)
    if n == 0:
        return out
    top = n.bit_length() - 1
    for j in range(top + 1):
        idx, tent = _hat_level_values(j, u)
        k = (1 << j) + idx  # 1-based series index of the covering hat
        active = k <= n
        amp = np.where(active, coeff[np.minimum(k, n) - 1], 0.0)
        out += spec.level_scale(j) * amp * tent
    return out


def _trig_partial(
    spec: SeriesSpec, coeff: np.ndarray, n: int, x: np.ndarray, deriv: int
) -> np.ndarray:
    if n == 0:
        return np.zeros_like(x)
    a, b = spec.domain.intervals[0]
    w = math.pi / (b - a)
    ks = np.arange(1, n + 1, dtype=float)
    amps = coeff[:n] * np.power(ks, -spec.p) * np.power(ks * w, deriv)
    phase = deriv * math.pi / 2.0
    terms = amps[:, None] * np.sin(ks[:, None] * w * (x - a)[None, :] + phase)
    return terms.sum(axis=0)


def partial_sum(path: PathHandle, n: int, grid: Grid) -> FieldSample:
    """``S_n`` sampled on the grid; ``n = 0`` is the zero field."""
    spec = path.spec
    if not 0 <= n <= spec.n_max:
        raise ValueError(f"partial-sum order {n} outside 0..{spec.n_max}")
    if grid.domain.dim != 1:
        raise ValueError("series fields are one-dimensional")
    x = grid.points[:, 0]
    if spec.basis == "faber_schauder":
        vals = _hat_partial(spec, path.coefficients, n, x)
    else:
        vals = _trig_partial(spec, path.coefficients, n, x, deriv=0)
    return FieldSample(grid=grid, values=vals, label=f"n={n}")


def partial_sum_jets(
    path: PathHandle, n: int, grid: Grid, order: int
) -> SmoothFieldSample:
    """``S_n`` with derivatives ``0 .. order + 1``, exact in closed form.

    Trig basis only: hat paths have no derivatives to offer.
    """
    spec = path.spec
    if spec.basis != "trig_smooth":
        raise BasisCapabilityError(
            f"jets need the trig basis, not {spec.basis!r}"
        )
    if not 0 <= order <= spec.smooth_order:
        raise ValueError(
            f"jet order {order} exceeds the series smooth_order {spec.smooth_order}"
        )
    if not 0 <= n <= spec.n_max:
        raise ValueError(f"partial-sum order {n} outside 0..{spec.n_max}")
    x = grid.points[:, 0]
    jets = np.stack(
        [
            _trig_partial(spec, path.coefficients, n, x, deriv=l)
            for l in range(order + 2)
        ]
    )
    return SmoothFieldSample(grid=grid, jets=jets, label=f"n={n}")


# --------------------------------------------------------------------------
# Deterministic envelopes


def _alpha_floor(modulus: Modulus) -> float:
    """Exponent ``alpha`` with ``theta(t) >= theta(cap) * (t / cap)**alpha``
    near 0 — exact for powers, 1 for any other concave modulus (chord bound)."""
    inner = modulus
    while isinstance(inner, ScaledModulus):
        inner = inner.inner
    if isinstance(inner, PowerModulus):
        return inner.alpha
    return 1.0


def _osc_over_theta(sup_amp, lip, diam: float, modulus: Modulus):
    """Upper bound for ``sup_{0 < t <= diam} min(2 * sup_amp, lip * t) / theta(t)``.

    For concave theta with theta(0) = 0 the ratio ``theta(t) / t`` is
    nonincreasing, so the supremum sits at the kink ``t* = 2 sup_amp / lip``
    (or at ``diam`` if the kink lies beyond it).  Vectorized over term arrays.
    """
    sup_amp = np.asarray(sup_amp, dtype=float)
    lip = np.asarray(lip, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        kink = np.where(lip > 0.0, 2.0 * sup_amp / np.maximum(lip, 1e-300), np.inf)
    t_star = np.minimum(diam, kink)
    theta = np.asarray(modulus(t_star))
    num = np.minimum(2.0 * sup_amp, lip * diam)
    out = np.where((sup_amp > 0.0) & (t_star > 0.0), num / np.maximum(theta, 1e-300), 0.0)
    return out


def term_bound(spec: SeriesSpec, k: int, modulus: Modulus) -> float:
    """Deterministic bound on ``sup |phi_k| + theta-seminorm(phi_k)``.

    Sound for concave moduli (all factory-built ones).  Multiplying by
    ``|z_k|`` and summing bounds the plain Hoelder functional of any partial
    sum - see :func:`per_path_bound`.
    """
    if not 1 <= k <= spec.n_max:
        raise ValueError(f"term index {k} outside 1..{spec.n_max}")
    a, b = spec.domain.intervals[0]
    width = b - a
    diam = min(width, modulus.domain_cap)
    if spec.basis == "faber_schauder":
        j = k.bit_length() - 1
        scale = spec.level_scale(j)
        sup = scale / 2.0
        lip = scale * (1 << j) / width
    else:
        w = math.pi / width
        sup = k ** (-spec.p)
        lip = sup * k * w
    return float(sup + _osc_over_theta(sup, lip, diam, modulus))


def term_bound_smooth(spec: SeriesSpec, k: int, modulus: Modulus, order: int) -> float:
    """Deterministic bound on the smooth functional of one trig term:
    ``sum_{l<=order+1} sup |phi_k^(l)|`` plus the theta-seminorm of the
    ``(order+1)``-th derivative.  Triangle inequality then bounds any
    coefficient block: ``functional(sum z_k phi_k) <= sum |z_k| * bound_k``.
    """
    if spec.basis != "trig_smooth":
        raise BasisCapabilityError("smooth term bounds need the trig basis")
    if not 1 <= k <= spec.n_max:
        raise ValueError(f"term index {k} outside 1..{spec.n_max}")
    if not 0 <= order <= spec.smooth_order:
        raise ValueError(f"order {order} exceeds the series smooth_order {spec.smooth_order}")
    a, b = spec.domain.intervals[0]
    width = b - a
    diam = min(width, modulus.domain_cap)
    w = math.pi / width
    ck = k ** (-spec.p)
    sups = sum(ck * (k * w) ** l for l in range(order + 2))
    top_sup = ck * (k * w) ** (order + 1)
    top_lip = ck * (k * w) ** (order + 2)
    return float(sups + _osc_over_theta(top_sup, top_lip, diam, modulus))


def per_path_bound(path: PathHandle, n: int, modulus: Modulus) -> float:
    """``sum_{k<=n} |z_k| * term_bound(k)`` — a deterministic per-path bound
    on the plain Hoelder functional of ``S_n``, any n."""
    if not 0 <= n <= path.spec.n_max:
        raise ValueError(f"order {n} outside 0..{path.spec.n_max}")
    bounds = np.array([term_bound(path.spec, k, modulus) for k in range(1, n + 1)])
    return float(np.sum(np.abs(path.coefficients[:n]) * bounds))


def _max_abs_mean(law: str, count: int) -> float:
    """Upper bound on ``E max_{i<=count} |Z_i|`` for iid unit-variance laws.

    Gaussian: the standard ``sqrt(2 log(2 count))`` bound from the mgf
    argument.  Bounded laws: their almost-sure bound.
    """
    if law == "gaussian":
        return math.sqrt(2.0 * math.log(2.0 * count))
    if law == "rademacher":
        return 1.0
    return math.sqrt(3.0)


def envelope_bound(spec: SeriesSpec, modulus: Modulus, order: int = 0) -> float:
    """Certified bound on ``sup_n E[ functional(S_n) ]``.

    * Hat basis (``order`` must be 0): bounds the plain Hoelder functional
      ``sup + seminorm``.  Levels are summed exactly while the per-level
      bound keeps decaying; the remainder is dominated by a geometric series
      whose ratio must stay below 1, otherwise
      :class:`EnvelopeDivergenceError` — with ``scale_j = 2**(-j * holder)``
      this happens exactly when the modulus decays no slower than the paths
      (e.g. ``theta = t**alpha`` with ``alpha >= holder``).
    * Trig basis: bounds the smooth functional — C^{order+1} norm plus the
      theta-seminorm of the (order+1)-th derivative.  Leading terms are
      summed exactly; the tail is integral-compared, requiring the tail
      exponent ``order + 1 + alpha - p`` below -1.

    Both routes are conservative upper bounds, not estimates.
    """
    a, b = spec.domain.intervals[0]
    width = b - a
    diam = min(width, modulus.domain_cap)
    abs_mean = _ABS_MEAN[spec.law]

    if spec.basis == "faber_schauder":
        if order != 0:
            raise BasisCapabilityError("hat-basis envelope exists for order 0 only")

        def level_bound(j: int) -> float:
            # Level-j hats have disjoint supports, so the level contributes
            # at most E[max |Z| over its 2**j terms] times one per-term bound.
            scale = spec.level_scale(j)
            sup = scale / 2.0
            lip = scale * (1 << j) / width
            per_term = sup + float(_osc_over_theta(sup, lip, diam, modulus))
            return _max_abs_mean(spec.law, 1 << j) * per_term

        if spec.level_scales is not None:
            # Explicit scales cover finitely many levels; the series is finite.
            return float(sum(level_bound(j) for j in range(SeriesSpec._levels_needed(spec.n_max))))

        # Geometric scales: sum the first levels exactly, then dominate the
        # remainder by a geometric series.  Consecutive per-level bounds
        # grow by at most 2**(alpha - holder) (sup part: 2**-holder; kink
        # part: theta(t) <= 2 theta(t/2) by subadditivity — alpha sharpens
        # this for power moduli) times the slowly-shrinking sqrt(level)
        # factor, so that product at the cutoff bounds every later ratio.
        j_exact = 60
        alpha = _alpha_floor(modulus)
        r_safe = 2.0 ** (alpha - spec.holder) * math.sqrt(
            (j_exact + 2.0) / (j_exact + 1.0)
        )
        if not r_safe < 1.0 - 1e-9:
            raise EnvelopeDivergenceError(
                f"per-level bounds need not decay (geometric ratio {r_safe:.6f} "
                f"for modulus exponent {alpha} against path roughness "
                f"{spec.holder}); the envelope series diverges"
            )
        bounds = [level_bound(j) for j in range(j_exact + 2)]
        head = float(sum(bounds[: j_exact + 1]))
        return head + float(bounds[j_exact + 1] / (1.0 - r_safe))

    # Trig basis: exact head, integral-test tail on power envelopes.
    m1 = order + 1
    if order > spec.smooth_order:
        raise ValueError(
            f"order {order} exceeds the series smooth_order {spec.smooth_order}"
        )
    w = math.pi / width
    alpha = _alpha_floor(modulus)
    k_head = max(spec.n_max, 64)
    ks = np.arange(1, k_head + 1, dtype=float)
    ck = np.power(ks, -spec.p)
    sup_part = np.zeros_like(ks)
    for l in range(m1 + 1):
        sup_part += ck * np.power(ks * w, l)
    top_sup = ck * np.power(ks * w, m1)
    top_lip = ck * np.power(ks * w, m1 + 1)
    sem_part = _osc_over_theta(top_sup, top_lip, diam, modulus)
    head = abs_mean * float(np.sum(sup_part + sem_part))

    # Tail: every addend is a power of k.  Sup parts contribute exponents
    # l - p (l <= m1).  The seminorm part is bounded by
    # 2 S (L / 2 S)^alpha / floor_coef when the kink is inside the domain,
    # a power with exponent m1 + alpha - p; the chord floor
    # theta(t) >= theta(diam) (t/diam)^alpha makes the constant explicit.
    theta_diam = float(modulus(diam))
    powers: list[tuple[float, float]] = []
    for l in range(m1 + 1):
        powers.append((w**l, float(l) - spec.p))
    kink_coef = (
        2.0 ** (1.0 - alpha)
        * w ** (m1 + alpha)
        * diam**alpha
        / theta_diam
    )
    powers.append((kink_coef, m1 + alpha - spec.p))
    # Terms whose kink exceeds diam use the linear branch L * diam / theta(diam);
    # only finitely many k do, and all lie inside the exact head when
    # 2 / (k w) <= diam for k > k_head; otherwise include the branch too.
    if 2.0 / ((k_head + 1) * w) > diam:
        powers.append((w ** (m1 + 1) * diam / theta_diam, m1 + 1.0 - spec.p))
    tail = 0.0
    for coef, expo in powers:
        if expo >= -1.0:
            raise EnvelopeDivergenceError(
                f"tail exponent {expo:.3f} >= -1 (decay p={spec.p}, "
                f"derivative order {m1}, modulus floor alpha={alpha}); "
                "the envelope series diverges"
            )
        # sum_{k > K} k^expo <= K^(expo+1) / (-1 - expo) by integral comparison
        tail += coef * k_head ** (expo + 1.0) / (-1.0 - expo)
    return head + abs_mean * tail


# --------------------------------------------------------------------------
# Martingale property check


@dataclass(frozen=True)
class GStatistic:
    """One orthogonality statistic: mean of ``increment * g(current)``."""

    name: str
    mean: float
    std_error: float
    z_score: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "g": self.name,
            "mean": self.mean,
            "std_error": self.std_error,
            "z_score": self.z_score,
            "pass": self.passed,
        }


@dataclass(frozen=True)
class MartingaleCheckReport:
    """Martingale orthogonality at one (n, x): E[(S_{n+1} - S_n) g(S_n)] = 0.

    Tested against zero at four standard errors for g in {1, identity,
    sign}.  ``passed`` is the conjunction.  Degenerate cases (zero standard
    error) pass only with an exactly zero mean.
    """

    n: int
    x: float
    trials: int
    seed: int
    statistics: tuple[GStatistic, ...]
    passed: bool

    def to_dict(self) -> dict:
        return {
            "check": "martingale-orthogonality",
            "n": self.n,
            "x": self.x,
            "trials": self.trials,
            "seed": self.seed,
            "statistics": [s.to_dict() for s in self.statistics],
            "pass": self.passed,
        }


def _basis_values_at(spec: SeriesSpec, n_terms: int, x: float) -> np.ndarray:
    """``phi_1(x) .. phi_{n_terms}(x)`` as a vector."""
    xs = np.array([x])
    out = np.empty(n_terms)
    if spec.basis == "trig_smooth":
        a, _ = spec.domain.intervals[0]
        w = math.pi / (spec.domain.intervals[0][1] - a)
        ks = np.arange(1, n_terms + 1, dtype=float)
        out[:] = np.power(ks, -spec.p) * np.sin(ks * w * (x - a))
    else:
        u = _normalized(spec, xs)
        out[:] = 0.0
        top = n_terms.bit_length() - 1
        for j in range(top + 1):
            idx, tent = _hat_level_values(j, u)
            k = (1 << j) + int(idx[0])
            if k <= n_terms:
                out[k - 1] = spec.level_scale(j) * float(tent[0])
    return out


def martingale_check(
    spec: SeriesSpec,
    n: int,
    x: float,
    trials: int,
    seed: int,
    increment_shift: float = 0.0,
) -> MartingaleCheckReport:
    """Simulate ``trials`` independent paths (seeds ``seed + t``) and test
    ``mean[(S_{n+1}(x) - S_n(x)) * g(S_n(x))]`` against zero at four standard
    errors, for g in {1, identity, sign}.

    ``increment_shift`` adds a deterministic drift to every increment — the
    designed negative control; leave it at 0 for the real check.
    """
    if trials < 100:
        raise ValueError(f"need at least 100 trials for a stable check, got {trials}")
    if not 0 <= n < spec.n_max:
        raise ValueError(f"n must satisfy 0 <= n < n_max={spec.n_max}, got {n}")
    a, b = spec.domain.intervals[0]
    if not a <= x <= b:
        raise ValueError(f"evaluation point {x} outside the domain [{a}, {b}]")

    phi = _basis_values_at(spec, n + 1, x)
    z = np.empty((trials, n + 1))
    for t in range(trials):
        z[t] = _transform(spec.law, _uniform_stream(seed + t, n + 1))

    current = (z[:, :n] * phi[None, :n]).sum(axis=1) if n else np.zeros(trials)
    increment = z[:, n] * phi[n] + increment_shift

    stats = []
    for name, g in (("one", np.ones(trials)), ("identity", current), ("sign", np.sign(current))):
        w = increment * g
        mean = float(np.mean(w))
        se = float(np.std(w, ddof=1) / math.sqrt(trials))
        if se == 0.0:
            passed = mean == 0.0
            zsc = 0.0 if passed else math.inf
        else:
            zsc = mean / se
            passed = abs(mean) <= 4.0 * se
        stats.append(
            GStatistic(name=name, mean=mean, std_error=se, z_score=float(zsc), passed=passed)
        )
    return MartingaleCheckReport(
        n=n,
        x=float(x),
        trials=trials,
        seed=seed,
        statistics=tuple(stats),
        passed=all(s.passed for s in stats),
    )
