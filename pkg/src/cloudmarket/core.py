"""Shared domain types and consumer-side contract evaluation.

Units are fixed across the package: time in minutes, money in cents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.stats import norm

INF = math.inf
DEFAULT_GRID_STEP = 0.1
MASS_TOL = 1e-9


class DimensionError(ValueError):
    """Raised when vectors or schedules disagree on the number of intervals."""


def _check_targets(targets: Sequence[float]) -> tuple[float, ...]:
    targets = tuple(float(x) for x in targets)
    if len(targets) < 2:
        raise ValueError("need at least two target times (tau_0 = 0 and tau_n = inf)")
    if targets[0] != 0.0:
        raise ValueError(f"first target must be 0, got {targets[0]}")
    if targets[-1] != INF:
        raise ValueError(f"last target must be +inf, got {targets[-1]}")
    if any(b <= a for a, b in zip(targets, targets[1:])):
        raise ValueError(f"targets must be strictly increasing: {targets}")
    return targets


def interval_index(targets: Sequence[float], t: float) -> int:
    """Index i of the half-open interval [targets[i], targets[i+1]) holding t."""
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    # bisect_right keeps boundary times in the later interval
    idx = int(np.searchsorted(targets, t, side="right")) - 1
    return min(idx, len(targets) - 2)


@dataclass(frozen=True)
class UtilityPiece:
    """One linear piece ``kappa - a*t - b*price``."""

    kappa: float = 0.0
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValueError(f"utility slopes must be nonnegative, got a={self.a}, b={self.b}")

    def __call__(self, t, price):
        return self.kappa - self.a * t - self.b * price


@dataclass(frozen=True)
class PiecewiseUtility:
    """Consumer preference over (completion time, price).

    ``targets`` holds tau_0 = 0 < tau_1 < ... < tau_n = inf and ``pieces[i]``
    applies on ``[targets[i], targets[i+1])``.
    """

    targets: tuple[float, ...]
    pieces: tuple[UtilityPiece, ...]

    def __post_init__(self):
        object.__setattr__(self, "targets", _check_targets(self.targets))
        pieces = tuple(p if isinstance(p, UtilityPiece) else UtilityPiece(*p) for p in self.pieces)
        object.__setattr__(self, "pieces", pieces)
        if len(pieces) != len(self.targets) - 1:
            raise DimensionError(
                f"{len(self.targets)} targets need {len(self.targets) - 1} pieces, got {len(pieces)}"
            )

    @classmethod
    def linear(cls, alpha: float, beta: float, targets: Sequence[float] = (0.0, INF)) -> PiecewiseUtility:
        """``U = -alpha*t - beta*price`` repeated over every interval of ``targets``."""
        n = len(targets) - 1
        return cls(tuple(targets), tuple(UtilityPiece(0.0, alpha, beta) for _ in range(n)))

    @property
    def n_intervals(self) -> int:
        return len(self.pieces)

    def linear_coefficients(self) -> tuple[float, float, float] | None:
        """(kappa, alpha, beta) if every interval uses the same piece, else None."""
        first = self.pieces[0]
        if all(p == first for p in self.pieces):
            return first.kappa, first.a, first.b
        return None

    def __call__(self, t: float, price: float) -> float:
        return self.pieces[interval_index(self.targets, t)](t, price)

    def per_interval(self, times, prices) -> np.ndarray:
        """Evaluate piece i at (times[i], prices[i]) for each interval i."""
        times = np.asarray(times, dtype=float)
        prices = np.asarray(prices, dtype=float)
        kappa = np.array([p.kappa for p in self.pieces])
        a = np.array([p.a for p in self.pieces])
        b = np.array([p.b for p in self.pieces])
        return kappa - a * times - b * prices

    def evaluate_many(self, times, prices) -> np.ndarray:
        """Utility of each realized (time, price) pair, picking the piece by time."""
        times = np.asarray(times, dtype=float)
        prices = np.asarray(prices, dtype=float)
        idx = np.searchsorted(np.asarray(self.targets[1:-1]), times, side="right")
        kappa = np.array([p.kappa for p in self.pieces])
        a = np.array([p.a for p in self.pieces])
        b = np.array([p.b for p in self.pieces])
        return kappa[idx] - a[idx] * times - b[idx] * prices


def eval_utility(u: PiecewiseUtility, t: float, price: float) -> float:
    return u(t, price)


@dataclass(frozen=True)
class DemandCurve:
    """Linear demand ``M(U) = gamma + lam*U`` clamped at zero."""

    gamma: float
    lam: float

    def __post_init__(self):
        if self.gamma <= 0 or self.lam <= 0:
            raise ValueError(f"demand needs gamma > 0 and lam > 0, got {self.gamma}, {self.lam}")

    def __call__(self, utility):
        return np.maximum(0.0, self.gamma + self.lam * np.asarray(utility, dtype=float))

    def unclamped(self, utility):
        return self.gamma + self.lam * np.asarray(utility, dtype=float)

    def time_slope(self, alpha_u: float) -> float:
        return self.lam * alpha_u

    def price_slope(self, beta_u: float) -> float:
        return self.lam * beta_u


@dataclass(frozen=True)
class CompletionHistogram:
    """Discrete completion-time distribution.

    Each bin is ``[lo, hi)`` carrying ``mass``, spread uniformly inside the
    bin. A bin with ``lo == hi`` is a point mass.
    """

    lo: np.ndarray
    hi: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).ravel()
        hi = np.asarray(self.hi, dtype=float).ravel()
        m = np.asarray(self.masses, dtype=float).ravel()
        if not (lo.shape == hi.shape == m.shape) or lo.size == 0:
            raise DimensionError("histogram needs equal-length, nonempty lo/hi/masses")
        if np.any(lo < 0) or np.any(hi < lo):
            raise ValueError("bin bounds must satisfy 0 <= lo <= hi")
        if np.any(np.diff(lo) < 0):
            raise ValueError("bins must be sorted by time")
        if np.any(m < 0):
            raise ValueError("masses must be nonnegative")
        if abs(m.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"masses must sum to 1, got {m.sum():.12g}")
        for name, arr in (("lo", lo), ("hi", hi), ("masses", m)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_points(cls, times: Sequence[float], masses: Sequence[float]) -> CompletionHistogram:
        times = np.asarray(times, dtype=float)
        order = np.argsort(times, kind="stable")
        return cls(times[order], times[order], np.asarray(masses, dtype=float)[order])

    @classmethod
    def point_mass(cls, t: float) -> CompletionHistogram:
        return cls.from_points([t], [1.0])

    @classmethod
    def from_bins(cls, edges: Sequence[float], masses: Sequence[float]) -> CompletionHistogram:
        edges = np.asarray(edges, dtype=float)
        return cls(edges[:-1], edges[1:], masses)

    @classmethod
    def from_samples(cls, samples: Sequence[float]) -> CompletionHistogram:
        values, counts = np.unique(np.asarray(samples, dtype=float), return_counts=True)
        return cls.from_points(values, counts / counts.sum())

    @classmethod
    def from_gaussian(cls, mean: float, std: float, step: float = DEFAULT_GRID_STEP,
                      width: float = 8.0) -> CompletionHistogram:
        """Materialize N(mean, std) truncated to t >= 0 on a grid of ``step`` minutes.

        Bin masses are CDF differences at the grid edges, renormalized after
        dropping the negative tail. ``std == 0`` gives a point mass.
        """
        if std < 0:
            raise ValueError("std must be nonnegative")
        if std == 0:
            return cls.point_mass(max(mean, 0.0))
        k0 = max(0, math.floor((mean - width * std) / step))
        k1 = max(k0 + 1, math.ceil((mean + width * std) / step))
        edges = np.arange(k0, k1 + 1) * step
        cdf = norm.cdf(edges, loc=mean, scale=std)
        if k0 == 0:
            cdf[0] = norm.cdf(0.0, loc=mean, scale=std)
        masses = np.diff(cdf)
        if masses.sum() <= 0:
            return cls.point_mass(max(mean, 0.0))
        keep = masses > 0
        masses = masses / masses.sum()
        return cls(edges[:-1][keep], edges[1:][keep], masses[keep])

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def mean(self) -> float:
        return float(np.dot(self.midpoints, self.masses))

    def scaled(self, factor: float) -> CompletionHistogram:
        """Histogram of ``factor * T``."""
        return CompletionHistogram(self.lo * factor, self.hi * factor, self.masses)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        idx = rng.choice(self.masses.size, size=size, p=self.masses)
        u = rng.random(size)
        return self.lo[idx] + u * (self.hi[idx] - self.lo[idx])

    def rebin(self, step: float, n_bins: int | None = None) -> np.ndarray:
        """Mass vector on the grid ``[k*step, (k+1)*step)``, k = 0..n_bins-1."""
        if n_bins is None:
            n_bins = int(math.floor(self.hi.max() / step)) + 1
        out = np.zeros(n_bins)
        point = self.hi == self.lo
        if point.any():
            k = np.minimum(np.floor(self.lo[point] / step + 1e-9).astype(int), n_bins - 1)
            np.add.at(out, k, self.masses[point])
        for lo, hi, m in zip(self.lo[~point], self.hi[~point], self.masses[~point]):
            k0 = int(math.floor(lo / step + 1e-9))
            k1 = int(math.ceil(hi / step - 1e-9))
            for k in range(k0, k1):
                overlap = min(hi, (k + 1) * step) - max(lo, k * step)
                if overlap > 0:
                    out[min(k, n_bins - 1)] += m * overlap / (hi - lo)
        return out


@dataclass(frozen=True)
class Configuration:
    id: str
    rate: float
    histogram: CompletionHistogram
    tags: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError(f"configuration {self.id!r}: rate must be positive")


@dataclass(frozen=True)
class IntervalStats:
    """Per-interval probability, truncated mean time and expected cost."""

    p: np.ndarray
    that: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        p, that, c = (np.asarray(x, dtype=float).ravel() for x in (self.p, self.that, self.c))
        if not (p.shape == that.shape == c.shape):
            raise DimensionError("p, that and c must have the same length")
        if np.any(p < -MASS_TOL) or np.any(p > 1 + MASS_TOL) or abs(p.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"p must be a probability vector, got {p}")
        for name, arr in (("p", p), ("that", that), ("c", c)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_intervals(self) -> int:
        return self.p.size

    @property
    def expected_time(self) -> float:
        return float(self.that @ self.p)

    @property
    def expected_cost(self) -> float:
        return float(self.c @ self.p)

    def scaled(self, factor: float) -> IntervalStats:
        return IntervalStats(self.p, self.that * factor, self.c * factor)


def interval_stats(hist: CompletionHistogram, rate: float, targets: Sequence[float]) -> IntervalStats:
    """Probability mass, truncated mean and linear cost for each target interval.

    Empty intervals get the left endpoint as their expected time; those
    entries always carry zero weight.
    """
    targets = _check_targets(targets)
    n = len(targets) - 1
    mass = np.zeros(n)
    moment = np.zeros(n)
    point = hist.lo == hist.hi
    if point.any():
        idx = np.searchsorted(targets, hist.lo[point], side="right") - 1
        np.add.at(mass, idx, hist.masses[point])
        np.add.at(moment, idx, hist.masses[point] * hist.lo[point])
    spread = ~point
    if spread.any():
        lo, hi, m = hist.lo[spread], hist.hi[spread], hist.masses[spread]
        width = hi - lo
        for i in range(n):
            a = np.maximum(lo, targets[i])
            b = np.minimum(hi, targets[i + 1])
            overlap = np.clip(b - a, 0.0, None)
            share = m * overlap / width
            mass[i] += share.sum()
            moment[i] += (share * 0.5 * (a + b))[overlap > 0].sum()
    that = np.array(targets[:-1], dtype=float)
    nonempty = mass > 0
    that[nonempty] = moment[nonempty] / mass[nonempty]
    # clamp float drift back into the half-open interval
    upper = np.nextafter(np.array(targets[1:]), -INF)
    that = np.minimum(np.maximum(that, targets[:-1]), upper)
    p = mass / mass.sum()
    return IntervalStats(p, that, rate * that)


@dataclass(frozen=True)
class PriceSchedule:
    """Per-interval linear prices ``d_i - e_i*t`` on ``[tau_{i-1}, tau_i)``."""

    targets: tuple[float, ...]
    intercepts: np.ndarray
    slopes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "targets", _check_targets(self.targets))
        d = np.asarray(self.intercepts, dtype=float).ravel()
        e = np.asarray(self.slopes, dtype=float).ravel()
        if d.shape != e.shape or d.size != len(self.targets) - 1:
            raise DimensionError(
                f"{len(self.targets) - 1} intervals need as many price functions, got {d.size}/{e.size}"
            )
        for name, arr in (("intercepts", d), ("slopes", e)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def constant(cls, targets: Sequence[float], prices: Sequence[float]) -> PriceSchedule:
        prices = np.asarray(prices, dtype=float)
        return cls(tuple(targets), prices, np.zeros_like(prices))

    @property
    def n_intervals(self) -> int:
        return self.intercepts.size

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.slopes == 0))

    def __call__(self, t: float) -> float:
        i = interval_index(self.targets, t)
        return float(self.intercepts[i] - self.slopes[i] * t)

    def at(self, times) -> np.ndarray:
        """Price of interval i evaluated at ``times[i]``."""
        times = np.asarray(times, dtype=float)
        if times.size != self.n_intervals:
            raise DimensionError(f"expected {self.n_intervals} times, got {times.size}")
        return self.intercepts - self.slopes * times

    def settle(self, times) -> np.ndarray:
        """Payment due for each realized completion time."""
        times = np.asarray(times, dtype=float)
        idx = np.searchsorted(np.asarray(self.targets[1:-1]), times, side="right")
        return self.intercepts[idx] - self.slopes[idx] * times

    def shifted(self, amount: float) -> PriceSchedule:
        return PriceSchedule(self.targets, self.intercepts + amount, self.slopes)

    def scaled(self, factor: float) -> PriceSchedule:
        return PriceSchedule(self.targets, self.intercepts * factor, self.slopes * factor)


@dataclass(frozen=True)
class Contract:
    """Priced contract: task, data statistics, targets, P, T-hat and prices."""

    task: Any
    stats: Mapping[str, Any]
    targets: tuple[float, ...]
    probs: np.ndarray
    expected_times: np.ndarray
    prices: PriceSchedule

    def __post_init__(self):
        object.__setattr__(self, "targets", _check_targets(self.targets))
        probs = np.asarray(self.probs, dtype=float).ravel()
        times = np.asarray(self.expected_times, dtype=float).ravel()
        n = len(self.targets) - 1
        if probs.size != n or times.size != n or self.prices.n_intervals != n:
            raise DimensionError(f"contract with {n} intervals has inconsistent vectors")
        if tuple(self.prices.targets) != self.targets:
            raise DimensionError("price schedule was built for different targets")
        if abs(probs.sum() - 1.0) > MASS_TOL or np.any(probs < -MASS_TOL):
            raise ValueError(f"contract probabilities must sum to 1, got {probs}")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "expected_times", times)

    @classmethod
    def from_stats(cls, task: Any, targets: Sequence[float], stats: IntervalStats,
                   prices: PriceSchedule, data_stats: Mapping[str, Any] | None = None) -> Contract:
        return cls(task, dict(data_stats or {}), tuple(targets), stats.p, stats.that, prices)

    def quoted_prices(self) -> np.ndarray:
        return self.prices.at(self.expected_times)


def expected_contract_utility(c: Contract, u: PiecewiseUtility) -> float:
    """Probability-weighted utility of each interval at its expected time and price."""
    if tuple(c.targets) != tuple(u.targets):
        raise DimensionError(f"contract targets {c.targets} differ from utility targets {u.targets}")
    values = u.per_interval(c.expected_times, c.quoted_prices())
    # zero-probability intervals may sit at inf-adjacent sentinels; drop them
    mask = c.probs > 0
    return float(np.dot(c.probs[mask], values[mask]))


def select_best_contract(contracts: Sequence[Contract], u: PiecewiseUtility) -> int:
    """Index of the contract with the greatest expected utility (lowest index on ties)."""
    if not contracts:
        raise ValueError("no contracts to choose from")
    scores = [expected_contract_utility(c, u) for c in contracts]
    return int(np.argmax(scores))


def cosine_similarity(a: CompletionHistogram, b: CompletionHistogram,
                      step: float = DEFAULT_GRID_STEP) -> float:
    """Cosine of the two mass vectors after rebinning onto a shared grid."""
    n_bins = int(math.floor(max(a.hi.max(), b.hi.max()) / step)) + 1
    va, vb = a.rebin(step, n_bins), b.rebin(step, n_bins)
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity is undefined for an all-zero histogram")
    return float(np.clip(va @ vb / (na * nb), 0.0, 1.0))
