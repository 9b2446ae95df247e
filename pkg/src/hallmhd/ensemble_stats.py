"""Monte Carlo statistics of randomized free evolutions.

Every ensemble member i uses the draw keyed by ``derive_seed(base_seed, i)``,
so results do not depend on the execution order or on the number of workers.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .mild_solver import (
    Feasibility,
    _combine_traj,
    event_norm_specs,
    parameter_feasibility,
    time_nodes,
)
from .randomization import GAUSSIAN, derive_seed, draw, randomize
from .semigroup import free_trajectory
from .spectral_core import NormSpec, SpectralField, sobolev_norm, trapezoid_weights

__all__ = [
    "EnsembleConfig",
    "EnsembleResult",
    "ensemble_run",
    "event_norms",
    "free_evolution_norm_stats",
    "NormMoments",
    "tail_estimate",
    "tail_from_samples",
    "TailReport",
    "InsufficientSamples",
    "second_moment_closed_form",
    "default_workers",
]

EVENT_LABELS = {"B": ("E1", "E2", "E3"), "u": ("E4", "E5", "E6")}


class InsufficientSamples(RuntimeError):
    """Too few draws for the requested statistic to be meaningful."""


def default_workers() -> int:
    """Thread count from HALLMHD_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("HALLMHD_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class EnsembleConfig:
    """Ensemble of randomized free evolutions of ``data``.

    ``which`` selects the magnetic ("B", exponent p) or velocity ("u",
    exponent q) family of event norms; ``tail_norm`` picks which of the three
    drives the tail estimate.  ``s`` is the Sobolev index used to normalize
    (|f|_{H^s}).
    """

    data: SpectralField
    alpha: float
    base_seed: int = 0
    n_draws: int = 1000
    distribution: str = GAUSSIAN
    which: str = "B"
    p: float | None = None
    q: float | None = None
    s: float = 0.0
    T: float = 0.05
    nodes: int = 17
    spacing: str = "geometric"
    first_node: float = 1e-3
    lambda_grid: Sequence[float] | None = None
    r_list: Sequence[float] = (2, 4, 8, 16)
    tail_norm: int = 0
    feasibility: Feasibility = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_draws < 1:
            raise ValueError("n_draws must be >= 1")
        if self.which not in ("B", "u"):
            raise ValueError("which must be 'B' or 'u'")
        if self.which == "B":
            if self.p is None:
                raise ValueError("magnetic event norms need p")
            self.feasibility = parameter_feasibility(self.alpha, p=self.p)
        else:
            if self.q is None:
                raise ValueError("velocity event norms need q")
            self.feasibility = parameter_feasibility(self.alpha, q=self.q)
        if self.lambda_grid is not None:
            g = np.asarray(self.lambda_grid, float)
            if g.size == 0 or np.any(g <= 0) or np.any(np.diff(g) <= 0):
                raise ValueError("lambda grid must be positive and strictly increasing")
        if any(r < 1 for r in self.r_list):
            raise ValueError("moment orders must be >= 1")
        if self.tail_norm not in (0, 1, 2):
            raise ValueError("tail_norm must be 0, 1 or 2")

    @property
    def times(self) -> np.ndarray:
        return time_nodes(self.T, self.nodes, self.spacing, self.first_node)

    @property
    def specs(self) -> tuple[NormSpec, ...]:
        return event_norm_specs(self.feasibility, self.which)

    @property
    def labels(self) -> tuple[str, ...]:
        return EVENT_LABELS[self.which]

    @property
    def data_norm(self) -> float:
        return sobolev_norm(self.data, self.s)

    def scaled(self, factor: float) -> "EnsembleConfig":
        """Same ensemble with the data multiplied by ``factor``."""
        kw = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "feasibility"}
        kw["data"] = self.data * factor
        return EnsembleConfig(**kw)


def event_norms(cfg: EnsembleConfig, seed: int) -> np.ndarray:
    """The three event norms of the free evolution of the data randomized by ``seed``."""
    f = randomize(cfg.data, draw(seed, cfg.distribution, cfg.data.grid))
    traj = free_trajectory(f, cfg.alpha, cfg.times)
    return _combine_traj(traj, cfg.specs)


@dataclass
class EnsembleResult:
    seeds: list[int]
    values: list  # per-draw task output, None on failure
    failures: list[tuple[int, str]]

    @property
    def n(self) -> int:
        return len(self.seeds)

    @property
    def failure_fraction(self) -> float:
        return len(self.failures) / self.n if self.n else 0.0

    def matrix(self) -> np.ndarray:
        """Successful outputs stacked as rows (failed draws dropped)."""
        ok = [np.atleast_1d(v) for v in self.values if v is not None]
        return np.array(ok, float) if ok else np.zeros((0, 0))

    def to_csv(self, labels: Sequence[str]) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["draw", "seed", *labels])
        for i, (s, v) in enumerate(zip(self.seeds, self.values)):
            vals = ["nan"] * len(labels) if v is None else [repr(float(x)) for x in np.atleast_1d(v)]
            w.writerow([i, s, *vals])
        return buf.getvalue()


def ensemble_run(cfg: EnsembleConfig, task: Callable[[EnsembleConfig, int], object] = event_norms,
                 workers: int | None = None, order: Sequence[int] | None = None) -> EnsembleResult:
    """Evaluate ``task(cfg, derive_seed(base_seed, i))`` for every draw index i.

    Results are stored by draw index, so neither the worker count nor the
    submission ``order`` affects the output.  A failing draw is recorded and
    the run continues.
    """
    n = cfg.n_draws
    seeds = [derive_seed(cfg.base_seed, i) for i in range(n)]
    values: list = [None] * n
    failures: list[tuple[int, str]] = []
    order = list(range(n)) if order is None else list(order)
    if sorted(order) != list(range(n)):
        raise ValueError("order must be a permutation of the draw indices")

    def one(i):
        try:
            return i, task(cfg, seeds[i]), None
        except Exception as exc:  # recorded per draw, never fatal
            return i, None, f"{type(exc).__name__}: {exc}"

    workers = default_workers() if workers is None else workers
    if workers <= 1:
        results = map(one, order)
    else:
        pool = ThreadPoolExecutor(max_workers=workers)
        results = pool.map(one, order)
    for i, v, err in results:
        values[i] = v
        if err is not None:
            failures.append((i, err))
    if workers > 1:
        pool.shutdown()
    failures.sort()
    return EnsembleResult(seeds, values, failures)


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

@dataclass
class NormMoments:
    r: np.ndarray
    moment: np.ndarray
    ratio: np.ndarray  # moment / (sqrt(r) |f|_{H^s})
    rel_stderr: np.ndarray
    data_norm: float

    def bounded(self, factor: float = 2.0) -> bool:
        """True when ratio(r) <= factor * ratio(r_min) for every r."""
        if self.data_norm == 0:
            return True
        return bool(np.all(self.ratio <= factor * self.ratio[0] * (1 + 1e-12)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "moment", "ratio_sqrt_r"])
        for r, m, q in zip(self.r, self.moment, self.ratio):
            w.writerow([repr(float(r)), repr(float(m)), repr(float(q))])
        return buf.getvalue()


def moments_from_samples(x: np.ndarray, r_list, data_norm: float, max_rel_stderr: float = 0.25,
                         min_draws: int = 100) -> NormMoments:
    x = np.asarray(x, float)
    if x.size < min_draws:
        raise InsufficientSamples(f"{x.size} draws; moment statistics need at least {min_draws}")
    r = np.asarray(r_list, float)
    mom = np.empty(r.size)
    rse = np.zeros(r.size)
    scale = float(np.max(x)) if x.size else 0.0
    for i, ri in enumerate(r):
        if scale == 0:
            mom[i] = 0.0
            continue
        y = (x / scale) ** ri
        m = float(np.mean(y))
        mom[i] = scale * m ** (1 / ri)
        rse[i] = float(np.std(y, ddof=1) / (m * math.sqrt(x.size))) if m > 0 else 0.0
    worst = int(np.argmax(rse))
    if rse[worst] > max_rel_stderr:
        raise InsufficientSamples(
            f"relative standard error {rse[worst]:.2f} of the order-{r[worst]:g} moment exceeds "
            f"{max_rel_stderr}: increase n_draws or lower the largest moment order")
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(data_norm > 0, mom / (np.sqrt(r) * data_norm), 0.0)
    return NormMoments(r, mom, ratio, rse, data_norm)


def free_evolution_norm_stats(cfg: EnsembleConfig, r_list=None, norm: int | None = None,
                              result: EnsembleResult | None = None) -> NormMoments:
    """L^r_omega moments of one event norm of the randomized free evolution."""
    r_list = cfg.r_list if r_list is None else r_list
    norm = cfg.tail_norm if norm is None else norm
    if result is None:
        result = ensemble_run(cfg)
    x = result.matrix()
    x = x[:, norm] if x.size else np.zeros(0)
    return moments_from_samples(x, r_list, cfg.data_norm)


def second_moment_closed_form(cfg: EnsembleConfig) -> float:
    """E |B_free|^2 in the weighted L^2_t H^sigma event norm, per mode (unit-variance draws).

    Uses the third event norm of the configured family, whose square is
    sum_j w_j t_j^{2 weight} sum_k (1+|k|^2)^sigma e^{-2 t_j |k|^{2 alpha}} |a_k|^2 l_k^2.
    """
    spec = cfg.specs[2]
    if spec.time_exp != 2:
        raise ValueError("closed form available only for a quadratic time exponent")
    grid = cfg.data.grid
    t = cfg.times
    w = trapezoid_weights(t)
    tw = np.where(t > 0, t, 0.0) ** (2 * spec.weight)
    e = np.sum(np.abs(cfg.data.coeffs) ** 2, axis=0) * grid.multiplicity * grid.sobolev_weight(spec.sigma)
    sym = grid.fractional_symbol(cfg.alpha)
    total = 0.0
    for wj, twj, tj in zip(w, tw, t):
        total += wj * twj * float(np.sum(e * np.exp(-2 * tj * sym)))
    return total


# ---------------------------------------------------------------------------
# tails
# ---------------------------------------------------------------------------

@dataclass
class TailReport:
    """Empirical survival function on a lambda grid and its Gaussian-decay fit.

    log P(X >= lam) ~ log c1 - c2 lam^2 / |f|^2_{H^s}; ``slope`` is the fitted
    coefficient of lam^2 and c2 = -slope |f|^2_{H^s}.
    """

    lam: np.ndarray
    p_hat: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    counts: np.ndarray
    n: int
    slope: float
    intercept: float
    r2: float
    data_norm: float
    fit_mask: np.ndarray

    @property
    def degenerate(self) -> bool:
        return not np.isfinite(self.slope)

    @property
    def c1(self) -> float:
        return math.exp(self.intercept) if np.isfinite(self.intercept) else math.nan

    @property
    def c2(self) -> float:
        return -self.slope * self.data_norm**2 if np.isfinite(self.slope) else math.nan

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "p_hat", "ci_lo", "ci_hi"])
        for row in zip(self.lam, self.p_hat, self.ci_lo, self.ci_hi):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def clopper_pearson(k: np.ndarray, n: int, level: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
    a = 1 - level
    k = np.asarray(k)
    lo = np.where(k > 0, stats.beta.ppf(a / 2, k, n - k + 1), 0.0)
    hi = np.where(k < n, stats.beta.ppf(1 - a / 2, k + 1, n - k), 1.0)
    return np.nan_to_num(lo), np.nan_to_num(hi, nan=1.0)


def auto_lambda_grid(x: np.ndarray, points: int = 16) -> np.ndarray:
    """From the median to the level exceeded by about 10 samples."""
    x = np.sort(np.asarray(x, float))
    if x.size == 0 or x[-1] <= 0:
        return np.array([1.0])
    lo = float(np.median(x))
    hi = float(np.quantile(x, 1 - min(0.5, 10.0 / x.size)))
    if not hi > lo:
        return np.array([lo]) if lo > 0 else np.array([x[-1]])
    return np.linspace(lo, hi, points)


def tail_from_samples(x, lambda_grid=None, data_norm: float = 1.0, min_count: int = 10) -> TailReport:
    x = np.asarray(x, float)
    n = x.size
    lam = auto_lambda_grid(x) if lambda_grid is None else np.asarray(lambda_grid, float)
    xs = np.sort(x)
    counts = n - np.searchsorted(xs, lam, side="left")
    p = counts / n if n else np.zeros(lam.size)
    lo, hi = clopper_pearson(counts, n)
    mask = (counts >= min_count) & (p < 1)
    slope = intercept = r2 = math.nan
    if np.count_nonzero(mask) >= 3:
        X = lam[mask] ** 2
        Y = np.log(p[mask])
        W = n * p[mask] / (1 - p[mask])
        A = np.stack([np.ones_like(X), X], axis=1)
        sw = np.sqrt(W)
        coef, *_ = np.linalg.lstsq(A * sw[:, None], Y * sw, rcond=None)
        intercept, slope = float(coef[0]), float(coef[1])
        ybar = np.sum(W * Y) / np.sum(W)
        ss_res = np.sum(W * (Y - A @ coef) ** 2)
        ss_tot = np.sum(W * (Y - ybar) ** 2)
        r2 = float(1 - ss_res / ss_tot) if ss_tot > 0 else math.nan
    return TailReport(lam, p, lo, hi, counts, n, slope, intercept, r2, data_norm, mask)


def tail_estimate(cfg: EnsembleConfig, result: EnsembleResult | None = None,
                  min_draws: int = 1000) -> TailReport:
    """Survival function of the selected event norm over the lambda grid, with fit."""
    if cfg.n_draws < min_draws:
        raise InsufficientSamples(f"tail estimation needs at least {min_draws} draws, got {cfg.n_draws}")
    if result is None:
        result = ensemble_run(cfg)
    x = result.matrix()
    x = x[:, cfg.tail_norm] if x.size else np.zeros(0)
    return tail_from_samples(x, cfg.lambda_grid, cfg.data_norm)
