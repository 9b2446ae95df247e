"""Mild (Duhamel) formulation: fixed-point maps, Picard iteration and a reference integrator.

The perturbation H = B - B_free (and V = u - u_free) solves

    H(t) = int_0^t exp(-(t - tau) A) N(B_free + H, u_free + V)(tau) dtau,

with A = (-Delta)^alpha and N the nonlinear tendency from ``dynamics``.  The
integral is evaluated by product integration: on each panel the nonlinearity
is linear in tau and the exponential is integrated exactly mode by mode.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import dynamics
from .dynamics import ELECTRON_MHD, HALL_MHD, HEAT, NSE, SystemKind
from .randomization import draw, power_law_field, randomize
from .semigroup import free_trajectory
from .spectral_core import (
    Grid,
    NormSpec,
    SpectralField,
    Trajectory,
    _lp_from_values,
    get_grid,
    sobolev_norm,
    spacetime_from_values,
    to_physical,
    trapezoid_weights,
)

__all__ = [
    "InfeasibleParameters",
    "Feasibility",
    "parameter_feasibility",
    "auto_exponent",
    "SolverConfig",
    "time_nodes",
    "free_evolution",
    "duhamel_integral",
    "duhamel_apply",
    "picard_solve",
    "PicardConvergenceError",
    "ContractionReport",
    "etd_integrate",
    "BlowUpError",
    "contraction_probe",
    "contraction_study",
    "ProbeResult",
    "ProbeStudy",
    "y_norm_specs",
    "x_norm_specs",
    "event_norm_specs",
    "trajectory_norm",
    "regularity_study",
]


# ---------------------------------------------------------------------------
# exponent bookkeeping
# ---------------------------------------------------------------------------

BETA_RELATION = "1/alpha + 3/(2 p alpha) + 2 beta = 1"
GAMMA_RELATION = "1/(2 alpha) + 3/(2 q alpha) + 2 gamma = 1"


class InfeasibleParameters(ValueError):
    """Exponent relation cannot be met with a positive time weight."""

    def __init__(self, message: str, relation: str):
        super().__init__(f"{message} (violates {relation})")
        self.relation = relation


@dataclass(frozen=True)
class Feasibility:
    alpha: float
    p: float | None
    q: float | None
    beta: float | None
    gamma: float | None
    eta_window: tuple[float, float] | None
    zeta_window: tuple[float, float] | None
    warnings: tuple[str, ...] = ()

    @property
    def eta(self) -> float | None:
        """Midpoint of the admissible window for the weight of the third magnetic event."""
        return None if self.eta_window is None else _midpoint(self.eta_window)

    @property
    def zeta(self) -> float | None:
        return None if self.zeta_window is None else _midpoint(self.zeta_window)


def _midpoint(window):
    lo, hi = window
    return 0.5 * (lo + hi) if hi > lo else float("nan")


def auto_exponent(alpha: float, which: str = "p") -> int:
    """Largest integer Lebesgue exponent with the time-integrability condition 1/(2 weight) >= exponent.

    For ``p`` this is the largest p with 1/(2 beta) >= p, i.e.
    p <= (1 + 3/(2 alpha)) / (1 - 1/alpha); for ``q`` the analogous bound with gamma.
    """
    if which == "p":
        if alpha <= 1:
            raise InfeasibleParameters(f"no admissible p at alpha = {alpha}", BETA_RELATION)
        bound = (1 + 1.5 / alpha) / (1 - 1 / alpha)
    else:
        bound = (1 + 1.5 / alpha) / (1 - 0.5 / alpha)
    return max(2, int(math.floor(bound + 1e-12)))


def parameter_feasibility(alpha: float, p: float | None = None, q: float | None = None) -> Feasibility:
    """Weights beta, gamma from the exponent relations, plus auxiliary windows.

    Raises InfeasibleParameters naming the relation when beta <= 0 or gamma <= 0.
    """
    if not (1.0 <= alpha < 1.75):
        raise ValueError(f"dissipation order must lie in [1, 7/4), got {alpha}")
    notes = []
    beta = gamma = None
    eta_w = zeta_w = None
    if p is not None:
        if p < 2:
            raise ValueError("p must be >= 2")
        beta = 0.5 * (1 - 1 / alpha - 1.5 / (p * alpha))
        if beta <= 0:
            raise InfeasibleParameters(f"beta = {beta:.6g} <= 0 at alpha = {alpha}, p = {p}",
                                       BETA_RELATION)
        eta_w = (max(0.0, 1 / alpha - 0.5), min(0.5, 0.5 - 2 * beta))
        if eta_w[1] <= eta_w[0]:
            notes.append(f"empty eta window {eta_w}")
        if 1 / (2 * beta) < p:
            notes.append(f"1/(2 beta) = {1 / (2 * beta):.6g} < p = {p}: the L^p free-evolution "
                         f"estimate needs the time exponent to be at least p")
    if q is not None:
        if q < 2:
            raise ValueError("q must be >= 2")
        gamma = 0.5 * (1 - 0.5 / alpha - 1.5 / (q * alpha))
        if gamma <= 0:
            raise InfeasibleParameters(f"gamma = {gamma:.6g} <= 0 at alpha = {alpha}, q = {q}",
                                       GAMMA_RELATION)
        zeta_w = (0.5 / alpha + gamma / 4, min(0.5, 1 - 1.75 * gamma))
        if zeta_w[1] <= zeta_w[0]:
            notes.append(f"empty zeta window {zeta_w}")
        if 1 / (2 * gamma) < q:
            notes.append(f"1/(2 gamma) = {1 / (2 * gamma):.6g} < q = {q}: the L^q free-evolution "
                         f"estimate needs the time exponent to be at least q")
    return Feasibility(alpha, p, q, beta, gamma, eta_w, zeta_w, tuple(notes))


def magnetic_threshold(alpha: float) -> float:
    """Smallest Sobolev index allowed for magnetic data."""
    return max(5.5 - 4 * alpha, 2.5 - 2 * alpha)


def velocity_threshold(alpha: float) -> float:
    return max(3.5 - 3.5 * alpha, 1.5 - 2 * alpha)


def y_norm_specs(feas: Feasibility) -> tuple[NormSpec, ...]:
    """Constituents of the magnetic solution space, combined by taking the maximum."""
    b, p = feas.beta, feas.p
    return (NormSpec.spacetime(0.0, math.inf, sigma=3.5 - 2 * feas.alpha),
            NormSpec.spacetime(b, 1 / b, p=p),
            NormSpec.spacetime(0.0, 1 / (2 * b), p=p))


def x_norm_specs(feas: Feasibility) -> tuple[NormSpec, ...]:
    g, q = feas.gamma, feas.q
    return (NormSpec.spacetime(0.0, math.inf, sigma=2.5 - 2 * feas.alpha),
            NormSpec.spacetime(g, 1 / g, p=q),
            NormSpec.spacetime(0.0, 1 / (2 * g), p=q))


def event_norm_specs(feas: Feasibility, which: str = "B") -> tuple[NormSpec, ...]:
    """The three free-evolution norms whose exceedance defines the bad events.

    Magnetic: L^{1/(2 beta)}_t L^p, L^{(beta, 1/beta)}_t L^p, L^{(eta, 2)}_t H^{11/2 - 2 alpha}.
    Velocity: L^{1/(2 gamma)}_t L^q, L^{(gamma, 1/gamma)}_t L^q, L^{(zeta, 4)}_t H^{7/2 - 2 alpha}.
    """
    a = feas.alpha
    if which == "B":
        b, p = feas.beta, feas.p
        return (NormSpec.spacetime(0.0, 1 / (2 * b), p=p),
                NormSpec.spacetime(b, 1 / b, p=p),
                NormSpec.spacetime(feas.eta, 2.0, sigma=5.5 - 2 * a))
    g, q = feas.gamma, feas.q
    return (NormSpec.spacetime(0.0, 1 / (2 * g), p=q),
            NormSpec.spacetime(g, 1 / g, p=q),
            NormSpec.spacetime(feas.zeta, 4.0, sigma=3.5 - 2 * a))


def _spatial_values(c: np.ndarray, grid: Grid, specs: Sequence[NormSpec]) -> np.ndarray:
    """Spatial norm of one sample for every spec, sharing a single inverse transform."""
    out = np.empty(len(specs))
    phys = None
    e = None
    for i, spec in enumerate(specs):
        sp = spec.spatial
        if sp.kind == "sobolev":
            if e is None:
                e = np.sum(np.abs(c) ** 2, axis=0) * grid.multiplicity
            out[i] = math.sqrt(float(np.sum(e * grid.sobolev_weight(sp.sigma))))
        else:
            if phys is None:
                phys = to_physical(c, grid)
            out[i] = float(_lp_from_values(phys, sp.p))
    return out


def _combine(times, weights, values: np.ndarray, specs) -> np.ndarray:
    return np.array([spacetime_from_values(times, weights, values[:, i], s)
                     for i, s in enumerate(specs)])


def trajectory_norm(traj: Trajectory, specs: Sequence[NormSpec]) -> float:
    """Maximum of the given space-time norms (the solution-space norm)."""
    return float(np.max(_combine_traj(traj, specs)))


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def time_nodes(T: float, n: int, spacing: str = "geometric", first: float = 1e-4) -> np.ndarray:
    """Sample times 0 = t_0 < t_1 < ... < t_{n-1} = T.

    Geometric spacing places t_1 = first * T and grows by a constant factor.
    """
    if not T > 0:
        raise ValueError("horizon must be positive")
    if n < 2:
        raise ValueError("need at least two time nodes")
    if spacing == "uniform":
        return np.linspace(0.0, T, n)
    if spacing != "geometric":
        raise ValueError(f"unknown node spacing {spacing!r}")
    if not 0 < first < 1:
        raise ValueError("first node fraction must lie in (0, 1)")
    if n == 2:
        return np.array([0.0, T])
    t = np.concatenate([[0.0], np.geomspace(first * T, T, n - 1)])
    t[-1] = T
    return t


@dataclass
class SolverConfig:
    """Everything a Picard or reference run needs.

    ``B_data`` is the (already randomized) magnetic initial field and
    ``u_data`` the velocity one; which are required depends on ``kind``.
    ``s_B`` / ``s_u`` are the Sobolev indices claimed for the data; when
    given they are checked against the admissible thresholds.
    """

    kind: SystemKind
    n: int
    T: float
    p: float | None = None
    q: float | None = None
    nodes: int = 33
    spacing: str = "geometric"
    first_node: float = 1e-4
    picard_tol: float = 1e-10
    max_iterations: int = 60
    B_data: SpectralField | None = None
    u_data: SpectralField | None = None
    s_B: float | None = None
    s_u: float | None = None
    etd_dt: float | None = None
    evolve_velocity: bool = True
    feasibility: Feasibility = field(init=False, repr=False)

    def __post_init__(self):
        kind = self.kind
        if kind.tag == HEAT:
            raise ValueError("the heat flow has no mild-solution map")
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if self.picard_tol <= 0 or self.max_iterations < 1:
            raise ValueError("picard_tol must be positive and max_iterations >= 1")
        p = self.p if kind.has_magnetic else None
        q = self.q if kind.has_velocity else None
        if kind.has_magnetic and p is None:
            raise ValueError(f"{kind.tag} needs the exponent p")
        if kind.has_velocity and q is None:
            raise ValueError(f"{kind.tag} needs the exponent q")
        self.feasibility = parameter_feasibility(kind.alpha, p, q)
        for w in self.feasibility.warnings:
            warnings.warn(w, stacklevel=2)
        grid = self.grid
        zero = SpectralField.zeros(grid)
        if kind.has_magnetic:
            self.B_data = self._check_data(self.B_data, zero, "B_data")
            if self.s_B is not None and self.s_B < magnetic_threshold(kind.alpha) - 1e-12:
                raise ValueError(f"s_B = {self.s_B} below the admissible threshold "
                                 f"{magnetic_threshold(kind.alpha):g}")
        if kind.has_velocity:
            self.u_data = self._check_data(self.u_data, zero, "u_data")
            if self.s_u is not None and self.s_u < velocity_threshold(kind.alpha) - 1e-12:
                raise ValueError(f"s_u = {self.s_u} below the admissible threshold "
                                 f"{velocity_threshold(kind.alpha):g}")

    def _check_data(self, f, zero, name):
        if f is None:
            return zero
        if f.grid != self.grid:
            raise ValueError(f"{name} lives on N={f.grid.n}, config has N={self.n}")
        if f.ncomp != 3 or not f.is_div_free(1e-10):
            raise dynamics.PreconditionError(f"{name} must be a divergence-free 3-vector field")
        return f

    @property
    def grid(self) -> Grid:
        return get_grid(self.n)

    @property
    def times(self) -> np.ndarray:
        return time_nodes(self.T, self.nodes, self.spacing, self.first_node)

    @property
    def beta(self) -> float | None:
        return self.feasibility.beta

    @property
    def gamma(self) -> float | None:
        return self.feasibility.gamma


def free_evolution(data: SpectralField, alpha: float, times) -> Trajectory:
    """exp(-t A) data at every node; exact (diagonal) evaluation."""
    return free_trajectory(data, alpha, times)


# ---------------------------------------------------------------------------
# product integration
# ---------------------------------------------------------------------------

def phi_functions(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """phi1(z) = (1 - e^{-z})/z and phi2(z) = (z - 1 + e^{-z})/z^2, stable near 0."""
    z = np.asarray(z, float)
    small = z < 0.1
    zs = np.where(small, z, 0.0)
    # Taylor: phi1 = sum (-z)^n/(n+1)!, phi2 = sum (-z)^n/(n+2)!
    p1 = np.zeros_like(z)
    p2 = np.zeros_like(z)
    for n in range(14, -1, -1):
        p1 = p1 * (-zs) + 1.0 / math.factorial(n + 1)
        p2 = p2 * (-zs) + 1.0 / math.factorial(n + 2)
    zb = np.where(small, 1.0, z)
    em = np.expm1(-zb)
    phi1 = np.where(small, p1, -em / zb)
    phi2 = np.where(small, p2, (zb + em) / zb**2)
    return phi1, phi2


class _Panel:
    """Per-panel exponential weights exp(-hL), h phi1(hL), h phi2(hL), cached by step length."""

    def __init__(self, symbol: np.ndarray):
        self.symbol = symbol
        self._cache: dict[float, tuple] = {}

    def __call__(self, h: float):
        w = self._cache.get(h)
        if w is None:
            z = h * self.symbol
            p1, p2 = phi_functions(z)
            w = (np.exp(-z), h * p1, h * p2)
            if len(self._cache) > 64:
                self._cache.clear()
            self._cache[h] = w
        return w


def duhamel_integral(source: Trajectory, alpha: float) -> Trajectory:
    """int_0^t exp(-(t - tau) A) S(tau) dtau at every node of ``source``.

    S is interpolated linearly between nodes; on [0, t_0] (when t_0 > 0) it is
    taken constant at S(t_0).
    """
    grid = source.grid
    panel = _Panel(grid.fractional_symbol(alpha))
    times = source.times
    out = np.empty_like(source.coeffs, dtype=complex)
    acc = np.zeros(source.coeffs.shape[1:], complex)
    if times[0] > 0:
        E, w1, _ = panel(float(times[0]))
        acc = w1 * source.coeffs[0]
    out[0] = acc
    for j in range(len(times) - 1):
        E, w1, w2 = panel(float(times[j + 1] - times[j]))
        acc = E * acc + w1 * source.coeffs[j] + w2 * (source.coeffs[j + 1] - source.coeffs[j])
        out[j + 1] = acc
    return Trajectory(grid, times, out)


def _free_pair(config: SolverConfig, times):
    a = config.kind.alpha
    fu = free_evolution(config.u_data, a, times) if config.kind.has_velocity else None
    fB = free_evolution(config.B_data, a, times) if config.kind.has_magnetic else None
    return fu, fB


def _node_nonlinearity(config: SolverConfig, u_j, B_j):
    kind = config.kind
    grid = config.grid
    if kind.tag == HALL_MHD and not config.evolve_velocity:
        # velocity frozen: only the magnetic equation is advanced
        return None, dynamics.magnetic_nonlinearity(B_j, grid, u_j)
    return dynamics.nonlinear_coeffs(kind, u_j, B_j, grid)


def _sweep(config: SolverConfig, times, free_u, free_B, cand_u, cand_B, on_node=None):
    """One application of the fixed-point map(s), node by node.

    Returns new coefficient stacks (velocity, magnetic); ``on_node(j, Vj, Hj)``
    is called as each node is finished.
    """
    grid = config.grid
    panel = _Panel(grid.fractional_symbol(config.kind.alpha))
    M = len(times)
    shape = (M, 3) + grid.spectral_shape
    has_u = config.kind.has_velocity
    has_B = config.kind.has_magnetic
    evolve_u = has_u and (config.kind.tag == NSE or config.evolve_velocity)
    newV = np.zeros(shape, complex) if has_u else None
    newH = np.zeros(shape, complex) if has_B else None

    def state(j):
        uj = None if not has_u else free_u[j] + (cand_u[j] if cand_u is not None else 0)
        Bj = None if not has_B else free_B[j] + (cand_B[j] if cand_B is not None else 0)
        return _node_nonlinearity(config, uj, Bj)

    Nu, NB = state(0)
    accu = accB = None
    if times[0] > 0:
        _, w1, _ = panel(float(times[0]))
        accu = w1 * Nu if evolve_u else None
        accB = w1 * NB if has_B else None
    else:
        accu = np.zeros(shape[1:], complex) if evolve_u else None
        accB = np.zeros(shape[1:], complex) if has_B else None
    if evolve_u:
        newV[0] = accu
    if has_B:
        newH[0] = accB
    if on_node:
        on_node(0, None if newV is None else newV[0], None if newH is None else newH[0])
    for j in range(M - 1):
        E, w1, w2 = panel(float(times[j + 1] - times[j]))
        Nu1, NB1 = state(j + 1)
        if evolve_u:
            accu = E * accu + w1 * Nu + w2 * (Nu1 - Nu)
            newV[j + 1] = accu
        if has_B:
            accB = E * accB + w1 * NB + w2 * (NB1 - NB)
            newH[j + 1] = accB
        Nu, NB = Nu1, NB1
        if on_node:
            on_node(j + 1, None if newV is None else newV[j + 1], None if newH is None else newH[j + 1])
    return newV, newH


def duhamel_apply(config: SolverConfig, candidate_H: Trajectory | None = None,
                  candidate_V: Trajectory | None = None, free_B: Trajectory | None = None,
                  free_u: Trajectory | None = None) -> tuple[Trajectory | None, Trajectory | None]:
    """Apply the fixed-point map(s) once; returns (velocity part, magnetic part).

    Missing candidates are zero and missing free evolutions are computed from
    the configured data on the configured nodes.
    """
    times = config.times
    for tr in (candidate_H, candidate_V, free_B, free_u):
        if tr is not None:
            if tr.grid != config.grid:
                raise ValueError("trajectory grid differs from the configuration")
            if not np.array_equal(tr.times, times):
                raise ValueError("trajectory nodes differ from the configured time nodes")
    fu, fB = _free_pair(config, times)
    fu = free_u.coeffs if free_u is not None else (None if fu is None else fu.coeffs)
    fB = free_B.coeffs if free_B is not None else (None if fB is None else fB.coeffs)
    cu = None if candidate_V is None else candidate_V.coeffs
    cB = None if candidate_H is None else candidate_H.coeffs
    V, H = _sweep(config, times, fu, fB, cu, cB)
    wrap = (lambda c: None if c is None else Trajectory(config.grid, times, c))
    return wrap(V), wrap(H)


# ---------------------------------------------------------------------------
# Picard iteration
# ---------------------------------------------------------------------------

@dataclass
class ContractionReport:
    """Residual history of a Picard run and the constants fitted from it.

    ``lam`` is the size of the free evolution (sum of its event norms);
    ``C`` is the median of the per-iteration Lipschitz estimates
    r_{n+1} / ((|H_n| + |H_{n-1}| + lam) r_n).
    """

    residuals: np.ndarray
    norms: np.ndarray
    lam: float
    rho: float
    C: float
    C_spread: float
    converged: bool
    iterations: int

    @property
    def ratios(self) -> np.ndarray:
        r = self.residuals
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(r[:-1] > 0, r[1:] / np.where(r[:-1] > 0, r[:-1], 1.0), 0.0)
        return np.concatenate([[np.nan], out])

    @property
    def C_per_iteration(self) -> np.ndarray:
        r, h = self.residuals, self.norms
        out = np.full(r.size, np.nan)
        for n in range(1, r.size):
            denom = (h[n] + h[n - 1] + self.lam) * r[n - 1]
            if denom > 0:
                out[n] = r[n] / denom
        return out

    @property
    def lambda_bar(self) -> float:
        return 1.0 / (3.0 * self.C) if self.C > 0 else math.inf

    @property
    def ball_radius(self) -> float:
        """2 C lambda_bar^2 = 2/(9 C)."""
        return 2.0 * self.C * self.lambda_bar**2 if self.C > 0 else math.inf

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "residual_Y", "ratio", "C_fit", "lambda_bar", "ball_radius"])
        cs = self.C_per_iteration
        for n, (r, q, c) in enumerate(zip(self.residuals, self.ratios, cs)):
            lb = 1.0 / (3.0 * c) if c > 0 else math.nan
            br = 2.0 / (9.0 * c) if c > 0 else math.nan
            w.writerow([n, _fmt(r), _fmt(q), _fmt(c), _fmt(lb), _fmt(br)])
        return buf.getvalue()


def _fmt(x: float) -> str:
    return "nan" if x is None or not np.isfinite(x) else repr(float(x))


class PicardConvergenceError(RuntimeError):
    """Picard iteration did not reach the tolerance; carries the residual history."""

    def __init__(self, message: str, report: ContractionReport):
        super().__init__(message)
        self.report = report

    @property
    def history(self) -> np.ndarray:
        return self.report.residuals


def _fit_rho(res: np.ndarray) -> float:
    pos = res[res > 0]
    if pos.size < 2:
        return 0.0
    k = np.arange(pos.size)
    slope = np.polyfit(k, np.log(pos), 1)[0]
    return float(math.exp(slope))


def _space_specs(config: SolverConfig):
    feas = config.feasibility
    su = x_norm_specs(feas) if config.kind.has_velocity else ()
    sB = y_norm_specs(feas) if config.kind.has_magnetic else ()
    return su, sB


def free_size(config: SolverConfig, free_u: Trajectory | None, free_B: Trajectory | None) -> float:
    """lam: sum of the event norms of the free evolution(s)."""
    feas = config.feasibility
    total = 0.0
    if free_B is not None:
        specs = event_norm_specs(feas, "B")
        total += sum(float(v) for v in _combine_traj(free_B, specs))
    if free_u is not None:
        specs = event_norm_specs(feas, "u")
        total += sum(float(v) for v in _combine_traj(free_u, specs))
    return total


def _combine_traj(traj: Trajectory, specs) -> np.ndarray:
    """Each space-time norm of ``traj``; spatial norms with equal parameters are computed once."""
    cache: dict = {}
    vals = np.empty((len(traj), len(specs)))
    for i, spec in enumerate(specs):
        key = spec.spatial
        if key not in cache:
            cache[key] = traj.spatial_norms(key, chunk=32)
        vals[:, i] = cache[key]
    return _combine(traj.times, traj.weights, vals, specs)


@dataclass
class PicardResult:
    H: Trajectory | None
    V: Trajectory | None
    free_B: Trajectory | None
    free_u: Trajectory | None
    report: ContractionReport

    @property
    def B(self) -> Trajectory:
        return self.free_B + self.H

    @property
    def u(self) -> Trajectory:
        return self.free_u + self.V


def picard_solve(config: SolverConfig) -> PicardResult:
    """Iterate the Duhamel map from H_0 = 0 until |H_n - map(H_n)| <= tol |H_n|.

    The returned perturbation is the last iterate H_n that met the test, so it
    is a certified approximate fixed point.  Raises PicardConvergenceError when
    max_iterations is exhausted or the iterates overflow.
    """
    times = config.times
    free_u, free_B = _free_pair(config, times)
    lam = free_size(config, free_u, free_B)
    with np.errstate(over="ignore", invalid="ignore"):
        V, H, res, nrm, converged = _iterate(config, times, free_u, free_B)
        report = _make_report(res, nrm, lam, converged)
    if not converged:
        if not np.isfinite(res[-1]):
            msg = f"Picard iterates diverged to non-finite values after {res.size} iterations"
        else:
            msg = (f"Picard iteration did not converge in {config.max_iterations} iterations "
                   f"(last relative residual {res[-1] / max(nrm[-1], 1e-300):.3e})")
        raise PicardConvergenceError(msg, report)
    grid = config.grid
    wrap = (lambda c: None if c is None else Trajectory(grid, times, c))
    if config.kind.tag == HALL_MHD and not config.evolve_velocity:
        V = np.zeros((len(times), 3) + grid.spectral_shape, complex)
    return PicardResult(wrap(H), wrap(V), free_B, free_u, report)


def _iterate(config: SolverConfig, times, free_u, free_B):
    grid = config.grid
    weights = trapezoid_weights(times)
    su, sB = _space_specs(config)
    M = len(times)
    has_u = config.kind.has_velocity and (config.kind.tag == NSE or config.evolve_velocity)
    has_B = config.kind.has_magnetic
    shape = (M, 3) + grid.spectral_shape
    V = np.zeros(shape, complex) if has_u else None
    H = np.zeros(shape, complex) if has_B else None
    fu = None if free_u is None else free_u.coeffs
    fB = None if free_B is None else free_B.coeffs
    cur_norm = 0.0
    residuals, norms = [], []
    converged = False
    for _ in range(config.max_iterations):
        dvals_u = np.zeros((M, len(su)))
        dvals_B = np.zeros((M, len(sB)))
        nvals_u = np.zeros((M, len(su)))
        nvals_B = np.zeros((M, len(sB)))

        def on_node(j, Vj, Hj):
            if has_u:
                dvals_u[j] = _spatial_values(Vj - V[j], grid, su)
                nvals_u[j] = _spatial_values(Vj, grid, su)
            if has_B:
                dvals_B[j] = _spatial_values(Hj - H[j], grid, sB)
                nvals_B[j] = _spatial_values(Hj, grid, sB)

        newV, newH = _sweep(config, times, fu, fB, V, H, on_node)
        r = 0.0
        new_norm = 0.0
        if has_u:
            r += float(np.max(_combine(times, weights, dvals_u, su)))
            new_norm += float(np.max(_combine(times, weights, nvals_u, su)))
        if has_B:
            r += float(np.max(_combine(times, weights, dvals_B, sB)))
            new_norm += float(np.max(_combine(times, weights, nvals_B, sB)))
        residuals.append(r)
        norms.append(cur_norm)
        if not (math.isfinite(r) and math.isfinite(new_norm)):
            break
        if r <= config.picard_tol * cur_norm or r == 0.0:
            converged = True
            break
        V, H = newV, newH
        cur_norm = new_norm
    return V, H, np.array(residuals), np.array(norms), converged


def _make_report(res, nrm, lam, converged) -> ContractionReport:
    rep = ContractionReport(res, nrm, lam, _fit_rho(res), math.nan, math.nan, converged, res.size)
    cs = rep.C_per_iteration
    # only iterations where the difference is resolved above round-off
    good = np.isfinite(cs) & (res > 1e-13 * max(float(np.max(nrm)), 1e-300))
    good[0] = False
    if np.any(good):
        vals = cs[good]
        rep.C = float(np.median(vals))
        rep.C_spread = float(np.std(vals) / rep.C) if rep.C > 0 else math.nan
    return rep


# ---------------------------------------------------------------------------
# reference exponential integrator
# ---------------------------------------------------------------------------

class BlowUpError(RuntimeError):
    """Field norm exceeded the overflow guard."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


def etd_integrate(config: SolverConfig, dt: float | None = None, times=None,
                  forcing: Callable | None = None, guard: float = 1e6):
    """Second-order exponential time differencing (Cox-Matthews ETD2RK).

    Integrates the full fields (u, B) and samples them at ``times`` (default
    the configured nodes).  Each interval between samples is split into equal
    substeps no longer than ``dt`` (default ``config.etd_dt``, else one step
    per interval).  ``forcing(t)`` may return an additive source
    (F_u, F_B) as coefficient arrays or fields (None entries allowed).

    Returns (traj_u, traj_B); the slot of an absent field is None.
    """
    kind = config.kind
    grid = config.grid
    times = config.times if times is None else np.asarray(times, float)
    dt = config.etd_dt if dt is None else dt
    panel = _Panel(grid.fractional_symbol(kind.alpha))
    has_u = kind.has_velocity and (kind.tag == NSE or config.evolve_velocity)
    has_B = kind.has_magnetic
    u = config.u_data.coeffs.copy() if kind.has_velocity else None
    B = config.B_data.coeffs.copy() if has_B else None
    static_u = u if (kind.has_velocity and not has_u) else None

    def N(t, u, B):
        nu, nB = _node_nonlinearity(config, u if has_u else static_u, B)
        if forcing is not None:
            Fu, FB = forcing(t)
            if Fu is not None and nu is not None:
                nu = nu + _coeffs(Fu)
            if FB is not None and nB is not None:
                nB = nB + _coeffs(FB)
        return nu, nB

    l2 = lambda c: math.sqrt(float(np.sum(grid.multiplicity * np.sum(np.abs(c) ** 2, axis=0))))
    ref = max(l2(u) if has_u else 0.0, l2(B) if has_B else 0.0, 1e-300)
    out_u, out_B = [], []
    t = 0.0
    if times[0] < 0:
        raise ValueError("sample times must be nonnegative")
    for target in times:
        span = target - t
        if span < 0:
            raise ValueError("sample times must be increasing")
        nsub = 0 if span == 0 else (1 if not dt else max(1, int(math.ceil(span / dt - 1e-9))))
        for _ in range(nsub):
            h = span / nsub
            E, w1, w2 = panel(h)
            nu, nB = N(t, u, B)
            ua = E * u + w1 * nu if has_u else None
            Ba = E * B + w1 * nB if has_B else None
            nua, nBa = N(t + h, ua, Ba)
            if has_u:
                u = ua + w2 * (nua - nu)
            if has_B:
                B = Ba + w2 * (nBa - nB)
            t += h
            size = max(l2(u) if has_u else 0.0, l2(B) if has_B else 0.0)
            if not np.isfinite(size) or size > guard * ref:
                raise BlowUpError(f"field norm {size:.3e} exceeded {guard:g} x initial at t = {t:.6g}", t)
        t = float(target)
        if has_u:
            out_u.append(u)
        if has_B:
            out_B.append(B)
    wrap = (lambda lst: Trajectory(grid, times, np.stack(lst)) if lst else None)
    tu = wrap(out_u)
    if kind.tag == HALL_MHD and not has_u:
        tu = Trajectory(grid, times, np.broadcast_to(static_u, (len(times),) + static_u.shape).copy())
    return tu, wrap(out_B)


def _coeffs(x):
    return x.coeffs if isinstance(x, SpectralField) else np.asarray(x)


# ---------------------------------------------------------------------------
# contraction diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeResult:
    ratio: float
    bound_factor: float
    degenerate: bool

    @property
    def C(self) -> float:
        return self.ratio / self.bound_factor if self.bound_factor > 0 else 0.0


def contraction_probe(config: SolverConfig, H1: Trajectory, H2: Trajectory,
                      free_B: Trajectory | None = None) -> ProbeResult:
    """|map(H1) - map(H2)|_Y / |H1 - H2|_Y and the factor |H1|_Y + |H2|_Y + lam.

    Magnetic (electron-MHD) map only; identical inputs give ratio 0 and are
    flagged degenerate.
    """
    if config.kind.tag != ELECTRON_MHD:
        raise ValueError("contraction_probe works on the electron-MHD map")
    times = config.times
    if free_B is None:
        _, free_B = _free_pair(config, times)
    specs = y_norm_specs(config.feasibility)
    lam = free_size(config, None, free_B)
    n1 = trajectory_norm(H1, specs)
    n2 = trajectory_norm(H2, specs)
    bound = n1 + n2 + lam
    diff = H1 - H2
    if not np.any(diff.coeffs):
        return ProbeResult(0.0, bound, True)
    _, P1 = duhamel_apply(config, H1, free_B=free_B)
    _, P2 = duhamel_apply(config, H2, free_B=free_B)
    num = trajectory_norm(P1 - P2, specs)
    return ProbeResult(num / trajectory_norm(diff, specs), bound, False)


@dataclass
class ProbeStudy:
    probes: list
    skipped: int

    @property
    def C_values(self) -> np.ndarray:
        return np.array([p.C for p in self.probes if not p.degenerate])

    @property
    def C(self) -> float:
        v = self.C_values
        return float(np.mean(v)) if v.size else math.nan

    @property
    def dispersion(self) -> float:
        """Standard deviation of the per-probe constants over their mean."""
        v = self.C_values
        return float(np.std(v) / np.mean(v)) if v.size > 1 else 0.0

    @property
    def lambda_bar(self) -> float:
        return 1.0 / (3.0 * self.C)

    @property
    def ball_radius(self) -> float:
        return 2.0 * self.C * self.lambda_bar**2

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["probe", "ratio", "bound_factor", "C_fit", "lambda_bar", "ball_radius"])
        for i, p in enumerate(p for p in self.probes if not p.degenerate):
            c = p.C
            w.writerow([i, _fmt(p.ratio), _fmt(p.bound_factor), _fmt(c),
                        _fmt(1 / (3 * c) if c > 0 else math.nan),
                        _fmt(2 / (9 * c) if c > 0 else math.nan)])
        return buf.getvalue()


def random_perturbation(config: SolverConfig, amplitude: float, seed: int, s: float = 2.0) -> Trajectory:
    """Smooth-in-time divergence-free trajectory vanishing at t = 0, for probing."""
    grid = config.grid
    times = config.times
    shape = power_law_field(grid, s, shape_seed=seed)
    prof = np.sin(0.5 * np.pi * times / times[-1])
    coeffs = prof[:, None, None, None, None] * shape.coeffs[None]
    traj = Trajectory(grid, times, coeffs)
    scale = trajectory_norm(traj, y_norm_specs(config.feasibility))
    return traj * (amplitude / scale if scale > 0 else 0.0)


def contraction_study(config: SolverConfig, pairs: Sequence[tuple[Trajectory, Trajectory]] | None = None,
                      n_pairs: int = 10, amplitude: float = 1e-2, seed: int = 0) -> ProbeStudy:
    """Probe the Lipschitz constant over several pairs; identical pairs are skipped and counted."""
    if pairs is None:
        pairs = [(random_perturbation(config, amplitude, seed + 2 * i + 1),
                  random_perturbation(config, amplitude, seed + 2 * i + 2)) for i in range(n_pairs)]
    _, free_B = _free_pair(config, config.times)
    probes, skipped = [], 0
    for H1, H2 in pairs:
        res = contraction_probe(config, H1, H2, free_B)
        if res.degenerate:
            skipped += 1
            continue
        probes.append(res)
    return ProbeStudy(probes, skipped)


# ---------------------------------------------------------------------------
# regularity gain
# ---------------------------------------------------------------------------

@dataclass
class RegularityRow:
    n: int
    data_norm: float
    perturbation_sup: float
    iterations: int


def regularity_study(alpha: float, p: float, sizes=(32, 64), *, s: float | None = None,
                     amplitude: float = 1e-2, seed: int = 0, shape_seed: int = 0,
                     distribution: str = "gaussian", T: float = 0.05, nodes: int = 25,
                     picard_tol: float = 1e-10, max_iterations: int = 60) -> list[RegularityRow]:
    """Randomized data at the threshold regularity on several grids.

    Reports |f^omega|_{H^{7/2 - 2 alpha}} and sup_t |H(t)|_{H^{7/2 - 2 alpha}}
    for each grid size.  The lattice-keyed draws make the data on a larger grid
    an extension of the data on a smaller one.
    """
    s = magnetic_threshold(alpha) if s is None else s
    sigma = 3.5 - 2 * alpha
    rows = []
    for n in sizes:
        grid = get_grid(n)
        f = randomize(power_law_field(grid, s, amplitude, shape_seed=shape_seed),
                      draw(seed, distribution, grid))
        cfg = SolverConfig(SystemKind(ELECTRON_MHD, alpha), n, T, p=p, nodes=nodes,
                           B_data=f, s_B=s, picard_tol=picard_tol, max_iterations=max_iterations)
        res = picard_solve(cfg)
        sup = float(np.max(res.H.spatial_norms(NormSpec.sobolev(sigma))))
        rows.append(RegularityRow(n, sobolev_norm(f, sigma), sup, res.report.iterations))
    return rows
