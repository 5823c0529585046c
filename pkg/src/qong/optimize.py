"""Bayesian optimization of gyroscope designs and grid sweeps.

The Bayesian loop minimizes ``log10(MDR / (deg/h))`` over powers and
coupling quality factors searched in ``log10`` coordinates, normalized to
the unit cube before they reach the Gaussian process.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .gp import GaussianProcess, Hyperparameters, expected_improvement, fit_hyperparameters
from .model import ModelParams
from .sensitivity import evaluate_point
from .steady import SolverStrategy

PENALTY = 3.0
EXHAUSTED_RADIUS = 0.1  # unit-cube half-width excluded around a collapsed trust region
DEFAULT_BOUNDS = {
    "P1": (1e-7, 0.1),
    "P2": (1e-7, 0.1),
    "Qc1": (1e5, 1e8),
    "Qc2": (1e5, 1e8),
    "chi": (1.2e6, 1.3e6),
}


class AllInfeasible(RuntimeError):
    pass


@dataclass(frozen=True)
class Dimension:
    name: str
    lower: float
    upper: float
    scale: str = "log"

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"{self.name}: lower bound must be below upper bound")
        if self.scale not in ("log", "linear"):
            raise ValueError(f"{self.name}: scale must be 'log' or 'linear'")
        if self.scale == "log" and self.lower <= 0:
            raise ValueError(f"{self.name}: log scale needs positive bounds")

    def from_unit(self, u: float) -> float:
        u = min(max(float(u), 0.0), 1.0)
        if self.scale == "log":
            lo, hi = math.log10(self.lower), math.log10(self.upper)
            return 10.0 ** (lo + u * (hi - lo))
        return self.lower + u * (self.upper - self.lower)

    def to_unit(self, x: float) -> float:
        if self.scale == "log":
            lo, hi = math.log10(self.lower), math.log10(self.upper)
            return (math.log10(x) - lo) / (hi - lo)
        return (x - self.lower) / (self.upper - self.lower)


_SCHEME_DIMS = {
    "second_harmonic": ("P2", "Qc1", "Qc2"),
    "fundamental": ("P1", "Qc1", "Qc2"),
    "dual": ("P1", "P2", "Qc1", "Qc2"),
}
_SCHEME_ZERO = {"second_harmonic": "P1", "fundamental": "P2"}


@dataclass(frozen=True)
class SearchSpace:
    dimensions: tuple[Dimension, ...]
    base: ModelParams = field(default_factory=ModelParams)
    scheme: str | None = None

    def __post_init__(self):
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise ValueError("duplicate search dimension")
        zero = _SCHEME_ZERO.get(self.scheme)
        if zero is not None and zero in names:
            raise ValueError(f"{zero} is fixed to 0 under the {self.scheme} scheme")

    @property
    def dim(self) -> int:
        return len(self.dimensions)

    @property
    def names(self) -> list[str]:
        return [d.name for d in self.dimensions]

    def point(self, unit) -> dict[str, float]:
        return {d.name: d.from_unit(u) for d, u in zip(self.dimensions, unit)}

    def params(self, point: dict[str, float]) -> ModelParams:
        values = dict(point)
        zero = _SCHEME_ZERO.get(self.scheme)
        if zero is not None:
            values[zero] = 0.0
        return self.base.updated(**values)


def default_space(scheme: str, base: ModelParams | None = None, include_chi: bool = False,
                  bounds: dict | None = None) -> SearchSpace:
    if scheme not in _SCHEME_DIMS:
        raise ValueError(f"unknown scheme {scheme!r}")
    bounds = {**DEFAULT_BOUNDS, **(bounds or {})}
    names = list(_SCHEME_DIMS[scheme]) + (["chi"] if include_chi else [])
    dims = tuple(Dimension(n, *bounds[n], scale="linear" if n == "chi" else "log") for n in names)
    return SearchSpace(dims, base or ModelParams(), scheme)


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    point: dict
    unit: tuple
    objective: float  # log10(MDR deg/h), nan when infeasible
    feasible: bool
    best_so_far: float
    reason: str = ""
    phase: str = "initial"  # or "acquisition" / "local" / "random"


@dataclass
class OptimizationTrace:
    entries: list[TraceEntry]
    hyperparameters: list[dict]
    seed: int
    names: list[str]

    @property
    def best(self) -> TraceEntry:
        feasible = [e for e in self.entries if e.feasible]
        if not feasible:
            raise AllInfeasible("no feasible evaluation")
        return min(feasible, key=lambda e: (e.objective, e.iteration))

    @property
    def best_mdr(self) -> float:
        return 10.0 ** self.best.objective


class PhysicsObjective:
    """log10 MDR (deg/h) of a design; ``None`` when the point is infeasible.

    Points whose current covariance had to be regularized are rejected too:
    there the MDR reflects the regularization floor rather than the model,
    and a search would otherwise chase it.
    """

    def __init__(self, space: SearchSpace, strategy: SolverStrategy = SolverStrategy(),
                 convention: str = "input_referred"):
        self.space = space
        self.strategy = strategy
        self.convention = convention

    def __call__(self, point: dict[str, float]):
        rep = evaluate_point(self.space.params(point), self.strategy, self.convention)
        if not rep.feasible:
            return None, rep.reason
        if rep.regularized:
            return None, "regularized_covariance"
        return math.log10(rep.omega_min_deg_per_hour), ""


def maximin_lhs(n: int, dim: int, rng: np.random.Generator, candidates: int = 32) -> np.ndarray:
    """Latin hypercube with the largest minimum pairwise distance among seeded draws."""
    best, best_d = None, -1.0
    for _ in range(candidates):
        sample = qmc.LatinHypercube(d=dim, seed=int(rng.integers(2**63))).random(n)
        if n > 1:
            diff = sample[:, None, :] - sample[None, :, :]
            dist = np.sqrt(np.sum(diff * diff, -1))
            d = float(np.min(dist[np.triu_indices(n, 1)]))
        else:
            d = 0.0
        if d > best_d:
            best, best_d = sample, d
    return best


def _coordinate_descent(f: Callable, x0: np.ndarray, lower=0.0, upper=1.0, step: float = 0.05,
                        min_step: float = 1e-3, max_sweeps: int = 50) -> tuple[np.ndarray, float]:
    """Maximize ``f`` inside the box ``[lower, upper]`` by axis-aligned pattern moves."""
    lower = np.broadcast_to(np.asarray(lower, float), x0.shape)
    upper = np.broadcast_to(np.asarray(upper, float), x0.shape)
    x = x0.copy()
    fx = f(x[None, :])[0]
    for _ in range(max_sweeps):
        improved = False
        for i in range(len(x)):
            for s in (step, -step):
                y = x.copy()
                y[i] = min(max(y[i] + s, lower[i]), upper[i])
                fy = f(y[None, :])[0]
                if fy > fx:
                    x, fx, improved = y, fy, True
                    break
        if not improved:
            step *= 0.5
            if step < min_step:
                break
    return x, fx


@dataclass
class TrustRegion:
    """Cube around the incumbent used for local acquisitions.

    The side doubles after ``success_tol`` consecutive improvements and
    halves after ``failure_tol`` consecutive misses. Once it falls below
    ``min_length`` it is reset to full size and :meth:`update` reports the
    collapse, so the caller can move the region elsewhere.
    """

    length: float = 0.2
    min_length: float = 2.0 ** -15
    max_length: float = 0.8
    success_tol: int = 2
    failure_tol: int = 3
    successes: int = 0
    failures: int = 0

    def update(self, improved: bool) -> bool:
        if improved:
            self.successes, self.failures = self.successes + 1, 0
        else:
            self.successes, self.failures = 0, self.failures + 1
        if self.successes >= self.success_tol:
            self.length, self.successes = min(2.0 * self.length, self.max_length), 0
        if self.failures >= self.failure_tol:
            self.length, self.failures = self.length / 2.0, 0
        if self.length < self.min_length:
            self.length, self.successes, self.failures = TrustRegion.length, 0, 0
            return True
        return False


def _maximize_ei(gp: GaussianProcess, incumbent: float, cands: np.ndarray, lower, upper, step: float,
                 min_step: float) -> np.ndarray:
    def acq(Z):
        m, s = gp.predict(Z)
        return expected_improvement(m, s, incumbent)

    ei = acq(cands)
    best_z, best_ei = cands[int(np.argmax(ei))], -1.0
    for i in np.argsort(-ei, kind="stable")[:3]:
        z, val = _coordinate_descent(acq, cands[i], lower, upper, step, min_step)
        if val > best_ei:
            best_z, best_ei = z, val
    return best_z


def bayes_optimize(space: SearchSpace, budget: int = 150, seed: int = 0, objective: Callable | None = None,
                   n_initial: int | None = None, n_candidates: int = 512, refit_every: int = 5,
                   global_every: int = 3, strategy: SolverStrategy = SolverStrategy(),
                   convention: str = "input_referred", callback: Callable | None = None) -> OptimizationTrace:
    """GP/expected-improvement minimization, deterministic given ``seed``.

    After a maximin Latin-hypercube design, every ``global_every``-th
    proposal maximizes EI of a GP fitted to all data over the whole cube;
    the others maximize EI of a GP fitted to the points near the incumbent,
    inside a trust region that contracts on failure. The local steps are
    what resolves optima narrower than any global lengthscale.

    ``objective(point_dict)`` returns ``(value, reason)`` with ``value=None``
    for infeasible points; by default it is the log10 MDR of the design.
    Infeasible points enter the GP at ``worst feasible + 3``.
    """
    d = space.dim
    n0 = n_initial if n_initial is not None else 2 * d + 2
    if budget < n0:
        raise ValueError(f"budget {budget} is smaller than the initial design ({n0})")
    objective = objective or PhysicsObjective(space, strategy, convention)
    rng = np.random.Generator(np.random.Philox(key=seed))
    U: list[np.ndarray] = []
    values: list[float | None] = []
    entries: list[TraceEntry] = []
    hyper_log: list[dict] = []
    best = math.inf
    hyp: Hyperparameters | None = None
    region = TrustRegion()
    exhausted: list[np.ndarray] = []  # centers of collapsed regions

    def record(u, phase):
        nonlocal best
        point = space.point(u)
        out = objective(point)
        value, reason = out if isinstance(out, tuple) else (out, "")
        feasible = value is not None and math.isfinite(value)
        improved = feasible and value < best - 1e-6 * max(1.0, abs(best))
        if feasible:
            best = min(best, value)
        U.append(np.asarray(u, float))
        values.append(value if feasible else None)
        entry = TraceEntry(len(entries), point, tuple(float(v) for v in u),
                           float(value) if feasible else math.nan, feasible, best, reason, phase)
        entries.append(entry)
        if callback is not None:
            callback(entry)
        return improved

    for u in maximin_lhs(n0, d, rng):
        record(u, "initial")

    while len(entries) < budget:
        feasible = [v for v in values if v is not None]
        if not feasible:
            record(rng.uniform(size=d), "random")
            hyper_log.append({})
            continue
        penalty = max(feasible) + PENALTY
        y = np.array([v if v is not None else penalty for v in values])
        X = np.array(U)
        incumbent = float(np.min(y))
        step = len(entries) - n0

        if step % global_every == 0:
            if hyp is None or step % refit_every == 0:
                hyp = fit_hyperparameters(X, y, rng=rng, initial=hyp)
            gp = GaussianProcess(X, y, hyp)
            hyper_log.append({**hyp.as_dict(), "jitter": gp.jitter_used, "region": 1.0})
            cands = rng.uniform(size=(n_candidates, d))
            u = _maximize_ei(gp, incumbent, cands, 0.0, 1.0, 0.05, 1e-3)
            if np.min(np.max(np.abs(X - u), axis=1)) < 1e-9:
                # already sampled: take the most uncertain candidate instead
                u = cands[int(np.argmax(gp.predict(cands)[1]))]
            record(u, "acquisition")
            continue

        # local step in coordinates z = (u - c) / half, the region being |z| <= 1;
        # the center is the best point away from regions that already collapsed
        fresh = np.ones(len(X), bool)
        for e in exhausted:
            fresh &= np.max(np.abs(X - e), axis=1) > EXHAUSTED_RADIUS
        pool = np.flatnonzero(fresh) if fresh.any() else np.arange(len(X))
        c = X[pool[int(np.argmin(y[pool]))]]
        half = region.length / 2.0
        lo = (np.clip(c - half, 0.0, 1.0) - c) / half
        hi = (np.clip(c + half, 0.0, 1.0) - c) / half
        dist = np.max(np.abs(X - c), axis=1) / half
        near = np.flatnonzero(dist <= 2.0)
        if len(near) < n0:
            near = np.argsort(dist, kind="stable")[:n0]
        Z = (X[near] - c) / half
        local = fit_hyperparameters(Z, y[near], rng=rng, restarts=2)
        gp = GaussianProcess(Z, y[near], local)
        hyper_log.append({**local.as_dict(), "jitter": gp.jitter_used, "region": region.length})
        cands = lo + (hi - lo) * rng.uniform(size=(n_candidates, d))
        z = _maximize_ei(gp, incumbent, cands, lo, hi, 0.1, 1e-3)
        if np.min(np.max(np.abs(Z - z), axis=1)) < 1e-6:
            z = cands[int(np.argmax(gp.predict(cands)[1]))]
        if region.update(record(np.clip(c + half * z, 0.0, 1.0), "local")):
            exhausted.append(c)

    trace = OptimizationTrace(entries, hyper_log, seed, space.names)
    if not any(e.feasible for e in entries):
        raise AllInfeasible(f"no feasible point in {budget} evaluations")
    return trace


# --------------------------------------------------------------------------
# grid sweeps

@dataclass(frozen=True)
class Axis:
    name: str
    lower: float
    upper: float
    count: int
    scale: str = "linear"

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("axis count must be >= 1")
        if self.count > 1 and self.lower == self.upper:
            raise ValueError("axis values must be strictly monotone")
        if self.scale not in ("linear", "log"):
            raise ValueError("axis scale must be 'linear' or 'log'")
        if self.scale == "log" and min(self.lower, self.upper) <= 0:
            raise ValueError("log axis needs positive bounds")

    @property
    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([float(self.lower)])
        if self.scale == "log":
            return np.geomspace(self.lower, self.upper, self.count)
        return np.linspace(self.lower, self.upper, self.count)


SUMMARY_COLUMNS = ("mdr_deg_per_hour", "fisher", "i1_mean_A", "i2_mean_A",
                   "squeezing_db_fund_phase", "squeezing_db_sh_amp", "feasible")


def summarize(report) -> dict:
    if not report.feasible:
        row = {k: math.nan for k in SUMMARY_COLUMNS}
        row["feasible"] = False
        row["reason"] = report.reason
        return row
    sq = report.squeezing
    return {
        "mdr_deg_per_hour": float(report.omega_min_deg_per_hour),
        "fisher": float(report.fisher),
        "i1_mean_A": float(report.mean_currents[0]),
        "i2_mean_A": float(report.mean_currents[1]),
        "squeezing_db_fund_phase": float(sq.fundamental.phase_db),
        "squeezing_db_sh_amp": float(sq.second_harmonic.amplitude_db),
        "feasible": True,
        "reason": "",
    }


def _evaluate_cell(task):
    params, strategy, convention = task
    return summarize(evaluate_point(params, strategy, convention))


@dataclass
class SweepGrid:
    axes: list[Axis]
    rows: list[dict]  # outer axis major; each row carries its axis values

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.count for a in self.axes)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float).reshape(self.shape)


def sweep_grid(base: ModelParams, axes: Sequence[Axis], jobs: int = 1,
               strategy: SolverStrategy = SolverStrategy(), convention: str = "input_referred") -> SweepGrid:
    """Evaluate every grid point independently; infeasible cells are kept and flagged.

    Results are assembled in grid order, so the output does not depend on
    ``jobs``.
    """
    axes = list(axes)
    if not 1 <= len(axes) <= 2:
        raise ValueError("sweeps take one or two axes")
    coords = [dict(zip([a.name for a in axes], combo))
              for combo in np.array(np.meshgrid(*[a.values for a in axes], indexing="ij")).reshape(len(axes), -1).T]
    coords = [{k: float(v) for k, v in c.items()} for c in coords]
    tasks = [(base.updated(**c), strategy, convention) for c in coords]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(_evaluate_cell, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        summaries = [_evaluate_cell(t) for t in tasks]
    rows = [{**c, **s} for c, s in zip(coords, summaries)]
    return SweepGrid(axes, rows)
