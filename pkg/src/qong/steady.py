"""Classical fixed points of the four coupled mean-field equations.

Mode order is ``[a1_cw, a1_ccw, a2_cw, a2_ccw]``. The real 8-vector used by
the Newton solver and by every Jacobian interleaves real and imaginary parts,
``[X1cw, Y1cw, X1ccw, Y1ccw, X2cw, Y2cw, X2ccw, Y2ccw]`` with ``X = Re a`` and
``Y = Im a``. The same ordering is the cavity quadrature basis used by
:mod:`qong.fluctuations`.

Sign conventions: the dynamics are ``da/dt = g(a)`` and the residual is
``F = -g``. :func:`jacobian` differentiates ``F``; stability is judged on the
dynamical Jacobian ``-jacobian``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams


class NoConvergence(RuntimeError):
    """No multistart Newton run reached the residual tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class NoBracket(ValueError):
    """The stability verdict is the same at both ends of a power bracket."""


class BranchLost(RuntimeError):
    """Newton failed part way through a continuation."""

    def __init__(self, message, index, partial):
        super().__init__(message)
        self.index = index
        self.partial = partial


class Diverged(RuntimeError):
    """Time integration blew up."""


class Stability(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"


@dataclass(frozen=True)
class ModeAmplitudes:
    """Intracavity amplitudes (sqrt photons) and waveguide inputs (sqrt(photons/s))."""

    cavity: np.ndarray
    inputs: np.ndarray

    @property
    def a1_cw(self) -> complex:
        return complex(self.cavity[0])

    @property
    def a1_ccw(self) -> complex:
        return complex(self.cavity[1])

    @property
    def a2_cw(self) -> complex:
        return complex(self.cavity[2])

    @property
    def a2_ccw(self) -> complex:
        return complex(self.cavity[3])

    @classmethod
    def from_params(cls, cavity, params: ModelParams) -> "ModeAmplitudes":
        return cls(np.asarray(cavity, dtype=complex).copy(), np.asarray(params.input_amplitudes()))


@dataclass(frozen=True)
class SteadyState:
    amplitudes: ModeAmplitudes
    residual_norm: float
    tolerance: float
    jacobian_eigs: np.ndarray
    stability: Stability
    output_amplitudes: np.ndarray
    iterations: int = 0

    @property
    def cavity(self) -> np.ndarray:
        return self.amplitudes.cavity

    @property
    def max_growth_rate(self) -> float:
        return float(np.max(self.jacobian_eigs.real))

    @property
    def is_stable(self) -> bool:
        return self.stability is Stability.STABLE


@dataclass(frozen=True)
class SolverStrategy:
    """Knobs of the multistart damped Newton solver.

    ``seed`` keys a counter-based generator so that the random starts for a
    given parameter point do not depend on scheduling.
    """

    n_random: int = 16
    seed: int = 0
    max_iter: int = 80
    max_halvings: int = 30
    tol_factor: float = 1e-10
    merge_rtol: float = 1e-6
    margin_factor: float = 1e-6
    ramp_steps: int = 40
    ramp_start: float = 1e-4


# --------------------------------------------------------------------------
# real/complex packing

def to_real(a) -> np.ndarray:
    a = np.asarray(a)
    x = np.empty(2 * a.size, dtype=a.real.dtype)
    x[0::2] = a.real
    x[1::2] = a.imag
    return x


def to_complex(x) -> np.ndarray:
    x = np.asarray(x)
    return x[0::2] + 1j * x[1::2]


def _cavity(state) -> np.ndarray:
    if isinstance(state, ModeAmplitudes):
        return state.cavity
    if isinstance(state, SteadyState):
        return state.cavity
    return np.asarray(state)


class _Coefficients:
    """Rates of one parameter point, precomputed once per solve."""

    def __init__(self, params: ModelParams):
        k1, k2 = params.kappa
        g1, g2 = params.gamma
        d1 = params.delta1
        d2 = 2.0 * d1
        res = params.resonator
        self.kappa = np.array([k1, k1, k2, k2])
        self.gamma = np.array([g1, g1, g2, g2])
        # linear diagonal of F: (Gamma - i*delta) for cw, (Gamma + i*delta) for ccw
        G1, G2 = 0.5 * (k1 + g1), 0.5 * (k2 + g2)
        self.diag = np.array([G1 - 1j * d1, G1 + 1j * d1, G2 - 1j * d2, G2 + 1j * d2])
        self.beta = np.array([res.beta1, res.beta1, res.beta2, res.beta2])
        self.chi = res.chi
        self.b = np.asarray(params.input_amplitudes(), dtype=complex)
        self.drive = np.sqrt(self.kappa) * self.b
        self.margin = 0.0

    def residual(self, a):
        d, beta, chi = self.diag, self.beta, self.chi
        swap = a[[1, 0, 3, 2]]
        f = d * a - 1j * beta * swap - self.drive
        f[0] -= chi * np.conj(a[0]) * a[2]
        f[1] -= chi * np.conj(a[1]) * a[3]
        f[2] += 0.5 * chi * a[0] ** 2
        f[3] += 0.5 * chi * a[1] ** 2
        return f

    def residual_ld(self, x_ld):
        """Residual in extended precision; input and output are real 8-vectors."""
        a = x_ld[0::2].astype(np.clongdouble) + 1j * x_ld[1::2].astype(np.clongdouble)
        d = self.diag.astype(np.clongdouble)
        beta = self.beta.astype(np.longdouble)
        chi = np.longdouble(self.chi)
        drv = (np.sqrt(self.kappa.astype(np.longdouble))
               * self.b.astype(np.clongdouble))
        swap = a[[1, 0, 3, 2]]
        f = d * a - 1j * beta * swap - drv
        f[0] -= chi * np.conj(a[0]) * a[2]
        f[1] -= chi * np.conj(a[1]) * a[3]
        f[2] += np.longdouble(0.5) * chi * a[0] ** 2
        f[3] += np.longdouble(0.5) * chi * a[1] ** 2
        out = np.empty(8, dtype=np.longdouble)
        out[0::2] = f.real
        out[1::2] = f.imag
        return out

    def jacobian(self, a):
        J = np.zeros((8, 8))

        def mul(i, j, c):
            # d(c*z)/d(Re z, Im z)
            J[2 * i, 2 * j] += c.real
            J[2 * i, 2 * j + 1] -= c.imag
            J[2 * i + 1, 2 * j] += c.imag
            J[2 * i + 1, 2 * j + 1] += c.real

        def conjmul(i, j, w):
            # d(w*conj(z))/d(Re z, Im z)
            J[2 * i, 2 * j] += w.real
            J[2 * i, 2 * j + 1] += w.imag
            J[2 * i + 1, 2 * j] += w.imag
            J[2 * i + 1, 2 * j + 1] -= w.real

        partner = (1, 0, 3, 2)
        for m in range(4):
            mul(m, m, complex(self.diag[m]))
            mul(m, partner[m], complex(-1j * self.beta[m]))
        chi = self.chi
        for f_idx, (a1, a2) in ((0, (0, 2)), (1, (1, 3))):
            conjmul(f_idx, a1, complex(-chi * a[a2]))
            mul(f_idx, a2, complex(-chi * np.conj(a[a1])))
        mul(2, 0, complex(chi * a[0]))
        mul(3, 1, complex(chi * a[1]))
        return J


def residual(state, params: ModelParams) -> np.ndarray:
    """Residuals F1..F4 of the mean-field equations (complex 4-vector)."""
    return _Coefficients(params).residual(np.asarray(_cavity(state), dtype=complex))


def dynamics(state, params: ModelParams) -> np.ndarray:
    """Time derivative da/dt of the noise-free mean-field equations."""
    return -residual(state, params)


def jacobian(state, params: ModelParams) -> np.ndarray:
    """8x8 Jacobian of the real/imag-expanded residual F."""
    return _Coefficients(params).jacobian(np.asarray(_cavity(state), dtype=complex))


def dynamical_jacobian(state, params: ModelParams) -> np.ndarray:
    return -jacobian(state, params)


def stability_margin(params: ModelParams, factor: float = 1e-6) -> float:
    return factor * (params.kappa[0] + params.gamma[0])


def classify_stability(jac_dyn, margin: float = 0.0) -> Stability:
    """Verdict from the dynamical Jacobian (not the residual Jacobian)."""
    eigs = np.linalg.eigvals(np.asarray(jac_dyn, dtype=float))
    if not np.all(np.isfinite(eigs)):
        raise np.linalg.LinAlgError("non-finite eigenvalues")
    top = float(np.max(eigs.real))
    if top < -margin:
        return Stability.STABLE
    if top > margin:
        return Stability.UNSTABLE
    return Stability.MARGINAL


def output_amplitudes(cavity, params: ModelParams) -> np.ndarray:
    """b_out = b_in - sqrt(kappa) a for every mode."""
    k1, k2 = params.kappa
    return np.asarray(params.input_amplitudes()) - np.sqrt([k1, k1, k2, k2]) * np.asarray(cavity)


def linear_solution(params: ModelParams) -> np.ndarray:
    """Steady state with the nonlinearity switched off (exact for chi = 0)."""
    co = _Coefficients(params)
    A = np.diag(co.diag).astype(complex)
    for m, p in enumerate((1, 0, 3, 2)):
        A[m, p] = -1j * co.beta[m]
    return np.linalg.solve(A, co.drive)


def solver_tolerance(params: ModelParams, factor: float = 1e-10) -> float:
    return factor * max(1.0, float(np.linalg.norm(params.input_amplitudes())))


# --------------------------------------------------------------------------
# Newton

@dataclass
class NewtonResult:
    x: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)


def newton(co: _Coefficients, x0, tol: float, max_iter: int = 80, max_halvings: int = 30) -> NewtonResult:
    """Damped Newton on the real 8-dimensional system.

    Iterates are carried in extended precision. The residual is large-scale
    cancellation (terms of order 1e15 summing to nearly zero), so double
    precision alone cannot reach the absolute tolerance at high power.
    """
    x = np.asarray(x0, dtype=np.longdouble).copy()
    r = co.residual_ld(x)
    rn = float(np.sqrt(np.sum(r * r)))
    history = [rn]
    for it in range(1, max_iter + 1):
        if not np.isfinite(rn):
            break
        if rn <= tol:
            return NewtonResult(x.astype(float), rn, it - 1, True, history)
        J = co.jacobian(to_complex(x.astype(float)))
        try:
            step = np.linalg.solve(J, -r.astype(float))
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, -r.astype(float), rcond=None)[0]
        if not np.all(np.isfinite(step)):
            break
        t = 1.0
        accepted = False
        for _ in range(max_halvings + 1):
            x_new = x + np.longdouble(t) * step.astype(np.longdouble)
            r_new = co.residual_ld(x_new)
            rn_new = float(np.sqrt(np.sum(r_new * r_new)))
            if np.isfinite(rn_new) and rn_new < rn:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        x, r, rn = x_new, r_new, rn_new
        history.append(rn)
    return NewtonResult(x.astype(float), rn, len(history) - 1, rn <= tol, history)


def _make_state(co: _Coefficients, params: ModelParams, res: NewtonResult, tol: float, margin: float) -> SteadyState:
    a = to_complex(res.x)
    Jd = -co.jacobian(a)
    eigs = np.linalg.eigvals(Jd)
    top = float(np.max(eigs.real))
    if top < -margin:
        verdict = Stability.STABLE
    elif top > margin:
        verdict = Stability.UNSTABLE
    else:
        verdict = Stability.MARGINAL
    return SteadyState(
        amplitudes=ModeAmplitudes(a, co.b.copy()),
        residual_norm=res.residual_norm,
        tolerance=tol,
        jacobian_eigs=eigs,
        stability=verdict,
        output_amplitudes=co.b - np.sqrt(co.kappa) * a,
        iterations=res.iterations,
    )


def refine(params: ModelParams, guess, strategy: SolverStrategy = SolverStrategy()) -> SteadyState:
    """Newton from a single start; raises :class:`NoConvergence` on failure."""
    co = _Coefficients(params)
    tol = solver_tolerance(params, strategy.tol_factor)
    res = newton(co, to_real(np.asarray(_cavity(guess), dtype=complex)), tol, strategy.max_iter, strategy.max_halvings)
    if not res.converged:
        raise NoConvergence(f"Newton stalled at residual {res.residual_norm:.3e} (tol {tol:.3e})",
                            [res.history])
    return _make_state(co, params, res, tol, stability_margin(params, strategy.margin_factor))


def _start_scale(params: ModelParams) -> float:
    k1, k2 = params.kappa
    g1, g2 = params.gamma
    b = np.abs(params.input_amplitudes())
    scale = max(b[0] / math.sqrt(k1), b[2] / math.sqrt(k2))
    chi = params.resonator.chi
    if chi > 0:
        scale = max(scale, 0.5 * (k1 + g1) / chi, 0.5 * (k2 + g2) / chi)
    return scale if scale > 0 else 1.0


def starting_points(params: ModelParams, strategy: SolverStrategy = SolverStrategy()) -> list[np.ndarray]:
    """Zero state, linear solution and seeded random starts (complex 4-vectors)."""
    starts = [np.zeros(4, complex), linear_solution(params)]
    rng = np.random.Generator(np.random.Philox(key=strategy.seed))
    scale = _start_scale(params)
    for _ in range(strategy.n_random):
        z = rng.standard_normal(8) * scale
        starts.append(z[0::2] + 1j * z[1::2])
    return starts


def _canonical_key(a: np.ndarray) -> tuple:
    return tuple(np.round(to_real(a) / max(1.0, float(np.max(np.abs(a)))), 9))


def solve_steady(params: ModelParams, strategy: SolverStrategy = SolverStrategy()) -> list[SteadyState]:
    """All distinct fixed points reached from the multistart set.

    The list is sorted canonically (stable first, then by amplitude pattern)
    so results never depend on start order.
    """
    co = _Coefficients(params)
    tol = solver_tolerance(params, strategy.tol_factor)
    margin = stability_margin(params, strategy.margin_factor)
    found: list[SteadyState] = []
    diagnostics = []
    for k, start in enumerate(starting_points(params, strategy)):
        res = newton(co, to_real(start), tol, strategy.max_iter, strategy.max_halvings)
        diagnostics.append({"start": k, "converged": res.converged, "residual": res.residual_norm,
                            "iterations": res.iterations})
        if not res.converged:
            continue
        a = to_complex(res.x)
        if any(np.linalg.norm(a - s.cavity) <= strategy.merge_rtol * max(1.0, np.linalg.norm(s.cavity))
               for s in found):
            continue
        found.append(_make_state(co, params, res, tol, margin))
    if not found:
        raise NoConvergence("no start converged", diagnostics)
    order = {Stability.STABLE: 0, Stability.MARGINAL: 1, Stability.UNSTABLE: 2}
    found.sort(key=lambda s: (order[s.stability], _canonical_key(-s.cavity)))
    return found


def _relative_distance(a, b) -> float:
    return float(np.linalg.norm(a - b) / max(1.0, np.linalg.norm(b)))


def _scaled_powers(params: ModelParams, factor: float) -> ModelParams:
    return params.updated(P1=params.drive.P1 * factor, P2=params.drive.P2 * factor)


def operating_point(params: ModelParams, strategy: SolverStrategy = SolverStrategy()) -> SteadyState:
    """The steady state a device reaches when its drive is ramped up from zero.

    Powers are scaled together from ``ramp_start`` to 1 on a geometric grid.
    Each step restarts Newton from the previous state. When that state
    stops being stable (or Newton fails), the full multistart set is solved
    and the stable solution closest to the previous state is taken; ties
    between symmetry-related solutions go to the canonically first one.
    The returned state may be unstable when no stable solution exists.
    """
    if params.drive.total_power == 0:
        return refine(params, np.zeros(4, complex), strategy)
    factors = np.geomspace(strategy.ramp_start, 1.0, strategy.ramp_steps)
    prev = None
    state = None
    for f in factors:
        p = _scaled_powers(params, float(f)) if f != 1.0 else params
        state = None
        if prev is not None:
            guess = prev.cavity
            try:
                cand = refine(p, guess, strategy)
            except NoConvergence:
                cand = None
            if cand is not None and cand.is_stable and _relative_distance(cand.cavity, guess) < 0.5:
                state = cand
        if state is None:
            sols = solve_steady(p, strategy)
            stable = [s for s in sols if s.is_stable]
            pool = stable or sols
            if prev is None:
                state = pool[0] if stable else min(pool, key=lambda s: s.max_growth_rate)
            else:
                dists = [_relative_distance(s.cavity, prev.cavity) for s in pool]
                best = min(dists)
                # symmetry partners are equidistant up to round-off; the
                # pool is already in canonical order so the first one wins
                state = next(s for s, d in zip(pool, dists) if d <= best * (1 + 1e-6) + 1e-12)
        prev = state
    return state


def continue_branch(params: ModelParams, sweep_parameter: str, grid, strategy: SolverStrategy = SolverStrategy(),
                    start: SteadyState | None = None) -> list[SteadyState]:
    """Natural-parameter continuation along ``grid`` without branch switching.

    The first point is the operating point (or ``start`` if given); every
    later point is Newton-refined from its predecessor.
    """
    grid = list(grid)
    if not grid:
        return []
    p0 = params.updated(**{sweep_parameter: grid[0]})
    branch = [start if start is not None else operating_point(p0, strategy)]
    for i, value in enumerate(grid[1:], start=1):
        p = params.updated(**{sweep_parameter: value})
        try:
            branch.append(refine(p, branch[-1].cavity, strategy))
        except NoConvergence as exc:
            raise BranchLost(f"Newton failed at {sweep_parameter}={value}", i, branch) from exc
    return branch


# --------------------------------------------------------------------------
# critical power

SCHEMES = ("second_harmonic", "fundamental", "dual")


def _scheme_params(template: ModelParams, scheme: str, power: float) -> ModelParams:
    if scheme == "second_harmonic":
        return template.updated(P1=0.0, P2=power)
    if scheme == "fundamental":
        return template.updated(P1=power, P2=0.0)
    if scheme == "dual":
        total = template.drive.total_power
        frac = template.drive.P2 / total if total > 0 else 0.5
        return template.updated(P1=power * (1 - frac), P2=power * frac)
    raise ValueError(f"unknown scheme {scheme!r}")


@dataclass(frozen=True)
class CriticalPower:
    Pc: float
    bracket: tuple[float, float]
    eigs_below: np.ndarray
    eigs_above: np.ndarray
    evaluations: int


def critical_power(template: ModelParams, scheme: str, bracket=(1e-4, 0.1),
                   strategy: SolverStrategy = SolverStrategy(), rtol: float = 1e-4,
                   substeps: int = 6) -> CriticalPower:
    """Bisection for the power at which the low-power branch changes stability.

    The branch is the one continuously connected to the linear response at
    weak drive; it is followed by Newton continuation only, so a jump onto an
    oscillating solution never masks the instability.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not 0 < lo < hi:
        raise ValueError("bracket must satisfy 0 < lo < hi")
    # seed the branch at low power by a short ramp from the linear state
    s_lo = _follow(template, scheme, lo * 1e-3, lo, None, strategy, substeps)
    s_hi = _follow(template, scheme, lo, hi, s_lo, strategy, 4 * substeps)
    count = 2
    if s_lo.is_stable == s_hi.is_stable:
        raise NoBracket(f"branch is {s_lo.stability.value} at both {lo:g} W and {hi:g} W")
    while (hi - lo) > rtol * hi:
        mid = math.sqrt(lo * hi) if hi / lo > 4 else 0.5 * (lo + hi)
        s_mid = _follow(template, scheme, lo, mid, s_lo, strategy, substeps)
        count += 1
        if s_mid.is_stable == s_lo.is_stable:
            lo, s_lo = mid, s_mid
        else:
            hi, s_hi = mid, s_mid
    return CriticalPower(0.5 * (lo + hi), (lo, hi), s_lo.jacobian_eigs, s_hi.jacobian_eigs, count)


def _follow(template, scheme, p_from, p_to, state, strategy, steps) -> SteadyState:
    powers = np.geomspace(p_from, p_to, steps + 1)
    if state is None:
        p0 = _scheme_params(template, scheme, powers[0])
        state = refine(p0, linear_solution(p0), strategy)
    for P in powers[1:]:
        state = refine(_scheme_params(template, scheme, float(P)), state.cavity, strategy)
    return state


# --------------------------------------------------------------------------
# time-domain oracle

@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (n_samples, 4) complex


def integrate_classical(params: ModelParams, initial, duration: float, dt: float | None = None,
                        samples: int = 200, blowup: float = 1e12) -> Trajectory:
    """Fixed-step classical RK4 integration of the noise-free dynamics."""
    co = _Coefficients(params)
    fastest = float(max(np.max(co.kappa), np.max(co.gamma), np.max(np.abs(co.diag))))
    dt_max = 0.1 / fastest
    if dt is None:
        dt = dt_max
    elif dt > dt_max * (1 + 1e-12):
        raise ValueError(f"dt={dt:g} does not resolve the fastest rate (need <= {dt_max:g})")
    n = max(1, int(math.ceil(duration / dt)))
    dt = duration / n
    a = np.asarray(_cavity(initial), dtype=complex).copy()
    stride = max(1, n // samples)
    times, states = [0.0], [a.copy()]

    def g(z):
        return -co.residual(z)

    for k in range(1, n + 1):
        k1 = g(a)
        k2 = g(a + 0.5 * dt * k1)
        k3 = g(a + 0.5 * dt * k2)
        k4 = g(a + dt * k3)
        a = a + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(a)) or np.max(np.abs(a)) > blowup:
            raise Diverged(f"amplitude exceeded {blowup:g} at t={k * dt:g}")
        if k % stride == 0 or k == n:
            times.append(k * dt)
            states.append(a.copy())
    return Trajectory(np.array(times), np.array(states))
