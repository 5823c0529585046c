"""Mean currents, their rotation derivative, Fisher information and MDR.

Two conventions exist for the mean differential currents:

``"input_referred"`` (default)
    The current is the current-coefficient vector applied to the coherent
    input quadratures, ``<i> = C u_coh``. This is the convention under which
    the nonlinear designs reach their quoted sensitivities and currents.
``"classical"``
    The current is evaluated directly on the classical output fields,
    ``-2 A Im(conj(b_cw) b_ccw)``. For a linear cavity the input-referred
    current is exactly twice this value.

The linear-gyroscope baseline always uses the classical convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .fluctuations import (
    CurrentCoefficients,
    NoiseTransfer,
    SingularResponse,
    SqueezingReport,
    current_coefficients,
    current_covariance,
    input_matrix,
    input_output_transfer,
    squeezing_levels,
)
from .model import DEG_PER_HOUR, ModelParams, omega_min_from_delta, photon_flux
from .steady import (
    NoConvergence,
    SolverStrategy,
    SteadyState,
    Stability,
    dynamical_jacobian,
    operating_point,
    refine,
)

CONVENTIONS = ("input_referred", "classical")


class BranchJump(RuntimeError):
    """A re-solved steady state at a shifted rotation is not continuously connected."""


class SingularCovariance(np.linalg.LinAlgError):
    pass


class ZeroInformation(ValueError):
    pass


@dataclass(frozen=True)
class Gradient:
    value: np.ndarray  # d<i>/d delta, A*s
    h: float
    coarse: np.ndarray
    fine: np.ndarray
    halvings: int


@dataclass(frozen=True)
class FisherResult:
    value: float
    regularized: bool


@dataclass(frozen=True)
class SensitivityReport:
    params: ModelParams
    steady: SteadyState
    convention: str
    mean_currents: np.ndarray
    classical_currents: np.ndarray
    current_gradient: np.ndarray
    gradient_step: float
    covariance: np.ndarray
    fisher: float
    regularized: bool
    delta_min: float
    omega_min_rad_s: float
    omega_min_deg_per_hour: float
    squeezing: SqueezingReport
    coefficients: CurrentCoefficients = field(repr=False)
    transfer: NoiseTransfer = field(repr=False)

    feasible = True

    @property
    def mdr_deg_per_hour(self) -> float:
        return self.omega_min_deg_per_hour


@dataclass(frozen=True)
class Infeasible:
    """Structured non-result: the point cannot be used as a gyroscope."""

    params: ModelParams
    reason: str
    stage: str
    detail: str = ""
    steady: SteadyState | None = None

    feasible = False


# --------------------------------------------------------------------------
# currents

def mean_currents(steady: SteadyState, params: ModelParams) -> np.ndarray:
    """Classical differential currents (i1, i2) in A."""
    A = params.detector_constants
    phases = (params.detection.phi1, params.detection.phi2)
    b = steady.output_amplitudes
    out = np.empty(2)
    for k, (cw, ccw) in enumerate(((0, 1), (2, 3))):
        out[k] = -2.0 * A[k] * (np.conj(b[cw]) * b[ccw] * np.exp(-1j * phases[k])).imag
    return out


def coherent_input_quadratures(params: ModelParams) -> np.ndarray:
    """Mean values of the 16 input quadratures: waveguide drive, empty loss ports."""
    b = np.asarray(params.input_amplitudes())
    u = np.zeros(16)
    u[0:8:2] = b.real
    u[1:8:2] = b.imag
    return u


def input_referred_currents(steady: SteadyState, params: ModelParams,
                            coeffs: CurrentCoefficients | None = None) -> np.ndarray:
    if coeffs is None:
        coeffs = current_coefficients(steady, input_output_transfer(steady, params), params)
    return coeffs.C @ coherent_input_quadratures(params)


def currents(steady: SteadyState, params: ModelParams, convention: str = "input_referred") -> np.ndarray:
    if convention == "classical":
        return mean_currents(steady, params)
    if convention == "input_referred":
        return input_referred_currents(steady, params)
    raise ValueError(f"unknown mean-current convention {convention!r}")


def with_delta(params: ModelParams, delta1: float) -> ModelParams:
    """Same configuration rotated so that the fundamental shift is ``delta1``."""
    r = params.resonator
    return params.updated(Omega=delta1 * r.lambda1 * r.index_n0 / (2.0 * math.pi * r.radius_R))


def _shifted(params, base_state, delta, strategy, jump_tol):
    p = with_delta(params, delta)
    try:
        s = refine(p, base_state.cavity, strategy)
    except NoConvergence as exc:
        raise BranchJump(f"Newton failed at delta={delta:g}") from exc
    jump = np.linalg.norm(s.cavity - base_state.cavity) / max(1e-300, np.linalg.norm(base_state.cavity))
    if jump > jump_tol:
        raise BranchJump(f"state moved by {jump:.2%} at delta={delta:g}")
    return p, s


def current_gradient(params: ModelParams, steady: SteadyState | None = None, h: float | None = None,
                     convention: str = "input_referred", strategy: SolverStrategy = SolverStrategy(),
                     rtol: float = 1e-4, max_halvings: int = 20, jump_tol: float = 0.1) -> Gradient:
    """Branch-followed central difference of the mean currents in delta.

    Starting from ``h0 = 1e-3 (kappa1 + gamma1)`` the step is halved until
    the estimates at h and h/2 agree to ``rtol``. The returned value is the
    Richardson combination ``(4 g(h/2) - g(h)) / 3``.
    """
    if steady is None:
        steady = operating_point(params, strategy)
    delta0 = params.delta1
    if h is None:
        h = 1e-3 * (params.kappa[0] + params.gamma[0])

    def central(step):
        pp, sp = _shifted(params, steady, delta0 + step, strategy, jump_tol)
        pm, sm = _shifted(params, steady, delta0 - step, strategy, jump_tol)
        return (_currents_at(sp, pp, convention) - _currents_at(sm, pm, convention)) / (2.0 * step)

    coarse = central(h)
    for k in range(max_halvings + 1):
        fine = central(h / 2)
        scale = max(np.linalg.norm(fine), np.linalg.norm(coarse))
        if scale == 0 or np.linalg.norm(fine - coarse) <= rtol * scale:
            return Gradient((4.0 * fine - coarse) / 3.0, h / 2, coarse, fine, k)
        h, coarse = h / 2, fine
    raise BranchJump(f"gradient did not settle after {max_halvings} halvings")


def _currents_at(state: SteadyState, params: ModelParams, convention: str) -> np.ndarray:
    if convention == "classical":
        return mean_currents(state, params)
    # the shifted state need not be strictly stable for the response map
    T = _transfer_unchecked(state, params)
    return current_coefficients(state, T, params).C @ coherent_input_quadratures(params)


def _transfer_unchecked(state: SteadyState, params: ModelParams) -> np.ndarray:
    M = dynamical_jacobian(state.cavity, params)
    k1, k2 = params.kappa
    sk = np.sqrt(np.repeat([k1, k1, k2, k2], 2))
    return np.hstack([np.eye(8), np.zeros((8, 8))]) + sk[:, None] * np.linalg.solve(M, input_matrix(params))


# --------------------------------------------------------------------------
# information

def fisher_information(gradient, covariance, max_condition: float = 1e12,
                       components=None) -> FisherResult:
    """I = g^T Sigma^-1 g for a bivariate Gaussian with delta-independent covariance.

    An ill-conditioned covariance gets ``1e-12 * trace`` added to its
    diagonal and the result is flagged. ``components`` restricts the
    measurement to a subset of the currents.
    """
    g = np.atleast_1d(np.asarray(gradient, dtype=float))
    S = np.atleast_2d(np.asarray(covariance, dtype=float))
    if components is not None:
        idx = list(components)
        g, S = g[idx], S[np.ix_(idx, idx)]
    if not np.any(g):
        return FisherResult(0.0, False)
    tr = float(np.trace(S))
    if tr <= 0 or not np.isfinite(tr):
        raise SingularCovariance("covariance has no positive variance")
    regularized = False
    if np.linalg.cond(S) > max_condition:
        S = S + 1e-12 * tr * np.eye(len(g))
        regularized = True
        if np.linalg.cond(S) > 1e15:
            raise SingularCovariance("covariance singular even after regularization")
    cho = np.linalg.cholesky(S)
    z = np.linalg.solve(cho, g)
    return FisherResult(float(z @ z), regularized)


def mdr(fisher: float, params: ModelParams) -> tuple[float, float, float]:
    """Cramer-Rao limit: returns (delta_min, Omega_min rad/s, Omega_min deg/h)."""
    if not fisher > 0:
        raise ZeroInformation("Fisher information is zero")
    delta_min = 1.0 / math.sqrt(fisher)
    r = params.resonator
    om, om_deg = omega_min_from_delta(delta_min, r.radius_R, r.lambda1, r.index_n0)
    return delta_min, om, om_deg


def linear_mdr_closed_form(params: ModelParams, power: float | None = None) -> tuple[float, float]:
    """Shot-noise-limited MDR of a linear ring without back-scattering.

    Uses the fundamental mode's kappa and gamma and ``power`` per port
    (default ``P1``). Returns ``(rad/s, deg/h)``.
    """
    P = params.drive.P1 if power is None else power
    k, g = params.kappa[0], params.gamma[0]
    r = params.resonator
    N = photon_flux(P, params.omega1, params.constants.hbar)
    if N <= 0:
        raise ZeroInformation("no input photons")
    om = math.sqrt(2.0) * r.lambda1 * r.index_n0 * (k + g) ** 2 / (32.0 * math.pi * r.radius_R * k * math.sqrt(N))
    return om, om / DEG_PER_HOUR


# --------------------------------------------------------------------------
# full pipeline

def _below_threshold(state: SteadyState, params: ModelParams) -> bool:
    if params.drive.P1 > 0 or params.drive.P2 <= 0:
        return False
    a = np.abs(state.cavity)
    return float(np.max(a[:2])) <= 1e-9 * max(1.0, float(np.max(a[2:])))


def evaluate_point(params: ModelParams, strategy: SolverStrategy = SolverStrategy(),
                   convention: str = "input_referred", h: float | None = None,
                   steady: SteadyState | None = None):
    """Steady state, stability gate, noise, gradient, Fisher information, MDR, squeezing.

    Returns a :class:`SensitivityReport`, or an :class:`Infeasible` record
    tagged with the failing stage.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown mean-current convention {convention!r}")
    if params.drive.total_power <= 0:
        return Infeasible(params, "undriven", "steady", "no input power")
    try:
        if steady is None:
            steady = operating_point(params, strategy)
    except NoConvergence as exc:
        return Infeasible(params, "no_convergence", "steady", str(exc))
    if steady.stability is not Stability.STABLE:
        return Infeasible(params, steady.stability.value, "stability",
                          f"max growth rate {steady.max_growth_rate:.3e} rad/s", steady)
    if _below_threshold(steady, params):
        return Infeasible(params, "below_threshold", "stability",
                          "second-harmonic drive below the oscillation threshold: no fundamental field", steady)
    try:
        transfer = input_output_transfer(steady, params)
    except SingularResponse as exc:
        return Infeasible(params, "singular_response", "transfer", str(exc), steady)
    coeffs = current_coefficients(steady, transfer, params)
    cov = current_covariance(coeffs)
    classical = mean_currents(steady, params)
    mean = classical if convention == "classical" else coeffs.C @ coherent_input_quadratures(params)
    try:
        grad = current_gradient(params, steady, h=h, convention=convention, strategy=strategy)
    except BranchJump as exc:
        return Infeasible(params, "branch_jump", "gradient", str(exc), steady)
    try:
        info = fisher_information(grad.value, cov)
        dmin, om, om_deg = mdr(info.value, params)
    except (SingularCovariance, ZeroInformation) as exc:
        return Infeasible(params, "zero_information", "fisher", str(exc), steady)
    return SensitivityReport(
        params=params,
        steady=steady,
        convention=convention,
        mean_currents=mean,
        classical_currents=classical,
        current_gradient=grad.value,
        gradient_step=grad.h,
        covariance=cov,
        fisher=info.value,
        regularized=info.regularized,
        delta_min=dmin,
        omega_min_rad_s=om,
        omega_min_deg_per_hour=om_deg,
        squeezing=squeezing_levels(steady, transfer),
        coefficients=coeffs,
        transfer=transfer,
    )


# --------------------------------------------------------------------------
# linear baseline

@dataclass(frozen=True)
class LinearBaseline:
    power: float
    Qc1: float
    mdr_engine: float  # deg/h, back-scattering included
    mdr_closed_form: float  # deg/h at the same Qc1, no back-scattering
    mdr_closed_form_critical: float  # deg/h at kappa = gamma

    @property
    def ratio(self) -> float:
        return self.mdr_engine / self.mdr_closed_form


def linear_engine_mdr(params: ModelParams, strategy: SolverStrategy = SolverStrategy()) -> float:
    """Engine MDR (deg/h) of the linear gyro: chi = 0, fundamental drive only."""
    p = params.updated(chi=0.0, P2=0.0)
    rep = evaluate_point(p, strategy, convention="classical")
    if not rep.feasible:
        raise ZeroInformation(f"linear gyro infeasible: {rep.reason}")
    return rep.omega_min_deg_per_hour


def linear_baseline(params: ModelParams, power: float | None = None, optimize_coupling: bool = True,
                    qc_bounds=(1e5, 1e8), strategy: SolverStrategy = SolverStrategy()) -> LinearBaseline:
    """Best linear gyroscope fed with the same total power.

    The linear ring uses the fundamental wavelength, the same resonator and
    back-scattering, ``chi = 0`` and ``P1 = power`` (default: the total
    power of ``params``). With ``optimize_coupling`` the engine MDR is
    minimized over Qc1.
    """
    P = params.drive.total_power if power is None else power
    base = params.updated(chi=0.0, P1=P, P2=0.0, Omega=0.0)
    if optimize_coupling:
        res = minimize_scalar(lambda q: math.log(linear_engine_mdr(base.updated(Qc1=10.0 ** q), strategy)),
                              bounds=(math.log10(qc_bounds[0]), math.log10(qc_bounds[1])),
                              method="bounded", options={"xatol": 1e-6})
        base = base.updated(Qc1=10.0 ** float(res.x))
    engine = linear_engine_mdr(base, strategy)
    closed = linear_mdr_closed_form(base)[1]
    critical = linear_mdr_closed_form(base.updated(Qc1=base.resonator.Qi1))[1]
    return LinearBaseline(P, base.coupling.Qc1, engine, closed, critical)
