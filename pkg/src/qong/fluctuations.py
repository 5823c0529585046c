"""Linearized quantum fluctuations around a stable steady state.

Quadratures follow ``X = (a + a^dag)/2`` and ``Y = (a - a^dag)/(2i)``, so a
vacuum or coherent input has variance 1/4 in every quadrature.

Bases (fixed, used everywhere):

* cavity / output quadratures (8): ``X1cw, Y1cw, X1ccw, Y1ccw, X2cw, Y2cw,
  X2ccw, Y2ccw``;
* input quadratures (16): the same 8 for the waveguide inputs ``b``,
  followed by the same 8 for the loss-channel inputs ``c``.

Everything is evaluated at zero frequency: the fluctuation dynamics are
static linear combinations of the inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams
from .steady import SteadyState, Stability, dynamical_jacobian

MODE_LABELS = ("1cw", "1ccw", "2cw", "2ccw")
CAVITY_QUADRATURES = tuple(q + m for m in MODE_LABELS for q in ("X", "Y"))
INPUT_QUADRATURES = tuple("b_" + q for q in CAVITY_QUADRATURES) + tuple("c_" + q for q in CAVITY_QUADRATURES)
VACUUM_VARIANCE = 0.25


class UnstablePoint(ValueError):
    """Linearization requested around a steady state that is not stable."""


class SingularResponse(np.linalg.LinAlgError):
    """The dynamical matrix cannot be inverted at zero frequency."""


@dataclass(frozen=True)
class NoiseTransfer:
    M: np.ndarray  # 8x8, rad/s
    B: np.ndarray  # 8x16, sqrt(rad/s)
    T: np.ndarray  # 8x16, dimensionless


@dataclass(frozen=True)
class CurrentCoefficients:
    """Weights of the two differential currents over the 16 input quadratures (A).

    ``L`` holds the weights over the 8 output quadratures, ``C = L @ T``.
    """

    C: np.ndarray  # 2x16
    L: np.ndarray  # 2x8

    @property
    def i1(self) -> np.ndarray:
        return self.C[0]

    @property
    def i2(self) -> np.ndarray:
        return self.C[1]


@dataclass(frozen=True)
class ModeSqueezing:
    amplitude_variance: float
    phase_variance: float
    amplitude_db: float
    phase_db: float
    amplitude_db_unit_reference: float
    phase_db_unit_reference: float
    degenerate: bool  # no classical output field; X/Y used instead


@dataclass(frozen=True)
class SqueezingReport:
    """Per output mode squeezing.

    ``*_db`` is relative to vacuum (1/4). ``*_db_unit_reference`` is
    ``-10 log10(Var)``, i.e. relative to a unit variance, and exceeds the
    vacuum-referenced number by 10*log10(4) = 6.02 dB. Positive means squeezed.
    """

    modes: dict[str, ModeSqueezing]

    @property
    def fundamental(self) -> ModeSqueezing:
        return self.modes["1cw"]

    @property
    def second_harmonic(self) -> ModeSqueezing:
        return self.modes["2cw"]


def linearized_system(steady: SteadyState, params: ModelParams) -> np.ndarray:
    """Dynamical matrix M of the fluctuation quadratures (8x8, rad/s)."""
    if steady.stability is not Stability.STABLE:
        raise UnstablePoint(f"steady state is {steady.stability.value}")
    return dynamical_jacobian(steady.cavity, params)


def input_matrix(params: ModelParams) -> np.ndarray:
    k1, k2 = params.kappa
    g1, g2 = params.gamma
    sk = np.sqrt(np.repeat([k1, k1, k2, k2], 2))
    sg = np.sqrt(np.repeat([g1, g1, g2, g2], 2))
    return np.hstack([np.diag(sk), np.diag(sg)])


def input_output_transfer(steady: SteadyState, params: ModelParams, max_condition: float = 1e14) -> NoiseTransfer:
    """Zero-frequency map from the 16 input quadratures to the 8 output quadratures.

    With ``d(da)/dt = M da + B u`` the cavity response is ``da = -M^-1 B u`` and
    the output is ``u_b - sqrt(kappa) da``.
    """
    M = linearized_system(steady, params)
    B = input_matrix(params)
    if np.linalg.cond(M) > max_condition:
        raise SingularResponse("dynamical matrix is numerically singular")
    response = np.linalg.solve(M, B)  # da = -response @ u
    k1, k2 = params.kappa
    sk = np.sqrt(np.repeat([k1, k1, k2, k2], 2))
    T = np.hstack([np.eye(8), np.zeros((8, 8))]) + sk[:, None] * response
    return NoiseTransfer(M=M, B=B, T=T)


def output_covariance(T: np.ndarray) -> np.ndarray:
    """Symmetrized covariance of the output quadratures for vacuum/coherent inputs."""
    return VACUUM_VARIANCE * T @ T.T


def current_readout(params: ModelParams, outputs) -> np.ndarray:
    """Linear weights L (2x8) of each current over the output quadratures.

    The current of harmonic k is ``-2 A_k Im(conj(b_cw) b_ccw exp(-i phi_k))``.
    """
    A = params.detector_constants
    phases = (params.detection.phi1, params.detection.phi2)
    L = np.zeros((2, 8))
    for k, (cw, ccw) in enumerate(((0, 1), (2, 3))):
        rot = np.exp(-1j * phases[k])
        bcw, bccw = complex(outputs[cw]), complex(outputs[ccw])
        s = -2.0 * A[k]
        L[k, 2 * cw] = s * (bccw * rot).imag
        L[k, 2 * cw + 1] = -s * (bccw * rot).real
        L[k, 2 * ccw] = s * (np.conj(bcw) * rot).imag
        L[k, 2 * ccw + 1] = s * (np.conj(bcw) * rot).real
    return L


def current_coefficients(steady: SteadyState, T, params: ModelParams) -> CurrentCoefficients:
    if isinstance(T, NoiseTransfer):
        T = T.T
    L = current_readout(params, steady.output_amplitudes)
    return CurrentCoefficients(C=L @ T, L=L)


def current_covariance(coeffs) -> np.ndarray:
    """2x2 covariance of the differential currents (A^2): 1/4 C C^T."""
    C = coeffs.C if isinstance(coeffs, CurrentCoefficients) else np.asarray(coeffs)
    S = VACUUM_VARIANCE * C @ C.T
    return 0.5 * (S + S.T)


def _db(var: float) -> float:
    return float(-10.0 * np.log10(var / VACUUM_VARIANCE))


def squeezing_levels(steady: SteadyState, T, rel_floor: float = 1e-12) -> SqueezingReport:
    """Amplitude/phase quadrature variances of each output mode.

    The amplitude direction is the classical output phase. When a mode has
    no classical output the canonical X/Y pair is reported and flagged.
    """
    if isinstance(T, NoiseTransfer):
        T = T.T
    V = output_covariance(T)
    outs = np.asarray(steady.output_amplitudes)
    scale = max(1.0, float(np.max(np.abs(outs))))
    modes = {}
    for m, label in enumerate(MODE_LABELS):
        block = V[2 * m:2 * m + 2, 2 * m:2 * m + 2]
        degenerate = abs(outs[m]) <= rel_floor * scale
        theta = 0.0 if degenerate else float(np.angle(outs[m]))
        u = np.array([np.cos(theta), np.sin(theta)])
        w = np.array([-np.sin(theta), np.cos(theta)])
        va, vp = float(u @ block @ u), float(w @ block @ w)
        modes[label] = ModeSqueezing(
            amplitude_variance=va,
            phase_variance=vp,
            amplitude_db=_db(va),
            phase_db=_db(vp),
            amplitude_db_unit_reference=float(-10 * np.log10(va)),
            phase_db_unit_reference=float(-10 * np.log10(vp)),
            degenerate=bool(degenerate),
        )
    return SqueezingReport(modes)
