"""Physical parameters, unit conventions and scalar conversions.

Everything inside the package is SI: powers in W, lengths in m, and every
rate that enters the coupled-mode equations (kappa, gamma, beta, chi, delta)
in rad/s. Degrees per hour only appear at the I/O boundary.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Final

# CODATA 2018
C: Final[float] = 299_792_458.0
HBAR: Final[float] = 1.054571817e-34
EPS0: Final[float] = 8.8541878128e-12

DEG_PER_HOUR: Final[float] = math.pi / (180.0 * 3600.0)  # rad/s


class DomainError(ValueError):
    """A physical quantity is outside its admissible range."""


@dataclass(frozen=True)
class PhysicalConstants:
    c: float = C
    hbar: float = HBAR
    eps0: float = EPS0

    def __post_init__(self):
        if min(self.c, self.hbar, self.eps0) <= 0:
            raise DomainError("physical constants must be positive")


@dataclass(frozen=True)
class ResonatorParams:
    """Ring geometry, losses and the nonlinear coupling.

    ``chi`` is the coupling rate used by the dynamics. ``chi2`` and ``zeta``
    are kept for bookkeeping; use :func:`nonlinear_coupling` to turn them
    into a rate.
    """

    radius_R: float = 0.02
    index_n0: float = 2.2
    lambda1: float = 1590e-9
    Qi1: float = 1e7
    Qi2: float = 1e6
    beta1: float = 5.4e4
    beta2: float = 5.4e5
    chi: float = 1.26e6
    chi2: float = 30e-12
    zeta: float = 1.18e6

    def __post_init__(self):
        if self.radius_R <= 0:
            raise DomainError(f"radius must be positive, got {self.radius_R}")
        if self.lambda1 <= 0 or self.index_n0 <= 0:
            raise DomainError("wavelength and refractive index must be positive")
        if self.Qi1 < 1 or self.Qi2 < 1:
            raise DomainError("intrinsic quality factors must be >= 1")
        if self.beta1 < 0 or self.beta2 < 0:
            raise DomainError("back-scattering rates must be >= 0")
        if self.chi < 0:
            raise DomainError("nonlinear coupling must be >= 0")

    @property
    def lambda2(self) -> float:
        return self.lambda1 / 2


@dataclass(frozen=True)
class DriveParams:
    P1: float = 0.0
    P2: float = 0.0
    psi1: float = 0.0
    psi2: float = 0.0

    def __post_init__(self):
        if self.P1 < 0 or self.P2 < 0:
            raise DomainError("input powers must be >= 0")

    @property
    def scheme(self) -> str:
        if self.P1 > 0 and self.P2 > 0:
            return "dual"
        if self.P2 > 0:
            return "second_harmonic"
        if self.P1 > 0:
            return "fundamental"
        return "undriven"

    @property
    def total_power(self) -> float:
        return self.P1 + self.P2


@dataclass(frozen=True)
class CouplingParams:
    Qc1: float = 1e7
    Qc2: float = 1e6

    def __post_init__(self):
        if self.Qc1 < 1 or self.Qc2 < 1:
            raise DomainError("coupling quality factors must be >= 1")


@dataclass(frozen=True)
class DetectionParams:
    responsivity: float = 0.58  # A/W
    phi1: float = 0.0
    phi2: float = 0.0


@dataclass(frozen=True)
class RotationParams:
    Omega: float = 0.0  # rad/s

    def delta1(self, resonator: ResonatorParams) -> float:
        return sagnac_shift(self.Omega, resonator.radius_R, resonator.lambda1, resonator.index_n0)

    def delta2(self, resonator: ResonatorParams) -> float:
        return 2.0 * self.delta1(resonator)


# flat parameter name -> (group attribute, field)
_FLAT = {
    "R": ("resonator", "radius_R"),
    "n0": ("resonator", "index_n0"),
    "lambda1": ("resonator", "lambda1"),
    "Qi1": ("resonator", "Qi1"),
    "Qi2": ("resonator", "Qi2"),
    "beta1": ("resonator", "beta1"),
    "beta2": ("resonator", "beta2"),
    "chi": ("resonator", "chi"),
    "chi2": ("resonator", "chi2"),
    "zeta": ("resonator", "zeta"),
    "P1": ("drive", "P1"),
    "P2": ("drive", "P2"),
    "psi1": ("drive", "psi1"),
    "psi2": ("drive", "psi2"),
    "Qc1": ("coupling", "Qc1"),
    "Qc2": ("coupling", "Qc2"),
    "Omega": ("rotation", "Omega"),
    "responsivity": ("detection", "responsivity"),
    "phi1": ("detection", "phi1"),
    "phi2": ("detection", "phi2"),
}

PARAMETER_NAMES: Final[tuple[str, ...]] = tuple(_FLAT)


@dataclass(frozen=True)
class ModelParams:
    """Full description of one gyroscope configuration.

    Use :meth:`updated` with flat names (``P2``, ``Qc1``, ``chi``, ...) to
    derive new configurations; instances are immutable.
    """

    resonator: ResonatorParams = field(default_factory=ResonatorParams)
    drive: DriveParams = field(default_factory=DriveParams)
    coupling: CouplingParams = field(default_factory=CouplingParams)
    rotation: RotationParams = field(default_factory=RotationParams)
    detection: DetectionParams = field(default_factory=DetectionParams)
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    def updated(self, **values: float) -> "ModelParams":
        groups: dict[str, dict[str, float]] = {}
        for name, value in values.items():
            if name not in _FLAT:
                raise KeyError(f"unknown model parameter {name!r}")
            group, attr = _FLAT[name]
            groups.setdefault(group, {})[attr] = float(value)
        return dataclasses.replace(
            self,
            **{g: dataclasses.replace(getattr(self, g), **kw) for g, kw in groups.items()},
        )

    def get(self, name: str) -> float:
        group, attr = _FLAT[name]
        return getattr(getattr(self, group), attr)

    def flat(self) -> dict[str, float]:
        return {name: self.get(name) for name in _FLAT}

    # derived quantities -------------------------------------------------
    @property
    def omega1(self) -> float:
        return angular_frequency(self.resonator.lambda1, self.constants.c)

    @property
    def omega2(self) -> float:
        return 2.0 * self.omega1

    @property
    def kappa(self) -> tuple[float, float]:
        return (self.omega1 / self.coupling.Qc1, self.omega2 / self.coupling.Qc2)

    @property
    def gamma(self) -> tuple[float, float]:
        return (self.omega1 / self.resonator.Qi1, self.omega2 / self.resonator.Qi2)

    @property
    def delta1(self) -> float:
        return self.rotation.delta1(self.resonator)

    @property
    def detector_constants(self) -> tuple[float, float]:
        """A_k = R * hbar * omega_k (A per photon/s)."""
        r = self.detection.responsivity * self.constants.hbar
        return (r * self.omega1, r * self.omega2)

    def input_amplitudes(self) -> "list[complex]":
        """Classical waveguide inputs [b1cw, b1ccw, b2cw, b2ccw] in sqrt(photons/s)."""
        d = self.drive
        b1 = math.sqrt(photon_flux(d.P1, self.omega1, self.constants.hbar))
        b2 = math.sqrt(photon_flux(d.P2, self.omega2, self.constants.hbar))
        e1 = complex(math.cos(d.psi1), math.sin(d.psi1))
        e2 = complex(math.cos(d.psi2), math.sin(d.psi2))
        return [b1 * e1, b1 * e1, b2 * e2, b2 * e2]


def angular_frequency(lam: float, c: float = C) -> float:
    if lam <= 0:
        raise DomainError(f"wavelength must be positive, got {lam}")
    return 2.0 * math.pi * c / lam


def rates_from_quality(omega: float, Qc: float, Qi: float) -> tuple[float, float]:
    """Return (kappa, gamma) = (omega/Qc, omega/Qi)."""
    if omega <= 0:
        raise DomainError("omega must be positive")
    if Qc < 1 or Qi < 1:
        raise DomainError(f"quality factors must be >= 1, got Qc={Qc}, Qi={Qi}")
    return omega / Qc, omega / Qi


def sagnac_shift(Omega: float, R: float, lam: float, n0: float) -> float:
    """Sagnac resonance shift 2*pi*R*Omega/(lam*n0) in rad/s."""
    if R <= 0 or lam <= 0 or n0 <= 0:
        raise DomainError("R, lambda and n0 must be positive")
    return 2.0 * math.pi * R * Omega / (lam * n0)


def omega_min_from_delta(delta_min: float, R: float, lambda1: float, n0: float) -> tuple[float, float]:
    """Convert a minimum detectable shift to a rotation rate.

    Returns ``(rad_per_s, deg_per_hour)``.
    """
    if delta_min < 0:
        raise DomainError("delta_min must be >= 0")
    om = lambda1 * n0 / (2.0 * math.pi * R) * delta_min
    return om, om / DEG_PER_HOUR


def photon_flux(P: float, omega: float, hbar: float = HBAR) -> float:
    if P < 0:
        raise DomainError("power must be >= 0")
    return P / (hbar * omega)


def quasi_phase_matched_chi2(d: float) -> float:
    """Effective chi(2) of a first-order periodically poled medium.

    chi(2) = 2 d, and first-order poling retains a 2/pi Fourier weight.
    """
    return 4.0 / math.pi * d


def nonlinear_coupling(
    chi2: float,
    zeta: float,
    R: float,
    omega1: float,
    eps_rel1: float,
    eps_rel2: float,
    constants: PhysicalConstants = PhysicalConstants(),
) -> float:
    """Three-wave coupling rate (rad/s) from a cross-sectional overlap ``zeta``."""
    if min(chi2, R, omega1, eps_rel1, eps_rel2) <= 0 or zeta < 0:
        raise DomainError("nonlinear_coupling inputs must be positive")
    omega2 = 2.0 * omega1
    prefactor = math.sqrt(constants.hbar * omega1**2 * omega2 / (constants.eps0 * 2.0 * math.pi * R))
    return prefactor * zeta / (eps_rel1 * math.sqrt(eps_rel2)) * 3.0 * chi2 / (4.0 * math.sqrt(2.0))


def chi_from_parametric_threshold(Pc: float, params: ModelParams) -> float:
    """Coupling rate that puts the second-harmonic-pumped oscillation threshold at ``Pc``.

    Closed form for beta = delta = 0: the non-oscillating state loses
    stability when chi*|a2| = (kappa1+gamma1)/2.
    """
    if Pc <= 0:
        raise DomainError("threshold power must be positive")
    k1, k2 = params.kappa
    g1, g2 = params.gamma
    G1, G2 = (k1 + g1) / 2, (k2 + g2) / 2
    return G1 * G2 * math.sqrt(params.constants.hbar * params.omega2 / (k2 * Pc))


def parametric_threshold_power(params: ModelParams) -> float:
    """Second-harmonic input power per port at the oscillation threshold (beta = delta = 0)."""
    k1, k2 = params.kappa
    g1, g2 = params.gamma
    G1, G2 = (k1 + g1) / 2, (k2 + g2) / 2
    chi = params.resonator.chi
    if chi == 0:
        return math.inf
    return params.constants.hbar * params.omega2 * (G1 * G2 / chi) ** 2 / k2


def deg_per_hour(rad_per_s: float) -> float:
    return rad_per_s / DEG_PER_HOUR


def from_deg_per_hour(value: float) -> float:
    return value * DEG_PER_HOUR


# --------------------------------------------------------------------------
# reference designs

#: Oscillation threshold of the second-harmonic-pumped design, per port (W).
REFERENCE_THRESHOLD_POWER: Final[float] = 14.05e-3


def reference_resonator() -> ResonatorParams:
    """Lithium-niobate ring used throughout the examples, chi not yet calibrated."""
    return ResonatorParams()


def calibrated_chi(base: "ModelParams | None" = None) -> float:
    """Coupling rate implied by a 14.05 mW threshold at the second-harmonic optimum.

    The nominal 1.26e6 rad/s is a rounded figure; the threshold fixes the
    value to about 1.26215e6 rad/s, which is what places the sharp
    sensitivity optima at their nominal drive powers.
    """
    base = base or ModelParams()
    p = base.updated(Qc1=1.018e5, Qc2=5.462e5, Omega=0.0)
    return chi_from_parametric_threshold(REFERENCE_THRESHOLD_POWER, p)


def _reference(P1, P2, Qc1, Qc2, chi):
    p = ModelParams().updated(P1=P1, P2=P2, Qc1=Qc1, Qc2=Qc2)
    return p.updated(chi=calibrated_chi(p) if chi is None else chi)


def second_harmonic_design(chi: float | None = None) -> ModelParams:
    """Optimum under second-harmonic injection: 23.507 mW per port."""
    return _reference(0.0, 23.507e-3, 1.018e5, 5.462e5, chi)


def fundamental_design(chi: float | None = None) -> ModelParams:
    """Optimum under fundamental injection: 0.945 uW per port."""
    return _reference(0.945e-6, 0.0, 6.747e6, 6.675e7, chi)


def dual_design(chi: float | None = None) -> ModelParams:
    """Optimum under dual injection: 1.5 mW + 1.873 mW per port."""
    return _reference(1.5e-3, 1.873e-3, 4.353e5, 8.769e6, chi)


REFERENCE_DESIGNS = {
    "second_harmonic": second_harmonic_design,
    "fundamental": fundamental_design,
    "dual": dual_design,
}

#: Minimum detectable rotation (deg/h) quoted for each reference design.
REFERENCE_MDR = {"second_harmonic": 0.0044, "fundamental": 0.093, "dual": 0.013}
