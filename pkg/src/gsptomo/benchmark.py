"""Quantum Brownian motion benchmark: Ohmic bath with a Lorentz-Drude cutoff.

Secular weak-coupling coefficients for an oscillator of frequency w coupled
with dimensionless strength alpha^2 to a bath with cutoff wc at temperature
kT (high-temperature form of the diffusion coefficient):

    lambda(t) = alpha^2 wc^2 w / (wc^2 + w^2)
                * {1 - e^{-wc t} [cos(w t) + (wc/w) sin(w t)]}
    Delta(t)  = 2 alpha^2 wc^2 / (wc^2 + w^2) * (kT/hbar)
                * {1 - e^{-wc t} [cos(w t) - (w/wc) sin(w t)]}

with delta = 0, D_qp = 0 and m w D_qq / hbar = D_pp / (hbar m w) = Delta/2,
so the dimensionless diffusion vector is (Delta(t), Delta(t), 0).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import HamiltonianParams, MecModel
from .errors import DomainError

__all__ = [
    "BenchmarkTips",
    "benchmark_lambda",
    "benchmark_delta_coeff",
    "lambda_integral_closed_form",
    "unit_lambda",
    "unit_delta",
    "unit_lambda_integral",
    "stationary_lambda",
    "stationary_delta",
    "lindblad_diagnostic",
    "LindbladReport",
    "benchmark_mec_model",
    "benchmark_hamiltonian",
    "tips_to_json",
    "tips_from_json",
    "TIP_NAMES",
]

TIP_NAMES = ("alpha_sq", "omega_c", "kT_over_hbar_omega")

# Below this value of kT/(hbar omega) the high-temperature form of Delta(t)
# is dubious; reports carry a flag, the formulas are used unconditionally.
HIGH_TEMPERATURE_THRESHOLD = 2.0


@dataclass(frozen=True)
class BenchmarkTips:
    """The three unknowns of the benchmark: coupling alpha^2, cutoff omega_c
    (same units as omega) and dimensionless temperature kT/(hbar omega)."""

    alpha_sq: float
    omega_c: float
    kT_over_hbar_omega: float

    def __post_init__(self):
        if not (self.alpha_sq > 0 and self.omega_c > 0 and self.kT_over_hbar_omega > 0):
            raise ValueError("all benchmark parameters must be strictly positive")

    def to_vector(self) -> np.ndarray:
        return np.array([self.alpha_sq, self.omega_c, self.kT_over_hbar_omega])

    @classmethod
    def from_vector(cls, tips: Sequence[float]) -> "BenchmarkTips":
        a, wc, kt = np.asarray(tips, dtype=float)
        return cls(alpha_sq=float(a), omega_c=float(wc), kT_over_hbar_omega=float(kt))

    @property
    def high_temperature_form_ok(self) -> bool:
        return self.kT_over_hbar_omega >= HIGH_TEMPERATURE_THRESHOLD


def benchmark_hamiltonian(omega: float = 1.0, mass: float = 1.0, hbar: float = 1.0) -> HamiltonianParams:
    """The benchmark oscillator has no q*p coupling (delta = 0)."""
    return HamiltonianParams(mass=mass, omega=omega, delta=0.0, hbar=hbar)


def unit_lambda(omega_c, h: HamiltonianParams, t):
    """Friction coefficient at unit coupling, lambda(t) / alpha^2.

    Array-friendly in both omega_c and t (not simultaneously).
    """
    w = h.omega
    wc = omega_c
    bracket = 1.0 - np.exp(-wc * t) * (np.cos(w * t) + (wc / w) * np.sin(w * t))
    return wc ** 2 * w / (wc ** 2 + w ** 2) * bracket


def unit_delta(omega_c, h: HamiltonianParams, t):
    """Diffusion coefficient at unit coupling and unit kT/(hbar omega)."""
    w = h.omega
    wc = omega_c
    bracket = 1.0 - np.exp(-wc * t) * (np.cos(w * t) - (w / wc) * np.sin(w * t))
    return 2.0 * wc ** 2 / (wc ** 2 + w ** 2) * w * bracket


def unit_lambda_integral(omega_c, h: HamiltonianParams, t):
    """Closed form of int_0^t lambda dt' at unit coupling:

    wc^2 w^2 / (wc^2+w^2)^2 * { w t (wc^2+w^2)/w^2 - 2 wc/w
        + e^{-wc t} [2 (wc/w) cos(w t) + ((wc^2-w^2)/w^2) sin(w t)] }
    """
    w = h.omega
    wc = omega_c
    pref = wc ** 2 * w ** 2 / (wc ** 2 + w ** 2) ** 2
    braces = (
        w * t * (wc ** 2 + w ** 2) / w ** 2
        - 2.0 * wc / w
        + np.exp(-wc * t)
        * (2.0 * (wc / w) * np.cos(w * t) + ((wc ** 2 - w ** 2) / w ** 2) * np.sin(w * t))
    )
    return pref * braces


def benchmark_lambda(tips: BenchmarkTips, h: HamiltonianParams, t):
    """Friction coefficient lambda(t); vanishes at t = 0 and saturates for
    t >> 1/omega_c."""
    return tips.alpha_sq * unit_lambda(tips.omega_c, h, t)


def benchmark_delta_coeff(tips: BenchmarkTips, h: HamiltonianParams, t):
    """Diffusion coefficient Delta(t), high-temperature form, used
    unconditionally regardless of the actual kT/(hbar omega)."""
    return tips.alpha_sq * tips.kT_over_hbar_omega * unit_delta(tips.omega_c, h, t)


def lambda_integral_closed_form(tips: BenchmarkTips, h: HamiltonianParams, t):
    """Closed form of int_0^t lambda(t') dt'."""
    return tips.alpha_sq * unit_lambda_integral(tips.omega_c, h, t)


def stationary_lambda(tips: BenchmarkTips, h: HamiltonianParams) -> float:
    w, wc = h.omega, tips.omega_c
    return tips.alpha_sq * wc ** 2 * w / (wc ** 2 + w ** 2)


def stationary_delta(tips: BenchmarkTips, h: HamiltonianParams) -> float:
    w, wc = h.omega, tips.omega_c
    return 2.0 * tips.alpha_sq * wc ** 2 / (wc ** 2 + w ** 2) * tips.kT_over_hbar_omega * w


@dataclass(frozen=True)
class LindbladReport:
    """Grid minima of Delta(t) -/+ lambda(t); nonnegative minima mean the
    time-local generator is of Lindblad type on the grid."""

    min_delta_minus_lambda: float
    min_delta_plus_lambda: float
    is_lindblad: bool
    high_temperature_form_ok: bool


def lindblad_diagnostic(
    tips: BenchmarkTips, h: HamiltonianParams, t_grid: Sequence[float]
) -> LindbladReport:
    grid = np.asarray(t_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("t_grid must be nonempty")
    lam = benchmark_lambda(tips, h, grid)
    delta = benchmark_delta_coeff(tips, h, grid)
    lo_minus = float(np.min(delta - lam))
    lo_plus = float(np.min(delta + lam))
    return LindbladReport(
        min_delta_minus_lambda=lo_minus,
        min_delta_plus_lambda=lo_plus,
        is_lindblad=bool(lo_minus >= 0.0 and lo_plus >= 0.0),
        high_temperature_form_ok=tips.high_temperature_form_ok,
    )


def _validate_tip_vector(tips: np.ndarray) -> None:
    if np.any(tips <= 0.0) or not np.all(np.isfinite(tips)):
        raise DomainError(
            f"benchmark parameters must be finite and positive, got {tips!r}"
        )


def benchmark_mec_model(h: HamiltonianParams) -> MecModel:
    """Adapter exposing the benchmark coefficients as a generic MecModel.

    D_qq = hbar Delta / (2 m w), D_pp = hbar m w Delta / 2, D_qp = 0, so the
    dimensionless diffusion vector reduces to (Delta(t), Delta(t), 0).
    """
    mw = h.mass * h.omega

    def lam(t, tips):
        return float(benchmark_lambda(BenchmarkTips.from_vector(tips), h, t))

    def d_qq(t, tips):
        return float(
            h.hbar * benchmark_delta_coeff(BenchmarkTips.from_vector(tips), h, t) / (2.0 * mw)
        )

    def d_pp(t, tips):
        return float(
            h.hbar * mw * benchmark_delta_coeff(BenchmarkTips.from_vector(tips), h, t) / 2.0
        )

    def d_qp(t, tips):
        return 0.0

    return MecModel(
        lambda_=lam,
        d_qq=d_qq,
        d_pp=d_pp,
        d_qp=d_qp,
        tip_names=TIP_NAMES,
        tip_validator=_validate_tip_vector,
    )


def tips_to_json(tips: BenchmarkTips, h: HamiltonianParams) -> str:
    return json.dumps(
        {
            "alpha_sq": tips.alpha_sq,
            "omega_c_over_omega": tips.omega_c / h.omega,
            "kT_over_hbar_omega": tips.kT_over_hbar_omega,
        },
        indent=2,
    )


def tips_from_json(text: str, h: HamiltonianParams) -> BenchmarkTips:
    doc = json.loads(text)
    return BenchmarkTips(
        alpha_sq=float(doc["alpha_sq"]),
        omega_c=float(doc["omega_c_over_omega"]) * h.omega,
        kT_over_hbar_omega=float(doc["kT_over_hbar_omega"]),
    )
