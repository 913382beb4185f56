"""Shared domain types for Gaussian-shape-preserving open-system dynamics.

All dynamics run on dimensionless cumulants: the position-like first moment
is scaled by sqrt(m*omega/hbar), the momentum-like one by
1/sqrt(m*omega*hbar), and the three second central moments by m*omega/hbar,
1/(m*omega*hbar) and 1/hbar.  Physical units enter only at the measurement
boundary (tomograms, CSV export).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import DomainError

__all__ = [
    "HamiltonianParams",
    "CumulantState",
    "PhysicalCumulants",
    "MecModel",
    "LindbladCoefficients",
    "build_M",
    "build_R",
    "build_diffusion_vector",
    "mecs_from_lindblad",
    "RS_BOUND",
    "RS_SLACK",
]

# Dimensionless Robertson-Schrodinger bound x0*x1 - x2^2 >= 1/4, with a small
# numerical slack so states produced by a tolerance-controlled integrator can
# sit on the boundary.
RS_BOUND = 0.25
RS_SLACK = 1e-6


@dataclass(frozen=True)
class HamiltonianParams:
    """Harmonic oscillator of mass/frequency (m, omega) with a symmetrised
    q*p coupling of strength delta, all in ordinary units."""

    mass: float = 1.0
    omega: float = 1.0
    delta: float = 0.0
    hbar: float = 1.0

    def __post_init__(self):
        if not (self.mass > 0 and self.omega > 0 and self.hbar > 0):
            raise ValueError("mass, omega and hbar must be strictly positive")

    @property
    def eta_squared(self) -> float:
        """delta**2 - omega**2, kept signed; never exposed as a square root."""
        return self.delta ** 2 - self.omega ** 2


class PhysicalCumulants(NamedTuple):
    mean_q: float
    mean_p: float
    var_q: float
    var_p: float
    cov_qp: float


@dataclass(frozen=True, eq=False)
class CumulantState:
    """Five dimensionless cumulants (2-vector s, 3-vector x) at time t.

    x = (scaled position variance, scaled momentum variance, scaled
    covariance); the uncertainty bound x[0]*x[1] - x[2]**2 >= 1/4 is enforced
    up to a small numerical slack.
    """

    t: float
    s: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        s = np.array(self.s, dtype=float).reshape(2)
        x = np.array(self.x, dtype=float).reshape(3)
        s.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "x", x)
        if not (x[0] > 0 and x[1] > 0):
            raise ValueError("second cumulants x[0], x[1] must be positive")
        rs = x[0] * x[1] - x[2] ** 2
        if rs < RS_BOUND - RS_SLACK * max(1.0, x[0] * x[1]):
            raise ValueError(
                f"Robertson-Schrodinger violated: x0*x1 - x2^2 = {rs:.3e} < 1/4"
            )

    @property
    def rs_value(self) -> float:
        """The symplectic invariant x0*x1 - x2^2."""
        return float(self.x[0] * self.x[1] - self.x[2] ** 2)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.s, self.x])

    @classmethod
    def from_vector(cls, t: float, y: Sequence[float]) -> "CumulantState":
        y = np.asarray(y, dtype=float)
        return cls(t=float(t), s=y[:2], x=y[2:5])

    def to_physical(self, h: HamiltonianParams) -> PhysicalCumulants:
        mw = h.mass * h.omega
        return PhysicalCumulants(
            mean_q=float(self.s[0] * math.sqrt(h.hbar / mw)),
            mean_p=float(self.s[1] * math.sqrt(mw * h.hbar)),
            var_q=float(self.x[0] * h.hbar / mw),
            var_p=float(self.x[1] * h.hbar * mw),
            cov_qp=float(self.x[2] * h.hbar),
        )

    @classmethod
    def from_physical(
        cls,
        t: float,
        h: HamiltonianParams,
        mean_q: float,
        mean_p: float,
        var_q: float,
        var_p: float,
        cov_qp: float,
    ) -> "CumulantState":
        mw = h.mass * h.omega
        s = [mean_q * math.sqrt(mw / h.hbar), mean_p / math.sqrt(mw * h.hbar)]
        x = [var_q * mw / h.hbar, var_p / (mw * h.hbar), cov_qp / h.hbar]
        return cls(t=float(t), s=np.array(s), x=np.array(x))


@dataclass(frozen=True)
class MecModel:
    """Master-equation coefficients as evaluable functions of time and of a
    vector of time-independent parameters.

    Each coefficient function takes (t, tips) where tips is a real vector
    ordered as in `tip_names`.  `tip_validator`, when given, raises
    DomainError for tip vectors outside the model's domain.
    """

    lambda_: Callable[[float, np.ndarray], float]
    d_qq: Callable[[float, np.ndarray], float]
    d_pp: Callable[[float, np.ndarray], float]
    d_qp: Callable[[float, np.ndarray], float]
    tip_names: tuple
    tip_validator: Optional[Callable[[np.ndarray], None]] = None

    def __post_init__(self):
        object.__setattr__(self, "tip_names", tuple(self.tip_names))

    def validate_tips(self, tips: Sequence[float]) -> np.ndarray:
        tips = np.asarray(tips, dtype=float)
        if tips.shape != (len(self.tip_names),):
            raise DomainError(
                f"expected {len(self.tip_names)} parameters {self.tip_names}, "
                f"got shape {tips.shape}"
            )
        if self.tip_validator is not None:
            self.tip_validator(tips)
        return tips

    def tip_index(self, name: str) -> int:
        return self.tip_names.index(name)


@dataclass(frozen=True)
class LindbladCoefficients:
    """The two complex coefficient pairs (a_j, b_j) of linear jump operators
    a_j(t)*p + b_j(t)*q, stored as functions of time."""

    a: tuple
    b: tuple

    def __post_init__(self):
        if len(self.a) != 2 or len(self.b) != 2:
            raise ValueError("need exactly two coefficient pairs (j = 1, 2)")


def build_M(h: HamiltonianParams) -> np.ndarray:
    """Drift generator of the first cumulants, [[delta, omega], [-omega, -delta]].

    Trace-free, and M @ M = (delta^2 - omega^2) * I exactly.
    """
    return np.array([[h.delta, h.omega], [-h.omega, -h.delta]])


def build_R(h: HamiltonianParams) -> np.ndarray:
    """Trace-free drift generator of the second cumulants."""
    d, w = h.delta, h.omega
    return np.array(
        [
            [2 * d, 0.0, 2 * w],
            [0.0, -2 * d, -2 * w],
            [-w, w, 0.0],
        ]
    )


def build_diffusion_vector(
    h: HamiltonianParams, mec: MecModel, tips: Sequence[float], t: float
) -> np.ndarray:
    """Dimensionless diffusion vector (2/hbar)*(m*w*D_qq, D_pp/(m*w), D_qp)."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    tips = mec.validate_tips(tips)
    mw = h.mass * h.omega
    return (2.0 / h.hbar) * np.array(
        [
            mw * mec.d_qq(t, tips),
            mec.d_pp(t, tips) / mw,
            mec.d_qp(t, tips),
        ]
    )


def mecs_from_lindblad(l: LindbladCoefficients, t: float, hbar: float = 1.0):
    """Map linear jump-operator coefficients to (lambda, D_qq, D_pp, D_qp).

    D_qq = (hbar/2) * sum |a_j|^2            friction and diffusion are
    D_pp = (hbar/2) * sum |b_j|^2            pointwise in t; the sign of
    D_qp = -(hbar/2) * Re sum conj(a_j)*b_j  lambda follows the orientation
    lambda = -Im sum conj(a_j)*b_j           of Im(conj(a)*b).
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    a = [complex(f(t)) for f in l.a]
    b = [complex(f(t)) for f in l.b]
    cross = sum(av.conjugate() * bv for av, bv in zip(a, b))
    d_qq = 0.5 * hbar * sum(abs(av) ** 2 for av in a)
    d_pp = 0.5 * hbar * sum(abs(bv) ** 2 for bv in b)
    d_qp = -0.5 * hbar * cross.real
    lam = -cross.imag
    return lam, d_qq, d_pp, d_qp
