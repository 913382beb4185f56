"""Cumulant evolution, closed-form propagators and rotating-frame relations.

The first cumulants obey ds/dt = (M - lambda(t) I) s and the second obey
dx/dt = (R - 2 lambda(t) I) x + D(t), with M, R the constant drift generators
of :mod:`gsptomo.core`.  e^{tM} has a closed form through
eta = sqrt(delta^2 - omega^2), analytically continued to i*Omega when
eta^2 < 0; e^{tR} is computed by a dense scaling-and-squaring routine.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .core import (
    CumulantState,
    HamiltonianParams,
    MecModel,
    RS_BOUND,
    build_diffusion_vector,
    build_M,
    build_R,
)
from .errors import DomainError, IntegrationFailure, InvariantBreach

__all__ = [
    "Propagators",
    "Trajectory",
    "make_propagators",
    "evolve",
    "to_rotating_first",
    "lambda_integral_from_measurement",
    "second_cumulant_integral_relation",
    "trajectory_csv",
    "trajectory_to_csv",
]

# Switch sinh(eta t)/eta and cosh(eta t) to their Taylor forms below this
# value of |eta^2| t^2 to avoid 0/0 at the critical boundary eta = 0.
_SERIES_THRESHOLD = 1e-8


def _cosh_like(w: float) -> float:
    # cosh(sqrt(w)) continued through w <= 0; w = eta^2 t^2
    if abs(w) < _SERIES_THRESHOLD:
        return 1.0 + w * (1 / 2 + w * (1 / 24 + w * (1 / 720 + w * (1 / 40320 + w / 3628800))))
    if w > 0:
        return float(np.cosh(np.sqrt(w)))
    return float(np.cos(np.sqrt(-w)))


def _sinhc_like(w: float, t: float) -> float:
    # sinh(eta t)/eta continued through eta^2 <= 0; w = eta^2 t^2
    if abs(w) < _SERIES_THRESHOLD:
        return t * (1.0 + w * (1 / 6 + w * (1 / 120 + w * (1 / 5040 + w * (1 / 362880 + w / 39916800)))))
    if w > 0:
        eta = np.sqrt(w) / abs(t)
        return float(np.sinh(eta * t) / eta)
    omega_eff = np.sqrt(-w) / abs(t)
    return float(np.sin(omega_eff * t) / omega_eff)


@dataclass(frozen=True, eq=False)
class Propagators:
    """Closed-form e^{tM} and dense e^{tR} for fixed Hamiltonian parameters."""

    exp_tM: Callable[[float], np.ndarray]
    exp_tR: Callable[[float], np.ndarray]
    eta_squared: float


def make_propagators(h: HamiltonianParams) -> Propagators:
    """Build the propagator pair for the drift generators of `h`.

    e^{tM} = cosh(eta t) I + sinh(eta t)/eta M with eta^2 = delta^2 - omega^2;
    for eta^2 < 0 this is cos(Omega t) I + sin(Omega t)/Omega M with
    Omega = sqrt(omega^2 - delta^2), and a series form bridges eta ~ 0.
    Both matrices have unit determinant (trace-free generators).
    """
    m = build_M(h)
    r = build_R(h)
    eta2 = h.eta_squared
    eye2 = np.eye(2)

    def exp_tm(t: float) -> np.ndarray:
        t = float(t)
        w = eta2 * t * t
        return _cosh_like(w) * eye2 + _sinhc_like(w, t) * m

    def exp_tr(t: float) -> np.ndarray:
        return expm(float(t) * r)

    return Propagators(exp_tM=exp_tm, exp_tR=exp_tr, eta_squared=eta2)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Samples of a cumulant evolution at strictly increasing times."""

    samples: tuple
    tips: np.ndarray
    integrator_stats: dict

    def __post_init__(self):
        tips = np.array(self.tips, dtype=float)
        tips.setflags(write=False)
        object.__setattr__(self, "tips", tips)
        object.__setattr__(self, "samples", tuple(self.samples))
        times = self.times
        if len(times) > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("sample times must be strictly increasing")

    @property
    def times(self) -> np.ndarray:
        return np.array([st.t for st in self.samples])

    @property
    def s_array(self) -> np.ndarray:
        return np.array([st.s for st in self.samples])

    @property
    def x_array(self) -> np.ndarray:
        return np.array([st.x for st in self.samples])

    def state_at(self, t: float) -> CumulantState:
        """Exact sample if t is on the grid, else linear interpolation."""
        times = self.times
        idx = np.searchsorted(times, t)
        if idx < len(times) and times[idx] == t:
            return self.samples[idx]
        if t < times[0] or t > times[-1]:
            raise ValueError(f"t={t} outside sampled range [{times[0]}, {times[-1]}]")
        y = np.array(
            [np.interp(t, times, col) for col in np.c_[self.s_array, self.x_array].T]
        )
        return CumulantState.from_vector(t, y)


def evolve(
    initial: CumulantState,
    h: HamiltonianParams,
    mec: MecModel,
    tips: Sequence[float],
    t_grid: Sequence[float],
    *,
    rtol: float = 1e-9,
    atol: float = 1e-9,
    invariant_tol: float = 1e-6,
) -> Trajectory:
    """Integrate the cumulant equations and sample them at `t_grid`.

    Uses an adaptive embedded Runge-Kutta 4(5) pair.  Raises
    IntegrationFailure if the controller gives up and InvariantBreach if the
    uncertainty bound is violated beyond `invariant_tol` anywhere on the
    grid, which signals an unphysical coefficient model.
    """
    tips = mec.validate_tips(tips)
    grid = np.asarray(t_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("t_grid must be a nonempty 1-D sequence")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    if grid[0] < initial.t:
        raise ValueError("t_grid must not start before the initial time")

    m = build_M(h)
    r = build_R(h)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        lam = mec.lambda_(t, tips)
        d = build_diffusion_vector(h, mec, tips, t)
        ds = m @ y[:2] - lam * y[:2]
        dx = r @ y[2:] - 2.0 * lam * y[2:] + d
        return np.concatenate([ds, dx])

    sol = solve_ivp(
        rhs,
        (initial.t, grid[-1]),
        initial.as_vector(),
        method="RK45",
        t_eval=grid,
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise IntegrationFailure(sol.message)

    ys = sol.y.T
    rs = ys[:, 2] * ys[:, 3] - ys[:, 4] ** 2
    slack = invariant_tol * np.maximum(1.0, ys[:, 2] * ys[:, 3])
    if np.any(rs < RS_BOUND - slack):
        worst = int(np.argmin(rs - (RS_BOUND - slack)))
        raise InvariantBreach(
            f"Robertson-Schrodinger violated at t={sol.t[worst]:.6g}: "
            f"x0*x1 - x2^2 = {rs[worst]:.6e}"
        )

    samples = tuple(CumulantState.from_vector(t, y) for t, y in zip(sol.t, ys))
    stats = {
        "nfev": int(sol.nfev),
        "status": int(sol.status),
        "rtol": rtol,
        "atol": atol,
    }
    return Trajectory(samples=samples, tips=tips, integrator_stats=stats)


def to_rotating_first(s_traj: Trajectory, p: Propagators) -> np.ndarray:
    """Rotating-frame first cumulants e^{-tM} s(t), one row per sample."""
    if not s_traj.samples:
        raise ValueError("trajectory is empty")
    return np.array([p.exp_tM(-st.t) @ st.s for st in s_traj.samples])


def lambda_integral_from_measurement(s_tilde_0: float, s_tilde_t: float) -> float:
    """Accumulated friction ln(s~(0)/s~(t)) from one rotating-frame component.

    Raises DomainError when the ratio is not strictly positive, e.g. when a
    component with a zero crossing was chosen.
    """
    if s_tilde_0 == 0.0 or s_tilde_t == 0.0 or (s_tilde_0 / s_tilde_t) <= 0.0:
        raise DomainError(
            "rotating-frame components must be nonzero with equal signs; "
            f"got {s_tilde_0!r} and {s_tilde_t!r}"
        )
    return float(np.log(s_tilde_0 / s_tilde_t))


def second_cumulant_integral_relation(
    x_t: Sequence[float],
    x_0: Sequence[float],
    p: Propagators,
    lambda_int_0_t: float,
    t: float,
) -> np.ndarray:
    """Measured side of the accumulated-diffusion relation,
    x(t) - e^{tR} e^{-2 int lambda} x(0).

    For the true dynamics this equals the weighted integral of the diffusion
    vector over [0, t].
    """
    x_t = np.asarray(x_t, dtype=float)
    x_0 = np.asarray(x_0, dtype=float)
    return x_t - p.exp_tR(t) @ (np.exp(-2.0 * lambda_int_0_t) * x_0)


def trajectory_csv(
    traj: Trajectory,
    h: HamiltonianParams,
    tip_names: Sequence[str] = (),
    extra_header: Sequence[str] = (),
) -> str:
    """Render a trajectory as CSV with a '#' comment header carrying h and tips."""
    buf = io.StringIO()
    buf.write(
        f"# hamiltonian: mass={h.mass!r} omega={h.omega!r} "
        f"delta={h.delta!r} hbar={h.hbar!r}\n"
    )
    if tip_names:
        pairs = " ".join(f"{n}={v!r}" for n, v in zip(tip_names, traj.tips))
        buf.write(f"# tips: {pairs}\n")
    else:
        buf.write(f"# tips: {np.array2string(traj.tips, separator=', ')}\n")
    for line in extra_header:
        buf.write(f"# {line}\n")
    buf.write("t,s1,s2,x1,x2,x3\n")
    for st in traj.samples:
        row = np.concatenate([[st.t], st.s, st.x])
        buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
    return buf.getvalue()


def trajectory_to_csv(traj, h, path, tip_names=(), extra_header=()):
    with open(path, "w") as fh:
        fh.write(trajectory_csv(traj, h, tip_names, extra_header))
