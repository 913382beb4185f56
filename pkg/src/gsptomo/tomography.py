"""Forward Gaussian Radon transform and the finite-point cumulant recovery.

A symplectic tomogram is the marginal density of mu*q + nu*p along the
phase-space line X - mu*q - nu*p = 0.  For a Gaussian state the tomogram is
a Gaussian with mean mu*<q> + nu*<p> and variance
mu^2 Dq^2 + nu^2 Dp^2 + 2 mu nu cov.  The recovery path inverts a handful of
tomogram values back into the five cumulants: the x = 0 value ties the mean
to the spread, each further value yields a transcendental equation for the
spread with up to two roots, and the root shared between points selects the
physical one.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .core import CumulantState, HamiltonianParams
from .errors import (
    DegenerateCovariance,
    DegenerateLine,
    InvalidDensity,
    NoCommonRoot,
    RobertsonBreachWarning,
)

__all__ = [
    "TomogramLine",
    "TomogramPoint",
    "PointBudget",
    "LINE_Q",
    "LINE_P",
    "LINE_DIAG",
    "wigner_gaussian",
    "radon_gaussian",
    "line_moments",
    "sample_tomogram",
    "default_first_cumulant_xs",
    "default_covariance_xs",
    "recover_mean_and_variance",
    "recover_covariance",
    "reconstruct_cumulants",
    "points_to_json",
    "points_from_json",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_BRENT_RTOL = 4.0 * np.finfo(float).eps


@dataclass(frozen=True)
class TomogramLine:
    """Coefficients (mu, nu) of the line X - mu*q - nu*p = 0."""

    mu: float
    nu: float

    def __post_init__(self):
        if self.mu == 0.0 and self.nu == 0.0:
            raise ValueError("(mu, nu) = (0, 0) does not define a line")


LINE_Q = TomogramLine(1.0, 0.0)
LINE_P = TomogramLine(0.0, 1.0)
LINE_DIAG = TomogramLine(1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0))


@dataclass(frozen=True)
class TomogramPoint:
    """One sampled marginal-density value at abscissa x on a line."""

    line: TomogramLine
    x: float
    value: float
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.value < 0.0:
            raise ValueError("tomogram values are probability densities, >= 0")
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be nonnegative")


@dataclass(frozen=True, eq=False)
class PointBudget:
    """Tomographic points consumed, per line and in total."""

    per_tomogram: Mapping
    total: int

    def __post_init__(self):
        object.__setattr__(self, "per_tomogram", dict(self.per_tomogram))
        if self.total != sum(self.per_tomogram.values()):
            raise ValueError("total must equal the sum of per-tomogram counts")

    @classmethod
    def from_counts(cls, counts: Mapping) -> "PointBudget":
        counts = dict(counts)
        return cls(per_tomogram=counts, total=sum(counts.values()))


def wigner_gaussian(state: CumulantState, h: HamiltonianParams, q: float, p: float) -> float:
    """Gaussian Wigner density at the physical phase-space point (q, p)."""
    c = state.to_physical(h)
    det = c.var_q * c.var_p - c.cov_qp ** 2
    if det <= 0.0:
        raise DegenerateCovariance(
            f"var_q*var_p - cov^2 = {det:.3e} is not positive"
        )
    dq = q - c.mean_q
    dp = p - c.mean_p
    quad = (c.var_p * dq ** 2 - 2.0 * c.cov_qp * dq * dp + c.var_q * dp ** 2) / (2.0 * det)
    return float(np.exp(-quad) / (2.0 * math.pi * math.sqrt(det)))


def line_moments(
    state: CumulantState, h: HamiltonianParams, line: TomogramLine
) -> Tuple[float, float]:
    """Mean and variance of the marginal along `line`, in physical units."""
    c = state.to_physical(h)
    mean = line.mu * c.mean_q + line.nu * c.mean_p
    spread = (
        c.var_q * line.mu ** 2
        + c.var_p * line.nu ** 2
        + 2.0 * c.cov_qp * line.mu * line.nu
    )
    return float(mean), float(spread)


def radon_gaussian(
    state: CumulantState, h: HamiltonianParams, line: TomogramLine, x: float
) -> float:
    """Marginal density of the Gaussian state along `line`, evaluated at x."""
    mean, spread = line_moments(state, h, line)
    if spread <= 0.0:
        raise DegenerateLine(
            f"marginal spread {spread:.3e} along (mu={line.mu}, nu={line.nu}) "
            "is not positive"
        )
    return float(np.exp(-((x - mean) ** 2) / (2.0 * spread)) / math.sqrt(2.0 * math.pi * spread))


def sample_tomogram(
    state: CumulantState,
    h: HamiltonianParams,
    line: TomogramLine,
    xs: Sequence[float],
    noise_sigma: float = 0.0,
    rng_seed=None,
) -> list:
    """Evaluate the marginal at each x, perturbed by independent zero-mean
    Gaussian noise of standard deviation `noise_sigma` and clamped at 0."""
    if noise_sigma < 0.0:
        raise ValueError("noise_sigma must be nonnegative")
    rng = np.random.default_rng(rng_seed)
    points = []
    for x in xs:
        value = radon_gaussian(state, h, line, x)
        if noise_sigma > 0.0:
            value = max(value + rng.normal(0.0, noise_sigma), 0.0)
        points.append(TomogramPoint(line=line, x=float(x), value=value, noise_sigma=noise_sigma))
    return points


def default_first_cumulant_xs(
    scale_guess: float, center_guess: float = 0.0, sign_known: bool = False
) -> list:
    """Default abscissae for a first-cumulant tomogram: the mandatory x = 0
    plus points at +-1.5 (and -0.75, when the sign is unknown) times a prior
    scale guess about a prior center.

    The extra point sits between the origin and the prior center: on that
    side the spread equation has well-separated roots, whereas points just
    past the center produce near-tangent root pairs that noise can erase.
    """
    if scale_guess <= 0.0:
        raise ValueError("scale_guess must be positive")
    offsets = [1.5, -1.5] if sign_known else [1.5, -1.5, -0.75]
    xs = [0.0]
    for off in offsets:
        x = center_guess + off * scale_guess
        if abs(x) < 1e-9 * scale_guess:
            x = center_guess + (off + 0.1) * scale_guess
        xs.append(x)
    return xs


def default_covariance_xs(center_guess: float, scale_guess: float) -> list:
    """Two abscissae for the covariance tomogram, offset from the (known) mean."""
    if scale_guess <= 0.0:
        raise ValueError("scale_guess must be positive")
    return [center_guess + 0.75 * scale_guess, center_guess + 1.5 * scale_guess]


# ---------------------------------------------------------------------------
# transcendental inversion helpers

def _scan_sign_changes(fn, xs, ys, finite) -> list:
    roots = []
    for i in range(len(xs) - 1):
        if not (finite[i] and finite[i + 1]):
            continue
        y0, y1 = ys[i], ys[i + 1]
        if y0 == 0.0:
            roots.append(float(xs[i]))
            continue
        if y0 * y1 < 0.0:
            r = brentq(
                lambda d: float(fn(d)), xs[i], xs[i + 1], xtol=1e-14, rtol=_BRENT_RTOL
            )
            roots.append(float(r))
    if len(xs) and finite[-1] and ys[-1] == 0.0:
        roots.append(float(xs[-1]))
    return roots


def _bracketed_roots(fn, lo: float, hi: float, n_grid: int) -> list:
    """All sign-change roots of fn on [lo, hi], located on a log grid and
    refined by bracketed root finding.

    Root pairs can hide between adjacent nodes without a sign change; a
    second pass subdivides the neighbourhood of every interior extremum of
    the scanned values to catch them.
    """
    xs = np.geomspace(lo, hi, n_grid)
    with np.errstate(all="ignore"):
        ys = np.asarray(fn(xs), dtype=float)
    finite = np.isfinite(ys)
    roots = _scan_sign_changes(fn, xs, ys, finite)

    for i in range(1, len(xs) - 1):
        if not (finite[i - 1] and finite[i] and finite[i + 1]):
            continue
        dips_down = ys[i] > 0.0 and ys[i - 1] >= ys[i] and ys[i + 1] >= ys[i]
        bulges_up = ys[i] < 0.0 and ys[i - 1] <= ys[i] and ys[i + 1] <= ys[i]
        if not (dips_down or bulges_up):
            continue
        sub = np.linspace(xs[i - 1], xs[i + 1], 65)
        with np.errstate(all="ignore"):
            sub_ys = np.asarray(fn(sub), dtype=float)
        roots += _scan_sign_changes(fn, sub, sub_ys, np.isfinite(sub_ys))

    # drop near-duplicates from adjacent or overlapping brackets
    roots.sort()
    out = []
    for r in roots:
        if not out or abs(r - out[-1]) > 1e-10 * max(1.0, abs(r)):
            out.append(r)
    return out


def _numeric_slope(fn, d: float) -> float:
    step = 1e-6 * d
    return float((fn(d + step) - fn(d - step)) / (2.0 * step))


class _StdEquation:
    """Residual of the spread equation for one nonzero-x point on one sign
    branch:  2 d^2 ln(B/d) - (x - sign * d * g(d))^2, with
    g(d)^2 = 2 ln(A/d) from the x = 0 value."""

    def __init__(self, v0: float, x: float, v: float, sign: float):
        if v0 <= 0.0 or v <= 0.0:
            raise InvalidDensity("tomogram values must be strictly positive here")
        self.log_a = -math.log(v0 * _SQRT_2PI)
        self.log_b = -math.log(v * _SQRT_2PI)
        self.x = x
        self.v = v
        self.v0 = v0
        self.sign = sign

    def g_squared(self, d):
        g2 = 2.0 * (self.log_a - np.log(d))
        # clamp float underflow at the density maximum (mean ~ 0)
        return np.where(g2 < 0.0, np.where(g2 > -1e-12, 0.0, np.nan), g2)

    def __call__(self, d):
        d = np.asarray(d, dtype=float)
        mean = self.sign * d * np.sqrt(self.g_squared(d))
        return 2.0 * d * d * (self.log_b - np.log(d)) - (self.x - mean) ** 2

    def mean_at(self, d: float) -> float:
        g2 = float(self.g_squared(d))
        if not np.isfinite(g2):
            g2 = 0.0
        return self.sign * d * math.sqrt(g2)

    def _value_gradients(self, d: float):
        # dF/dv and dF/dv0 (the two density values carrying the noise)
        dv = -2.0 * d * d / self.v
        g2 = float(self.g_squared(d))
        if np.isfinite(g2) and g2 > 1e-20:
            mean = self.sign * d * math.sqrt(g2)
            dv0 = -2.0 * (self.x - mean) * self.sign * d / (math.sqrt(g2) * self.v0)
        else:
            dv0 = 0.0
        return dv, dv0

    def residual_sigma(self, d: float, noise_sigma: float) -> float:
        """Noise-propagated standard deviation of the residual itself."""
        dv, dv0 = self._value_gradients(d)
        return math.hypot(dv * noise_sigma, dv0 * noise_sigma)

    def root_noise_sigma(self, d: float, noise_sigma: float) -> float:
        """First-order propagation of the density noise into the root."""
        if noise_sigma == 0.0:
            return 0.0
        slope = _numeric_slope(self, d)
        if slope == 0.0:
            return math.inf
        return self.residual_sigma(d, noise_sigma) / abs(slope)


def _candidate_roots(eq, lo: float, hi: float, n_grid: int, noise_sigma: float):
    """Roots of one residual equation plus, under noise, tangency rescues.

    A near-tangent root pair is erased whenever noise pushes the residual
    extremum across zero; the surviving near-zero local minimum of |F| is
    then admitted as a candidate provided it lies inside its own noise band,
    with an uncertainty spanning that band.
    """
    roots = _bracketed_roots(eq, lo, hi, n_grid)
    sigmas = [eq.root_noise_sigma(r, noise_sigma) for r in roots]
    if noise_sigma <= 0.0:
        return roots, sigmas

    xs = np.geomspace(lo, hi, 4 * n_grid)
    with np.errstate(all="ignore"):
        ys = np.abs(np.asarray(eq(xs), dtype=float))
    ys = np.where(np.isfinite(ys), ys, np.inf)
    # hide neighbourhoods of genuine roots, then look at the closest approach
    cell = math.log(xs[1] / xs[0])
    for r in roots:
        ys[np.abs(np.log(xs / r)) < 2.0 * cell] = np.inf
    k = int(np.argmin(ys))
    if not np.isfinite(ys[k]):
        return roots, sigmas
    sig_f = eq.residual_sigma(float(xs[k]), noise_sigma)
    if ys[k] <= 3.0 * sig_f:
        band = ys <= 3.0 * sig_f
        left = k
        while left > 0 and band[left - 1]:
            left -= 1
        right = k
        while right < len(xs) - 1 and band[right + 1]:
            right += 1
        width = 0.5 * (xs[right] - xs[left])
        roots.append(float(xs[k]))
        sigmas.append(float(max(width, xs[k] * 1e-6)))
    return roots, sigmas


def _match_common_root(root_sets, sigma_sets, match_rtol):
    """Value common to every root set, within a tolerance that combines the
    relative matching tolerance with 3x the noise-propagated sigmas.
    Returns (root, mismatch) or None."""
    best = None
    for r0, s0 in zip(root_sets[0], sigma_sets[0]):
        partners = [r0]
        ok = True
        worst = 0.0
        for roots, sigmas in zip(root_sets[1:], sigma_sets[1:]):
            gaps = [abs(r0 - r) for r in roots]
            j = int(np.argmin(gaps))
            tol = match_rtol * max(abs(r0), abs(roots[j])) + 3.0 * math.hypot(s0, sigmas[j])
            if gaps[j] > tol:
                ok = False
                break
            worst = max(worst, gaps[j])
            partners.append(roots[j])
        if ok:
            mean_root = float(np.mean(partners))
            if best is None or worst < best[1]:
                best = (mean_root, worst)
    return best


def _split_points(points):
    points = list(points)
    if not points:
        raise ValueError("no tomogram points given")
    line = points[0].line
    if any(p.line != line for p in points):
        raise ValueError("all points must lie on the same tomogram line")
    zero = [p for p in points if abs(p.x) < 1e-12]
    nonzero = [p for p in points if abs(p.x) >= 1e-12]
    xs = [p.x for p in nonzero]
    if len(set(xs)) != len(xs):
        raise ValueError("nonzero abscissae must be distinct")
    return line, zero, nonzero


def recover_mean_and_variance(
    points: Sequence[TomogramPoint],
    sign_known: Optional[int] = None,
    *,
    root_interval: Tuple[float, float] = (1e-6, 1e3),
    grid_points: int = 64,
    match_rtol: float = 1e-6,
):
    """Recover (mean, variance, used_points) of one marginal from tomogram
    values on a single line.

    Needs the x = 0 point plus two further points when the sign of the mean
    is known (3 points used), or three further points otherwise (4 used);
    both sign branches are then tested and the branch whose spread roots
    agree across all points wins.
    """
    line, zero, nonzero = _split_points(points)
    if not zero:
        raise ValueError("the point at x = 0 is required")
    v0_point = zero[0]
    if v0_point.value <= 0.0:
        raise InvalidDensity("x = 0 tomogram value must be strictly positive")

    if sign_known is not None:
        if sign_known not in (-1, 1):
            raise ValueError("sign_known must be -1 or +1")
        if len(nonzero) < 2:
            raise ValueError("need two nonzero-x points when the sign is known")
        active = nonzero[:2]
        branches = (float(sign_known),)
        used = 3
    else:
        if len(nonzero) < 3:
            raise ValueError("need three nonzero-x points when the sign is unknown")
        active = nonzero[:3]
        branches = (1.0, -1.0)
        used = 4

    lo, hi = root_interval
    a_upper = 1.0 / (v0_point.value * _SQRT_2PI)
    hi_eff = min(hi, a_upper * (1.0 - 1e-14))
    if hi_eff <= lo:
        raise InvalidDensity(
            "x = 0 density leaves no feasible standard deviation in the interval"
        )

    candidates = []
    for sign in branches:
        eqs = [_StdEquation(v0_point.value, p.x, p.value, sign) for p in active]
        root_sets, sigma_sets = [], []
        failed = False
        for eq, p in zip(eqs, active):
            roots, sigmas = _candidate_roots(eq, lo, hi_eff, grid_points, p.noise_sigma)
            if not roots:
                failed = True
                break
            root_sets.append(roots)
            sigma_sets.append(sigmas)
        if failed:
            continue
        match = _match_common_root(root_sets, sigma_sets, match_rtol)
        if match is not None:
            d, mismatch = match
            candidates.append((mismatch, sign, d, eqs[0]))

    if not candidates:
        raise NoCommonRoot(
            "no spread value is consistent with all tomogram points "
            "(inconsistent or too-noisy data)"
        )
    candidates.sort(key=lambda c: (c[0], -c[1]))
    _, sign, d, eq = candidates[0]
    return eq.mean_at(d), d * d, used


class _VarianceEquation:
    """Residual ln(v) + ln(2 pi V)/2 + (x - m0)^2 / (2V) for the marginal
    variance V of a tomogram whose mean m0 is already known."""

    def __init__(self, v: float, x: float, m0: float):
        if v <= 0.0:
            raise InvalidDensity("tomogram values must be strictly positive here")
        self.log_v = math.log(v)
        self.u = (x - m0) ** 2
        self.v = v

    def __call__(self, var):
        var = np.asarray(var, dtype=float)
        return self.log_v + 0.5 * np.log(2.0 * math.pi * var) + self.u / (2.0 * var)

    def residual_sigma(self, var: float, noise_sigma: float) -> float:
        return noise_sigma / self.v

    def root_noise_sigma(self, var: float, noise_sigma: float) -> float:
        if noise_sigma == 0.0:
            return 0.0
        slope = 0.5 / var - self.u / (2.0 * var * var)
        if slope == 0.0:
            return math.inf
        return abs(noise_sigma / self.v / slope)


def recover_covariance(
    points: Sequence[TomogramPoint],
    known_means: Tuple[float, float],
    known_variances: Tuple[float, float],
    *,
    hbar: float = 1.0,
    root_interval: Tuple[float, float] = (1e-6, 1e3),
    grid_points: int = 64,
    match_rtol: float = 1e-6,
) -> float:
    """Recover the covariance from two points of a mixed-quadrature tomogram
    whose mean is fixed by the already-known first cumulants.

    The marginal variance V = mu^2 Dq^2 + nu^2 Dp^2 + 2 mu nu cov is solved
    per point (up to two roots each); the common root yields the covariance.
    Warns instead of failing when the result breaks the uncertainty bound.
    """
    line, zero, nonzero = _split_points(points)
    pts = (zero + nonzero)[:2]
    if len(points) < 2 or len({p.x for p in pts}) != 2:
        raise ValueError("need two points at distinct x")
    if line.mu == 0.0 or line.nu == 0.0:
        raise ValueError("covariance recovery needs a line mixing q and p")
    mean_q, mean_p = known_means
    var_q, var_p = known_variances
    m0 = line.mu * mean_q + line.nu * mean_p

    lo, hi = root_interval[0] ** 2, root_interval[1] ** 2
    root_sets, sigma_sets = [], []
    for p in pts:
        eq = _VarianceEquation(p.value, p.x, m0)
        roots, sigmas = _candidate_roots(eq, lo, hi, grid_points, p.noise_sigma)
        if not roots:
            raise NoCommonRoot(
                f"no marginal variance reproduces the tomogram value at x={p.x}"
            )
        root_sets.append(roots)
        sigma_sets.append(sigmas)

    match = _match_common_root(root_sets, sigma_sets, match_rtol)
    if match is None:
        raise NoCommonRoot("the two covariance points share no variance root")
    spread = match[0]
    cov = (spread - line.mu ** 2 * var_q - line.nu ** 2 * var_p) / (2.0 * line.mu * line.nu)

    rs = var_q * var_p - cov ** 2
    bound = hbar ** 2 / 4.0
    if rs < bound - 1e-6 * max(1.0, var_q * var_p):
        warnings.warn(
            f"recovered covariance breaks the uncertainty bound: "
            f"var_q*var_p - cov^2 = {rs:.6e} < {bound:.6e}",
            RobertsonBreachWarning,
            stacklevel=2,
        )
    return float(cov)


def _require_line(actual: TomogramLine, expected: TomogramLine, label: str):
    if not (
        math.isclose(actual.mu, expected.mu, abs_tol=1e-9)
        and math.isclose(actual.nu, expected.nu, abs_tol=1e-9)
    ):
        raise ValueError(
            f"{label} points must lie on (mu, nu) = ({expected.mu}, {expected.nu})"
        )


def reconstruct_cumulants(
    points_q: Sequence[TomogramPoint],
    points_p: Sequence[TomogramPoint],
    points_cov: Sequence[TomogramPoint],
    signs: Tuple[Optional[int], Optional[int]] = (None, None),
    h: Optional[HamiltonianParams] = None,
    t: float = 0.0,
    **solver_kwargs,
):
    """Full five-cumulant recovery from the three canonical tomogram lines.

    Returns the dimensionless state and the exact point budget: 3 or 4 points
    per first-cumulant line depending on sign knowledge, plus 2 for the
    covariance line (8 or 10 in total).
    """
    if h is None:
        h = HamiltonianParams()
    _require_line(points_q[0].line, LINE_Q, "position")
    _require_line(points_p[0].line, LINE_P, "momentum")
    _require_line(points_cov[0].line, LINE_DIAG, "covariance")

    mean_q, var_q, used_q = recover_mean_and_variance(points_q, signs[0], **solver_kwargs)
    mean_p, var_p, used_p = recover_mean_and_variance(points_p, signs[1], **solver_kwargs)
    cov = recover_covariance(
        points_cov,
        (mean_q, mean_p),
        (var_q, var_p),
        hbar=h.hbar,
        **solver_kwargs,
    )
    budget = PointBudget.from_counts(
        {LINE_Q: used_q, LINE_P: used_p, LINE_DIAG: 2}
    )
    state = CumulantState.from_physical(t, h, mean_q, mean_p, var_q, var_p, cov)
    return state, budget


def points_to_json(
    line: TomogramLine,
    points: Sequence[TomogramPoint],
    noise_sigma: float = 0.0,
    seed=None,
) -> str:
    doc = {
        "line": {"mu": line.mu, "nu": line.nu},
        "points": [{"x": p.x, "value": p.value} for p in points],
        "noise_sigma": noise_sigma,
        "seed": seed,
    }
    return json.dumps(doc, indent=2)


def points_from_json(text: str):
    doc = json.loads(text)
    line = TomogramLine(mu=float(doc["line"]["mu"]), nu=float(doc["line"]["nu"]))
    noise_sigma = float(doc.get("noise_sigma", 0.0))
    points = [
        TomogramPoint(line=line, x=float(e["x"]), value=float(e["value"]), noise_sigma=noise_sigma)
        for e in doc["points"]
    ]
    return line, points, noise_sigma, doc.get("seed")
