"""Double-well potentials split into a convex graph part and a smooth perturbation.

Each potential is the sum of a convex, proper, lower semicontinuous part
``beta_hat`` with ``beta_hat(0) = 0`` and a smooth perturbation ``pi_hat``
whose derivative ``pi`` is globally Lipschitz.  The subdifferential of the
convex part is a maximal monotone graph ``beta`` in the plane, possibly
multivalued and possibly with a bounded effective domain.

The regularized machinery is built from the resolvent: for a level
``lam > 0``, ``J_lam(s)`` is the unique solution of ``J + lam*beta(J) ∋ s``,
the Yosida approximation is ``beta_lam(s) = (s - J_lam(s))/lam``, and the
regularized convex part evaluates in primal form as

    beta_hat_lam(s) = |s - J_lam(s)|^2 / (2*lam) + beta_hat(J_lam(s)),

which coincides with the infimal convolution of ``beta_hat`` with the
scaled quadratic.  Closed forms are used wherever the graph admits them;
the logarithmic graph is inverted by a safeguarded Newton iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import CoercivityError, ConfigurationError, DomainError, NumericalError

#: Default ladder of coercivity slopes scanned from largest to smallest.
ALPHA_LADDER = (8.0, 4.0, 2.0, 1.0, 1.0 / 2.0, 1.0 / 3.0, 1.0 / 4.0,
                1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0)

_FD_STEP = 1e-6  # centered-difference step for derivatives without closed form


@dataclass(frozen=True)
class DomainInterval:
    """Effective domain of a scalar graph: an interval with open or closed ends."""

    lo: float = -math.inf
    hi: float = math.inf
    lo_closed: bool = False
    hi_closed: bool = False

    def contains(self, s: float) -> bool:
        if s < self.lo or s > self.hi:
            return False
        if s == self.lo and not self.lo_closed:
            return False
        if s == self.hi and not self.hi_closed:
            return False
        return True

    def strictly_contains(self, s: float) -> bool:
        return self.lo < s < self.hi

    def closure_contains(self, s: float) -> bool:
        return self.lo <= s <= self.hi

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)


def _xlogx(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0.0
    out[pos] = t[pos] * np.log(t[pos])
    return out


@dataclass(frozen=True)
class PotentialSpec:
    """Convex/smooth split of a double-well potential.

    ``beta_hat`` and ``pi_hat`` are vectorized scalar functions; ``beta``
    maps a point of its domain to the (possibly degenerate, possibly
    unbounded) interval of graph values there; ``pi`` is the derivative of
    ``pi_hat`` with Lipschitz constant ``lipschitz_pi``.
    """

    name: str
    beta_hat: Callable[[np.ndarray], np.ndarray]
    beta: Callable[[float], Tuple[float, float]]
    pi_hat: Callable[[np.ndarray], np.ndarray]
    pi: Callable[[np.ndarray], np.ndarray]
    lipschitz_pi: float
    beta_domain: DomainInterval
    beta_hat_domain: DomainInterval
    pi_prime: Optional[Callable[[np.ndarray], np.ndarray]] = None
    #: set when the graph is a single-valued C^1 function on an open interval
    smooth_graph: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        # custom splits enter the scheme only after passing the sampled
        # structural checks; the built-in constructors are exact by design
        if self.name == "custom":
            validate_potential(self)

    @property
    def stability_shift(self) -> float:
        """Lipschitz constant of ``pi`` plus one; the convexifying shift of the scheme."""
        return self.lipschitz_pi + 1.0

    def pi_derivative(self, s: np.ndarray) -> np.ndarray:
        if self.pi_prime is not None:
            return self.pi_prime(np.asarray(s, dtype=float))
        s = np.asarray(s, dtype=float)
        return (self.pi(s + _FD_STEP) - self.pi(s - _FD_STEP)) / (2.0 * _FD_STEP)

    def beta_interval(self, y: float) -> Tuple[float, float]:
        if not self.beta_domain.contains(y):
            raise DomainError(f"{y!r} is outside the effective domain of the graph")
        return self.beta(y)


def _regular_spec() -> PotentialSpec:
    # quartic double well split so the convex part vanishes at the origin
    # and the perturbation derivative has Lipschitz constant one
    return PotentialSpec(
        name="regular",
        beta_hat=lambda s: np.asarray(s, dtype=float) ** 4 / 4.0,
        beta=lambda y: (y**3, y**3),
        pi_hat=lambda s: (1.0 - 2.0 * np.asarray(s, dtype=float) ** 2) / 4.0,
        pi=lambda s: -np.asarray(s, dtype=float),
        pi_prime=lambda s: -np.ones_like(np.asarray(s, dtype=float)),
        lipschitz_pi=1.0,
        beta_domain=DomainInterval(),
        beta_hat_domain=DomainInterval(),
        smooth_graph=True,
    )


def _logarithmic_spec(c1: float) -> PotentialSpec:
    def beta_hat(s):
        s = np.asarray(s, dtype=float)
        out = np.full_like(s, np.inf)
        ok = np.abs(s) <= 1.0
        out[ok] = _xlogx(1.0 + s[ok]) + _xlogx(1.0 - s[ok])
        return out

    def beta(y):
        v = math.log((1.0 + y) / (1.0 - y))
        return (v, v)

    return PotentialSpec(
        name="logarithmic",
        beta_hat=beta_hat,
        beta=beta,
        pi_hat=lambda s: -c1 * np.asarray(s, dtype=float) ** 2,
        pi=lambda s: -2.0 * c1 * np.asarray(s, dtype=float),
        pi_prime=lambda s: np.full_like(np.asarray(s, dtype=float), -2.0 * c1),
        lipschitz_pi=2.0 * c1,
        beta_domain=DomainInterval(-1.0, 1.0),
        beta_hat_domain=DomainInterval(-1.0, 1.0, True, True),
        smooth_graph=True,
        params={"c1": c1},
    )


def _obstacle_spec(c2: float) -> PotentialSpec:
    def beta_hat(s):
        s = np.asarray(s, dtype=float)
        return np.where(np.abs(s) <= 1.0, 0.0, np.inf)

    def beta(y):
        if abs(y) < 1.0:
            return (0.0, 0.0)
        if y == 1.0:
            return (0.0, math.inf)
        return (-math.inf, 0.0)

    return PotentialSpec(
        name="obstacle",
        beta_hat=beta_hat,
        beta=beta,
        pi_hat=lambda s: -c2 * np.asarray(s, dtype=float) ** 2,
        pi=lambda s: -2.0 * c2 * np.asarray(s, dtype=float),
        pi_prime=lambda s: np.full_like(np.asarray(s, dtype=float), -2.0 * c2),
        lipschitz_pi=2.0 * c2,
        beta_domain=DomainInterval(-1.0, 1.0, True, True),
        beta_hat_domain=DomainInterval(-1.0, 1.0, True, True),
        params={"c2": c2},
    )


def _nonunique_mu_spec() -> PotentialSpec:
    # quadratic plus absolute value: the graph jumps across [-1, 1] at zero,
    # the construction behind the nonuniqueness of the longtime multiplier
    def beta(y):
        if y > 0.0:
            v = 2.0 * y + 1.0
            return (v, v)
        if y < 0.0:
            v = 2.0 * y - 1.0
            return (v, v)
        return (-1.0, 1.0)

    return PotentialSpec(
        name="example_best",
        beta_hat=lambda s: np.asarray(s, dtype=float) ** 2 + np.abs(np.asarray(s, dtype=float)),
        beta=beta,
        pi_hat=lambda s: np.zeros_like(np.asarray(s, dtype=float)),
        pi=lambda s: np.zeros_like(np.asarray(s, dtype=float)),
        pi_prime=lambda s: np.zeros_like(np.asarray(s, dtype=float)),
        lipschitz_pi=0.0,
        beta_domain=DomainInterval(),
        beta_hat_domain=DomainInterval(),
    )


def make_potential(name: str, **params) -> PotentialSpec:
    """Build one of the canonical potentials.

    ``regular``: quartic double well, no parameters.
    ``logarithmic``: entropy well minus ``c1*s**2``; requires ``c1 > 1``.
    ``obstacle``: indicator of [-1, 1] minus ``c2*s**2``; requires ``c2 > 0``.
    ``example_best``: ``s**2 + |s|`` with no perturbation (multivalued at 0).
    """
    if name == "regular":
        if params:
            raise ConfigurationError("regular potential takes no parameters")
        return _regular_spec()
    if name == "logarithmic":
        c1 = params.pop("c1", None)
        if params or c1 is None or not c1 > 1.0:
            raise ConfigurationError("logarithmic potential requires exactly c1 > 1")
        return _logarithmic_spec(float(c1))
    if name == "obstacle":
        c2 = params.pop("c2", None)
        if params or c2 is None or not c2 > 0.0:
            raise ConfigurationError("obstacle potential requires exactly c2 > 0")
        return _obstacle_spec(float(c2))
    if name == "example_best":
        if params:
            raise ConfigurationError("example_best potential takes no parameters")
        return _nonunique_mu_spec()
    raise ConfigurationError(f"unknown potential name: {name!r}")


def zero_potential() -> PotentialSpec:
    """Trivial split with no graph part and no perturbation (testing aid).

    Does not satisfy the quadratic coercivity hypothesis; it exists so that
    linear closed-form solutions of the scheme can be checked.
    """
    zeros = lambda s: np.zeros_like(np.asarray(s, dtype=float))
    return PotentialSpec(
        name="custom",
        beta_hat=zeros,
        beta=lambda y: (0.0, 0.0),
        pi_hat=zeros,
        pi=zeros,
        pi_prime=zeros,
        lipschitz_pi=0.0,
        beta_domain=DomainInterval(),
        beta_hat_domain=DomainInterval(),
        smooth_graph=True,
    )


def validate_potential(spec: PotentialSpec, samples: int = 1000, seed: int = 0,
                       span: float = 3.0) -> None:
    """Sampled check of the structural hypotheses; raises on failure.

    Verifies ``beta_hat(0) = 0`` and nonnegativity, monotonicity of the
    graph on random pairs inside its domain, and the declared Lipschitz
    constant of the perturbation derivative.  Custom specs must pass this
    before entering the scheme.
    """
    rng = np.random.default_rng(seed)
    b0 = float(spec.beta_hat(np.array([0.0]))[0])
    if abs(b0) > 1e-12:
        raise ConfigurationError(f"beta_hat(0) = {b0!r}, expected 0")
    dom = spec.beta_domain
    lo = max(dom.lo, -span)
    hi = min(dom.hi, span)
    pts = rng.uniform(lo, hi, size=2 * samples)
    pts = pts[[dom.contains(p) for p in pts]]
    vals = spec.beta_hat(pts)
    if np.any(vals < -1e-12):
        raise ConfigurationError("beta_hat takes negative values")
    # graph monotonicity: sup beta(s) <= inf beta(t) whenever s < t
    order = np.sort(pts[:samples])
    for s, t in zip(order[:-1], order[1:]):
        if s == t:
            continue
        if spec.beta(s)[1] > spec.beta(t)[0] + 1e-12:
            raise ConfigurationError(f"graph is not monotone between {s} and {t}")
    a = rng.uniform(-span, span, size=samples)
    b = rng.uniform(-span, span, size=samples)
    gap = np.abs(spec.pi(a) - spec.pi(b))
    bound = spec.lipschitz_pi * np.abs(a - b)
    if np.any(gap > bound + 1e-10 * np.maximum(1.0, bound)):
        raise ConfigurationError("declared Lipschitz constant of pi is violated")


@dataclass(frozen=True)
class YosidaRegularization:
    """A potential spec together with a positive regularization level."""

    spec: PotentialSpec
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigurationError("regularization level must be positive")

    def with_level(self, lam: float) -> "YosidaRegularization":
        return replace(self, lam=lam)


def _resolvent_regular(lam, s):
    # J + lam*J^3 = s, single real root of the depressed cubic in hyperbolic form
    p = 1.0 / lam
    arg = (s / lam) / (2.0 * (p / 3.0) ** 1.5)
    return 2.0 * np.sqrt(p / 3.0) * np.sinh(np.arcsinh(arg) / 3.0)


def _resolvent_logarithmic(lam, s, tol=1e-12, budget=100):
    # substitute J = tanh(theta); then tanh(theta) + 2*lam*theta = s is smooth
    # and strictly increasing on the whole line, and beta_lam(s) = 2*theta exactly
    s = np.asarray(s, dtype=float)
    lo = (s - 1.0) / (2.0 * lam)
    hi = (s + 1.0) / (2.0 * lam)
    theta = np.clip(s / (1.0 + 2.0 * lam), lo, hi)
    lo, hi = lo.copy(), hi.copy()
    for _ in range(budget):
        t = np.tanh(theta)
        f = t + 2.0 * lam * theta - s
        if np.max(np.abs(f)) < tol:
            break
        hi = np.where(f > 0, theta, hi)
        lo = np.where(f <= 0, theta, lo)
        step = f / ((1.0 - t * t) + 2.0 * lam)
        candidate = theta - step
        outside = (candidate <= lo) | (candidate >= hi)
        theta = np.where(outside, 0.5 * (lo + hi), candidate)
    else:
        worst = float(np.max(np.abs(np.tanh(theta) + 2.0 * lam * theta - s)))
        raise NumericalError(
            f"logarithmic resolvent failed to converge: residual {worst:.3e} "
            f"after {budget} iterations at level {lam}"
        )
    return np.tanh(theta), 2.0 * theta


def _resolvent_obstacle(s):
    return np.clip(s, -1.0, 1.0)


def _resolvent_nonunique(lam, s):
    s = np.asarray(s, dtype=float)
    shifted = np.sign(s) * np.maximum(np.abs(s) - lam, 0.0)
    return shifted / (1.0 + 2.0 * lam)


def _resolvent_bisection(spec, lam, s, budget=200):
    # generic maximal monotone graph: J is the unique point with
    # s - J in lam*beta(J); bracket via nonexpansiveness through 0
    out = np.empty_like(np.asarray(s, dtype=float).ravel())
    flat = np.asarray(s, dtype=float).ravel()
    dom = spec.beta_domain
    for i, si in enumerate(flat):
        lo = min(0.0, si)
        hi = max(0.0, si)
        lo = max(lo, dom.lo)
        hi = min(hi, dom.hi)
        for _ in range(budget):
            mid = 0.5 * (lo + hi)
            if not dom.contains(mid):
                # nudge into the domain; the bracket endpoints may sit on
                # an open boundary
                mid = math.nextafter(mid, 0.0)
            blo, bhi = spec.beta(mid)
            target = (si - mid) / lam
            if target > bhi:
                lo = mid
            elif target < blo:
                hi = mid
            else:
                break
            if hi - lo < 4.0 * np.finfo(float).eps * max(1.0, abs(si)):
                mid = 0.5 * (lo + hi)
                break
        else:
            raise NumericalError(
                f"resolvent bisection exhausted {budget} iterations at s={si!r}, "
                f"level {lam}: bracket [{lo!r}, {hi!r}]"
            )
        residual = graph_selection_residual(spec, mid, (si - mid) / lam)
        if residual > 1e-10 * max(1.0, abs(si) / lam):
            raise NumericalError(
                f"resolvent bisection left selection residual {residual:.3e} "
                f"at s={si!r}, level {lam}"
            )
        out[i] = mid
    return out.reshape(np.shape(s))


def resolvent(reg: YosidaRegularization, s) -> np.ndarray | float:
    """Resolvent ``J_lam(s)``: the unique solution of ``J + lam*beta(J) ∋ s``.

    Closed forms for the quartic, obstacle and nonunique-multiplier graphs;
    safeguarded Newton for the logarithmic graph; bracketing bisection for
    custom graphs.  Accepts scalars or arrays.
    """
    scalar = np.isscalar(s)
    arr = np.atleast_1d(np.asarray(s, dtype=float))
    name = reg.spec.name
    if name == "regular":
        out = _resolvent_regular(reg.lam, arr)
    elif name == "logarithmic":
        out, _ = _resolvent_logarithmic(reg.lam, arr)
    elif name == "obstacle":
        out = _resolvent_obstacle(arr)
    elif name == "example_best":
        out = _resolvent_nonunique(reg.lam, arr)
    else:
        out = _resolvent_bisection(reg.spec, reg.lam, arr)
    return float(out[0]) if scalar else out


def yosida(reg: YosidaRegularization, s) -> np.ndarray | float:
    """Yosida approximation ``beta_lam(s) = (s - J_lam(s))/lam``.

    This is a selection of the graph at the resolvent point:
    ``beta_lam(s)`` lies in ``beta(J_lam(s))``.
    """
    scalar = np.isscalar(s)
    arr = np.atleast_1d(np.asarray(s, dtype=float))
    if reg.spec.name == "logarithmic":
        _, out = _resolvent_logarithmic(reg.lam, arr)
    else:
        out = (arr - np.asarray(resolvent(reg, arr))) / reg.lam
    return float(out[0]) if scalar else out


def yosida_primal(reg: YosidaRegularization, s) -> np.ndarray | float:
    """Regularized convex part ``beta_hat_lam(s)``, always in [0, beta_hat(s)].

    Evaluated through the resolvent as ``|s - J|^2/(2 lam) + beta_hat(J)``,
    which equals the infimum over r of ``|r - s|^2/(2 lam) + beta_hat(r)``.
    """
    scalar = np.isscalar(s)
    arr = np.atleast_1d(np.asarray(s, dtype=float))
    j = np.asarray(resolvent(reg, arr))
    if reg.spec.beta_domain.bounded:
        # the resolvent may round onto the boundary of an open domain;
        # beta_hat is evaluated in the closure where it is finite
        j = np.clip(j, reg.spec.beta_hat_domain.lo, reg.spec.beta_hat_domain.hi)
    out = (arr - j) ** 2 / (2.0 * reg.lam) + reg.spec.beta_hat(j)
    return float(out[0]) if scalar else out


def yosida_derivative(reg: YosidaRegularization, s) -> np.ndarray | float:
    """Pointwise derivative of the Yosida approximation, in [0, 1/lam].

    Closed forms for the built-in graphs; centered differences with step
    1e-6 otherwise.  At kinks of piecewise-defined graphs the one-sided
    value on the flat side is used.
    """
    scalar = np.isscalar(s)
    arr = np.atleast_1d(np.asarray(s, dtype=float))
    lam = reg.lam
    name = reg.spec.name
    if name == "regular":
        j = _resolvent_regular(lam, arr)
        out = 3.0 * j * j / (1.0 + 3.0 * lam * j * j)
    elif name == "logarithmic":
        j, _ = _resolvent_logarithmic(lam, arr)
        out = 2.0 / ((1.0 - j * j) + 2.0 * lam)
    elif name == "obstacle":
        out = np.where(np.abs(arr) > 1.0, 1.0 / lam, 0.0)
    elif name == "example_best":
        out = np.where(np.abs(arr) <= lam, 1.0 / lam, 2.0 / (1.0 + 2.0 * lam))
    else:
        out = (yosida(reg, arr + _FD_STEP) - yosida(reg, arr - _FD_STEP)) / (2.0 * _FD_STEP)
    return float(out[0]) if scalar else out


def graph_selection_residual(spec: PotentialSpec, y: float, xi: float) -> float:
    """Distance from ``xi`` to the set ``beta(y)``; zero iff a valid selection."""
    lo, hi = spec.beta_interval(float(y))
    if xi < lo:
        return float(lo - xi)
    if xi > hi:
        return float(xi - hi)
    return 0.0


@dataclass(frozen=True)
class CoercivityCertificate:
    """Numerical witness of the quadratic lower bound of the regularized split.

    Certifies ``beta_hat_lam(s) + pi_hat(s) >= alpha*s^2 - C`` on the
    scanned grid for every tested level up to ``lambda_max``.  The bound is
    only witnessed on the finite range recorded here; it is not
    extrapolated beyond it.
    """

    alpha: float
    C: float
    scan_range: Tuple[float, float]
    lambda_max: float
    grid_points: int


def coercivity_check(spec: PotentialSpec, lambdas, scan_range=(-5.0, 5.0),
                     grid: int = 2001, ladder=ALPHA_LADDER) -> CoercivityCertificate:
    """Scan for the largest ladder slope admitting a finite offset.

    For each candidate ``alpha`` (descending) the deficit
    ``beta_hat_lam + pi_hat - alpha*s^2`` is evaluated on the grid for all
    supplied levels.  A candidate is rejected when the deficit is still
    falling at either edge of the range, since the offset would then grow
    with the range and the quadratic growth hypothesis is in doubt.
    Raises :class:`CoercivityError` when every candidate is rejected.
    """
    lo, hi = float(scan_range[0]), float(scan_range[1])
    if not (lo < 0.0 < hi) or abs(lo + hi) > 1e-12 * (hi - lo):
        raise ConfigurationError("scan range must be symmetric around zero")
    if grid < 1000:
        raise ConfigurationError("coercivity scan needs at least 1000 grid points")
    lambdas = sorted(float(v) for v in np.atleast_1d(lambdas))
    if not lambdas or lambdas[0] <= 0:
        raise ConfigurationError("need at least one positive regularization level")
    s = np.linspace(lo, hi, int(grid))
    base = np.full_like(s, np.inf)
    for lam in lambdas:
        reg = YosidaRegularization(spec, lam)
        base = np.minimum(base, yosida_primal(reg, s) + spec.pi_hat(s))
    edge_tol = 1e-9 * max(1.0, float(np.abs(base[np.isfinite(base)]).max()))
    rejected = {}
    for alpha in ladder:
        deficit = base - alpha * s * s
        falling_right = deficit[-1] < deficit[-2] - edge_tol
        falling_left = deficit[0] < deficit[1] - edge_tol
        if falling_left or falling_right:
            rejected[alpha] = "deficit decreasing at the range edge"
            continue
        c = max(0.0, float(-deficit.min()))
        return CoercivityCertificate(
            alpha=float(alpha), C=c, scan_range=(lo, hi),
            lambda_max=lambdas[-1], grid_points=int(grid),
        )
    raise CoercivityError(
        "no quadratic lower bound certified on the scanned range",
        report={"rejected": rejected, "scan_range": (lo, hi), "lambdas": lambdas},
    )
