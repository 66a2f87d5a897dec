"""Late-time diagnostics: limit-point probes and stationarity residuals.

The long-run behavior of the state splits along the first eigenvalue of
the first operator.  When it is positive, the potential decays to zero
and every limit point of the state solves the stationary inclusion

    B2s y + beta(y) + pi(y) ∋ u_inf.

When it vanishes, the limit points satisfy the same inclusion up to an
additional spatially constant function mu_inf(t), which is nonunique and
time dependent in general; under a smooth single-valued graph and a range
confinement it is uniquely determined and constant.  The probes below
witness these statements computationally: Cauchy gaps of snapshots in the
plain norm plus a uniform graph-norm bound stand in for the weak
compactness, the constant part of the potential is extracted from a
trailing window, and the stationarity residual measures the distance of
the reconstructed graph selection from the graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import potentials as pot
from . import spectral as sp
from .errors import BranchError, DomainError, InsufficientDataError
from .stepper import DiscreteTrajectory


@dataclass(frozen=True)
class MuTailStats:
    """Potential statistics over the trailing window of a run."""

    window: tuple
    sup_norm_mu: float
    integral_ar_mu_sq: float
    mean_mu_times: np.ndarray
    mean_mu_series: np.ndarray


def _window_steps(traj: DiscreteTrajectory, window_fraction: float):
    if not (0.0 < window_fraction < 1.0):
        raise ValueError("window fraction must lie in (0, 1)")
    start = int(math.ceil(traj.steps * (1.0 - window_fraction)))
    return range(start, traj.steps + 1)


def mu_tail_stats(traj: DiscreteTrajectory, window_fraction: float = 0.5) -> MuTailStats:
    """Sup norm, power-norm integral and mean series of mu over the tail window."""
    op = traj.config.op_A
    steps = list(_window_steps(traj, window_fraction))
    sup = 0.0
    integral = 0.0
    means = []
    for k in steps:
        mu = traj.mus[k]
        sup = max(sup, sp.norm(mu))
        if k > 0:
            integral += traj.h * sp.norm(sp.apply_power(op, mu)) ** 2
        means.append(sp.mean(mu))
    times = traj.h * np.array(steps, dtype=float)
    return MuTailStats(
        window=(float(times[0]), float(times[-1])),
        sup_norm_mu=float(sup),
        integral_ar_mu_sq=float(integral),
        mean_mu_times=times,
        mean_mu_series=np.array(means),
    )


@dataclass(frozen=True)
class MuInfinityEstimate:
    """Space-independent part of the potential on the tail window.

    ``flatness`` is the largest deviation of mu from its spatial mean over
    the window; a small value witnesses that the potential has become
    spatially constant, which is what the zero-eigenvalue branch predicts.
    """

    times: np.ndarray
    series: np.ndarray
    flatness: float

    @property
    def tail_average(self) -> float:
        return float(self.series.mean())

    @property
    def spread(self) -> float:
        return float(self.series.max() - self.series.min())


def extract_mu_infinity(traj: DiscreteTrajectory,
                        window_fraction: float = 0.5) -> MuInfinityEstimate:
    """Estimate the constant part of mu over the tail window (zero-eigenvalue branch)."""
    if traj.config.op_A.lambda1 > 0.0:
        raise BranchError(
            "first eigenvalue is positive: the potential vanishes at infinity, "
            "use mu_tail_stats instead"
        )
    steps = list(_window_steps(traj, window_fraction))
    means = []
    flatness = 0.0
    for k in steps:
        mu = traj.mus[k]
        m = sp.mean(mu)
        means.append(m)
        flatness = max(flatness, sp.norm(mu - sp.constant_field(m, mu.grid)))
    times = traj.h * np.array(steps, dtype=float)
    return MuInfinityEstimate(times=times, series=np.array(means), flatness=float(flatness))


def stationarity_residual(y: sp.Field, mu_inf: float, u_inf: sp.Field,
                          spec: pot.PotentialSpec, op_B: sp.FractionalOperator,
                          overshoot_tol: float = 0.0) -> float:
    """Distance of the state from solving the stationary inclusion.

    Reconstructs the required graph selection ``xi = mu_inf + u_inf - B2s y
    - pi(y)`` and returns the quadrature norm of the nodal distances from
    ``xi`` to the graph at ``y``.  For a single-valued graph this is the
    norm of ``B2s y + beta(y) + pi(y) - mu_inf - u_inf``; for the obstacle
    graph it is the complementarity residual: the selection must vanish
    where the state is free, be nonnegative on the upper contact set and
    nonpositive on the lower one.

    Values beyond the closure of the graph domain by at most
    ``overshoot_tol`` (regularization overshoot) are clamped onto it;
    anything farther raises :class:`DomainError`.
    """
    dom = spec.beta_domain
    values = y.values
    lo, hi = dom.lo, dom.hi
    if np.any(values < lo - overshoot_tol) or np.any(values > hi + overshoot_tol):
        worst = float(np.max(np.maximum(lo - values, values - hi)))
        raise DomainError(
            f"state leaves the graph domain by {worst:.3e}, beyond the declared "
            f"overshoot tolerance {overshoot_tol:.3e}"
        )
    clamped = np.clip(values, lo, hi)
    b2y = sp.apply_power(op_B, sp.Field(clamped, y.grid), 2.0)
    xi = mu_inf + u_inf.values - b2y.values - spec.pi(clamped)
    violations = np.empty_like(xi)
    for i, (yi, xii) in enumerate(zip(clamped, xi)):
        if dom.contains(yi):
            glo, ghi = spec.beta(yi)
            violations[i] = max(glo - xii, xii - ghi, 0.0)
        else:
            # contact with an open boundary: no admissible selection exists
            violations[i] = np.inf
    return float(np.sqrt(np.sum(y.grid.w * violations * violations)))


def variational_inequality_check(y: sp.Field, mu_inf: float, u_inf: sp.Field,
                                 spec: pot.PotentialSpec,
                                 op_B: sp.FractionalOperator,
                                 trials: int = 100, seed: int = 0) -> float:
    """Spot check of the stationary variational inequality on random fields.

    For random test fields with values in the convex-part domain, the
    candidate state must satisfy

        (Bs y, Bs (y - v)) + int bh(y) + (pi(y) - mu_inf - u_inf, y - v)
            <= int bh(v),

    which is the inequality form behind the pointwise complementarity
    residual.  Returns the largest violation over the trials (zero when
    the inequality holds everywhere sampled).
    """
    rng = np.random.default_rng(seed)
    dom = spec.beta_hat_domain
    lo = max(dom.lo, -1.0)
    hi = min(dom.hi, 1.0)
    grid = y.grid
    yc = sp.Field(np.clip(y.values, dom.lo, dom.hi), grid)
    by = sp.apply_power(op_B, yc)
    bh_y = float(np.sum(grid.w * spec.beta_hat(yc.values)))
    drive = sp.Field(spec.pi(yc.values) - mu_inf - u_inf.values, grid)
    worst = 0.0
    for _ in range(trials):
        v = sp.Field(rng.uniform(lo, hi, size=grid.size), grid)
        bh_v = float(np.sum(grid.w * spec.beta_hat(v.values)))
        lhs = (sp.inner(by, by - sp.apply_power(op_B, v))
               + bh_y + sp.inner(drive, yc - v))
        worst = max(worst, lhs - bh_v)
    return worst


@dataclass(frozen=True)
class OmegaLimitReport:
    """Witnesses for the limit-point characterization of a run."""

    probe_times: np.ndarray
    candidate: sp.Field
    cauchy_gaps: np.ndarray
    b_sigma_bound: float
    stationarity_residual: float
    residual_scale: float
    mu_infinity_samples: Optional[MuInfinityEstimate]
    mu_infinity_value: float
    mass_identity_defect: float
    branch: str


def residual_scale(y: sp.Field, mu_inf: float, u_inf: sp.Field,
                   spec: pot.PotentialSpec, op_B: sp.FractionalOperator,
                   overshoot_tol: float = 0.0) -> float:
    """Largest norm among the terms entering the stationary equation."""
    dom = spec.beta_domain
    clamped = np.clip(y.values, dom.lo, dom.hi)
    yc = sp.Field(clamped, y.grid)
    terms = [
        sp.norm(sp.apply_power(op_B, yc, 2.0)),
        sp.norm(sp.Field(spec.pi(clamped), y.grid)),
        abs(mu_inf) * np.sqrt(y.grid.length),
        sp.norm(u_inf),
    ]
    if spec.smooth_graph and all(dom.contains(v) for v in clamped):
        beta_vals = np.array([spec.beta(v)[0] for v in clamped])
        if np.all(np.isfinite(beta_vals)):
            terms.append(sp.norm(sp.Field(beta_vals, y.grid)))
    return max(max(terms), 1e-12)


def omega_probe(traj: DiscreteTrajectory, snapshot_times: Sequence[float],
                window_fraction: float = 0.5,
                overshoot_tol: float = 0.0) -> OmegaLimitReport:
    """Assemble the limit-point witnesses from stored states.

    Needs at least two probe times.  Gaps are plain-norm distances between
    probe states; the uniform graph-power bound is the compactness
    ingredient that makes the limit set nonempty.  On the positive branch
    the stationarity residual is evaluated with a zero constant; on the
    zero branch with the tail average of the potential's spatial mean.
    """
    times = np.asarray(sorted(snapshot_times), dtype=float)
    if times.size < 2:
        raise InsufficientDataError("need at least two snapshot times")
    indices = []
    for t in times:
        k = int(round(t / traj.h))
        if k < 0 or k > traj.steps or abs(k * traj.h - t) > 0.5 * traj.h + 1e-12:
            raise InsufficientDataError(f"no stored state near time {t}")
        indices.append(k)
    snaps = [traj.ys[k] for k in indices]
    gaps = np.zeros((len(snaps), len(snaps)))
    for i in range(len(snaps)):
        for j in range(i + 1, len(snaps)):
            gaps[i, j] = gaps[j, i] = sp.norm(snaps[i] - snaps[j])
    b_bound = max(sp.norm(sp.apply_power(traj.config.op_B, s)) for s in snaps)
    lam1 = traj.config.op_A.lambda1
    u_inf = traj.data.u_infinity
    spec = traj.config.spec
    candidate = snaps[-1]
    if lam1 > 0.0:
        branch = "lambda1_positive"
        mu_est = None
        mu_value = 0.0
    else:
        branch = "lambda1_zero"
        mu_est = extract_mu_infinity(traj, window_fraction)
        mu_value = mu_est.tail_average
    resid = stationarity_residual(candidate, mu_value, u_inf, spec,
                                  traj.config.op_B, overshoot_tol)
    scale = residual_scale(candidate, mu_value, u_inf, spec,
                           traj.config.op_B, overshoot_tol)
    final_mass = sp.mean(traj.ys[-1]) + traj.h * sp.mean(traj.mus[-1])
    return OmegaLimitReport(
        probe_times=times,
        candidate=candidate,
        cauchy_gaps=gaps,
        b_sigma_bound=float(b_bound),
        stationarity_residual=resid,
        residual_scale=scale,
        mu_infinity_samples=mu_est,
        mu_infinity_value=mu_value,
        mass_identity_defect=float(abs(final_mass - sp.mean(traj.ys[0]))),
        branch=branch,
    )


@dataclass(frozen=True)
class NonuniquenessReport:
    """Residuals of the constant-in-space solution family check."""

    sample_times: np.ndarray
    mu_values: np.ndarray
    first_equation_residuals: np.ndarray
    selection_residuals: np.ndarray

    @property
    def max_violation(self) -> float:
        return float(max(self.first_equation_residuals.max(),
                         self.selection_residuals.max()))


def example_best_check(mu_bar, sample_times: Sequence[float],
                       op_A: sp.FractionalOperator) -> NonuniquenessReport:
    """Verify the explicit nonunique-multiplier solution family.

    With the ``example_best`` potential, a zero state and zero source, any
    bounded time profile with values in [-1, 1] yields a solution whose
    potential is that profile times the constant function: spatially
    constant fields are annihilated by the first operator, and the profile
    value is an admissible graph selection at zero.  The check evaluates
    both residuals at the sample times; two distinct constant profiles both
    passing certifies that the limiting constant is not unique.
    """
    if op_A.lambda1 > 0.0:
        raise BranchError("the construction needs a zero first eigenvalue")
    spec = pot.make_potential("example_best")
    grid = op_A.basis.grid
    times = np.asarray(list(sample_times), dtype=float)
    mu_values = np.array([float(mu_bar(t)) for t in times])
    bad = np.abs(mu_values) > 1.0
    if np.any(bad):
        worst = float(np.abs(mu_values).max())
        raise DomainError(
            f"profile leaves the admissible band: |mu_bar| reaches {worst}"
        )
    eq_res = np.empty_like(mu_values)
    sel_res = np.empty_like(mu_values)
    for i, v in enumerate(mu_values):
        mu_field = sp.constant_field(v, grid)
        eq_res[i] = sp.norm(sp.apply_power(op_A, mu_field))
        sel_res[i] = pot.graph_selection_residual(spec, 0.0, v)
    return NonuniquenessReport(
        sample_times=times,
        mu_values=mu_values,
        first_equation_residuals=eq_res,
        selection_residuals=sel_res,
    )


@dataclass(frozen=True)
class RangeCertificate:
    """Extent of the state over the whole run against a confinement interval."""

    y_min: float
    y_max: float
    interval: tuple
    contained: bool
    overshoot: float
    yosida_lambda: float


def range_certificate(traj: DiscreteTrajectory, spec: pot.PotentialSpec,
                      interval: Optional[tuple] = None) -> RangeCertificate:
    """Min/max of the state over all steps and nodes, with containment flag.

    Without an explicit interval, a bounded graph domain supplies its
    closure; an unbounded one certifies the observed range against itself.
    Overshoot beyond the interval is attributable to the regularization
    level recorded in the certificate.
    """
    y_min = min(float(y.values.min()) for y in traj.ys)
    y_max = max(float(y.values.max()) for y in traj.ys)
    if interval is None:
        dom = spec.beta_domain
        interval = (dom.lo, dom.hi) if dom.bounded else (y_min, y_max)
    a, b = float(interval[0]), float(interval[1])
    overshoot = max(0.0, a - y_min, y_max - b)
    return RangeCertificate(
        y_min=y_min,
        y_max=y_max,
        interval=(a, b),
        contained=overshoot == 0.0,
        overshoot=overshoot,
        yosida_lambda=traj.config.yosida_lambda,
    )


def goodmui_certified(traj: DiscreteTrajectory, cert: RangeCertificate) -> bool:
    """Whether the unique-constant-multiplier hypotheses hold for this run.

    Requires a single-valued smooth graph on an open interval and the
    state's range strictly inside that interval.  Density of the bounded
    functions in the operator domain is automatic for the interval bases
    and recorded as an assumption for matrix-backed ones.
    """
    spec = traj.config.spec
    if not spec.smooth_graph:
        return False
    dom = spec.beta_domain
    return dom.lo < cert.y_min and cert.y_max < dom.hi
