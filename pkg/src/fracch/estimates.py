"""Step-by-step energy ledgers for the discrete scheme.

Testing the two discrete equations with ``h*mu+`` and with the state
increment, adding, and using the convexity of

    F(r) = L r^2 / 2 + beta_hat_lam(r) + pi_hat(r),        L = L_pi + 1,

gives a per-step inequality that is exact algebra for exact discrete
solutions: summing it up to step k bounds a collection of squared norms
and increments by the initial energy plus a summation-by-parts pairing
with the source.  The ledger evaluates every term of that summed
inequality and records the slack, which can only be negative through
solver residual or round-off.  A separate data functional,
``|u(0)| + integral |du/dt|``, is recorded for boundedness monitoring:
the classical step from the summed inequality to a horizon-uniform bound
introduces generic constants, so it is monitored, not asserted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from . import potentials as pot
from . import spectral as sp
from .errors import EstimateViolationError
from .stepper import DiscreteTrajectory, ProblemData, SchemeConfig

#: Order of the named left-hand-side terms of the summed inequality.
LEDGER_TERMS = (
    "mu_l2_accum",
    "mu_increment_accum",
    "Ar_mu_accum",
    "tau_rate_accum",
    "B_sigma_norm",
    "B_sigma_increment_accum",
    "beta_pi_integral",
    "y_increment_accum",
)

SLACK_FLOOR = 1e-12


@dataclass(frozen=True)
class EnergyLedgerEntry:
    """All terms of the summed inequality at one step.

    ``lhs_terms`` maps the eight named quantities; the increment sums are
    nondecreasing in the step index, while the three state terms
    (``mu_l2_accum``, ``B_sigma_norm``, ``beta_pi_integral``) track the
    current state.  ``slack = rhs_bound - sum(lhs)`` and can only dip
    below zero by solver residual and round-off.
    """

    step: int
    lhs_terms: dict
    rhs_bound: float
    slack: float
    data_bound: float

    @property
    def scale(self) -> float:
        terms = [abs(v) for v in self.lhs_terms.values()] + [abs(self.rhs_bound)]
        return max(max(terms), SLACK_FLOOR)


def _split_energy(config: SchemeConfig, y: sp.Field) -> float:
    reg = config.regularization
    integrand = pot.yosida_primal(reg, y.values) + config.spec.pi_hat(y.values)
    return float(np.sum(y.grid.w * integrand))


def convexity_gap(config: SchemeConfig, prev_y: sp.Field, next_y: sp.Field) -> float:
    """Nodal minimum of F'(y+)(y+ - y) - (F(y+) - F(y)), nonnegative by convexity."""
    reg = config.regularization
    shift = config.spec.stability_shift
    a, b = prev_y.values, next_y.values

    def f(v):
        return 0.5 * shift * v * v + pot.yosida_primal(reg, v) + config.spec.pi_hat(v)

    fprime = shift * b + pot.yosida(reg, b) + config.spec.pi(b)
    gap = fprime * (b - a) - (f(b) - f(a))
    return float(gap.min())


@dataclass(frozen=True)
class LedgerIncrement:
    """One step's contribution to every ledger term."""

    increments: dict
    rhs_increment: float
    slack: float


def per_step_inequality(prev, next_state, u_next: sp.Field,
                        config: SchemeConfig,
                        tol_rel: float | None = None) -> LedgerIncrement:
    """Evaluate one step of the pre-summation inequality.

    ``prev`` and ``next_state`` are consecutive ``(y, mu)`` pairs of an
    accepted trajectory.  The slack is the convexity gap of the split
    energy pairing, polluted only by the solver residual.  When
    ``tol_rel`` is given, a slack below ``-tol_rel`` times the largest
    term raises :class:`EstimateViolationError`: the inequality is exact
    algebra for exact discrete solutions, so that signals a solver bug.
    """
    y0, mu0 = prev
    y1, mu1 = next_state
    h, tau = config.h, config.tau
    shift = config.spec.stability_shift
    dy = y1 - y0
    dmu = mu1 - mu0
    increments = {
        "mu_l2_accum": 0.5 * h * (sp.norm(mu1) ** 2 - sp.norm(mu0) ** 2),
        "mu_increment_accum": 0.5 * h * sp.norm(dmu) ** 2,
        "Ar_mu_accum": h * sp.norm(sp.apply_power(config.op_A, mu1)) ** 2,
        "tau_rate_accum": tau / h * sp.norm(dy) ** 2,
        "B_sigma_norm": 0.5 * (sp.norm(sp.apply_power(config.op_B, y1)) ** 2
                               - sp.norm(sp.apply_power(config.op_B, y0)) ** 2),
        "B_sigma_increment_accum": 0.5 * sp.norm(sp.apply_power(config.op_B, dy)) ** 2,
        "beta_pi_integral": _split_energy(config, y1) - _split_energy(config, y0),
        "y_increment_accum": 0.5 * shift * sp.norm(dy) ** 2,
    }
    rhs = sp.inner(u_next, dy)
    slack = rhs - sum(increments.values())
    if tol_rel is not None:
        scale = max(max(abs(v) for v in increments.values()), abs(rhs), SLACK_FLOOR)
        if slack < -tol_rel * scale:
            raise EstimateViolationError(
                f"per-step inequality violated: slack {slack:.3e} below "
                f"-{tol_rel:.1e} x scale {scale:.3e}"
            )
    return LedgerIncrement(increments=increments, rhs_increment=rhs, slack=slack)


def gronwall_ledger(traj: DiscreteTrajectory, data: ProblemData,
                    config: SchemeConfig) -> List[EnergyLedgerEntry]:
    """Accumulate the per-step inequality into one entry per step.

    Entry k restates the summed inequality: the eight left-hand terms
    against ``rhs_bound`` = initial split energy + initial operator norm +
    the summation-by-parts form of the source pairing, evaluated exactly.
    ``data_bound`` carries ``|u(0)| + integral |du/dt|`` up to the entry's
    horizon for uniformity monitoring.
    """
    entries: List[EnergyLedgerEntry] = []
    h = traj.h
    e0_split = _split_energy(config, traj.ys[0])
    e0_b = 0.5 * sp.norm(sp.apply_power(config.op_B, traj.ys[0])) ** 2
    u0_norm = sp.norm(data.source.at(0.0))
    totals = dict.fromkeys(LEDGER_TERMS, 0.0)
    rhs_pairing = 0.0
    for k in range(1, traj.steps + 1):
        u_next = data.source.at(k * h)
        inc = per_step_inequality(
            (traj.ys[k - 1], traj.mus[k - 1]),
            (traj.ys[k], traj.mus[k]),
            u_next,
            config,
        )
        for name in LEDGER_TERMS:
            totals[name] += inc.increments[name]
        rhs_pairing += inc.rhs_increment
        rhs_bound = e0_split + e0_b + rhs_pairing
        lhs_state = dict(totals)
        # shift the telescoped initial energies onto the right side
        lhs_state["B_sigma_norm"] += e0_b
        lhs_state["beta_pi_integral"] += e0_split
        slack = rhs_bound - sum(lhs_state.values())
        entries.append(
            EnergyLedgerEntry(
                step=k,
                lhs_terms=lhs_state,
                rhs_bound=rhs_bound,
                slack=slack,
                data_bound=u0_norm + data.source.derivative_l1(k * h),
            )
        )
    return entries


def summed_source_pairing(traj: DiscreteTrajectory, data: ProblemData, k: int) -> float:
    """Summation-by-parts value of the source pairing up to step k.

    Equals ``(u^k, y^k) - (u^1, y^0) - sum_{n=1}^{k-1} (u^{n+1} - u^n, y^n)``,
    which is the same number as the accumulated per-step pairings.
    """
    h = traj.h
    if k == 0:
        return 0.0
    uk = data.source.at(k * h)
    u1 = data.source.at(h)
    total = sp.inner(uk, traj.ys[k]) - sp.inner(u1, traj.ys[0])
    for n in range(1, k):
        du = data.source.at((n + 1) * h) - data.source.at(n * h)
        total -= sp.inner(du, traj.ys[n])
    return total


@dataclass(frozen=True)
class UniformReport:
    """Interpolant-level quantities bounded uniformly in the horizon."""

    mu_jump_l2: float          # |mu_bar - mu_under| in L2(H)
    ar_mu_l2: float            # |A^r mu_bar| in L2(H)
    sup_y_graph_norm: float    # sup_t of (|y|^2 + |B^s y|^2)^(1/2)
    b_jump_scaled: float       # h^(-1/2) |B^s (y_bar - y_under)| in L2(H)
    rate_l2_scaled: float      # tau^(1/2) |dy/dt| in L2(H)
    sup_split_energy: float    # sup_t integral |beta_hat_lam + pi_hat| (y_bar)
    dual_rate_l2: float        # |dy/dt| in L2 of the dual space
    data_bound: float

    def as_dict(self) -> dict:
        return {
            "mu_jump_l2": self.mu_jump_l2,
            "ar_mu_l2": self.ar_mu_l2,
            "sup_y_graph_norm": self.sup_y_graph_norm,
            "b_jump_scaled": self.b_jump_scaled,
            "rate_l2_scaled": self.rate_l2_scaled,
            "sup_split_energy": self.sup_split_energy,
            "dual_rate_l2": self.dual_rate_l2,
            "data_bound": self.data_bound,
        }


def uniform_report(traj: DiscreteTrajectory, data: ProblemData,
                   config: SchemeConfig) -> UniformReport:
    """Evaluate the uniform-in-horizon quantities of the trajectory."""
    h, tau = traj.h, config.tau
    reg = config.regularization
    mu_jump = ar_mu = b_jump = rate = 0.0
    sup_graph = 0.0
    sup_split = 0.0
    for k in range(traj.steps + 1):
        y = traj.ys[k]
        graph = np.hypot(sp.norm(y), sp.norm(sp.apply_power(config.op_B, y)))
        sup_graph = max(sup_graph, float(graph))
        integrand = np.abs(pot.yosida_primal(reg, y.values) + config.spec.pi_hat(y.values))
        sup_split = max(sup_split, float(np.sum(y.grid.w * integrand)))
    for k in range(1, traj.steps + 1):
        dy = traj.ys[k] - traj.ys[k - 1]
        dmu = traj.mus[k] - traj.mus[k - 1]
        mu_jump += h * sp.norm(dmu) ** 2
        ar_mu += h * sp.norm(sp.apply_power(config.op_A, traj.mus[k])) ** 2
        b_jump += sp.norm(sp.apply_power(config.op_B, dy)) ** 2
        rate += sp.norm(dy) ** 2 / h
    return UniformReport(
        mu_jump_l2=float(np.sqrt(mu_jump)),
        ar_mu_l2=float(np.sqrt(ar_mu)),
        sup_y_graph_norm=sup_graph,
        b_jump_scaled=float(np.sqrt(b_jump)),
        rate_l2_scaled=float(np.sqrt(tau * rate)),
        sup_split_energy=sup_split,
        dual_rate_l2=dual_norm_rate(traj, config),
        data_bound=sp.norm(data.source.at(0.0)) + data.source.derivative_l1(traj.final_time),
    )


@dataclass(frozen=True)
class DualNormReport:
    """Two evaluations of the dual-space rate norm plus its triangle bound."""

    value: float            # from the state increments
    value_identity: float   # from the eliminated first equation
    bound: float            # c0 |mu_under - mu_bar| + |A^r mu_bar|, both in L2(H)
    c0: float


def dual_norm_report(traj: DiscreteTrajectory, config: SchemeConfig) -> DualNormReport:
    """Rate of change measured in the dual of the first operator's domain space.

    Two independent evaluations must agree: coefficients of the state
    increments, and coefficients of ``mu^{n-1} - mu^n - A2r mu^n`` which
    the first discrete equation makes equal to the increment.  The value
    is also bounded by the potential jump and power norms with the
    explicit embedding constant ``c0`` of H into the dual space.
    """
    op = config.op_A
    h = traj.h
    direct = identity = 0.0
    jump = power = 0.0
    for k in range(1, traj.steps + 1):
        dy_rate = (traj.ys[k] - traj.ys[k - 1]) * (1.0 / h)
        direct += h * sp.fractional_dual_norm(op, dy_rate) ** 2
        reconstructed = (
            traj.mus[k - 1] - traj.mus[k] - sp.apply_power(op, traj.mus[k], 2.0)
        )
        identity += h * sp.fractional_dual_norm(op, reconstructed) ** 2
        jump += h * sp.norm(traj.mus[k - 1] - traj.mus[k]) ** 2
        power += h * sp.norm(sp.apply_power(op, traj.mus[k])) ** 2
    lam = op.basis.lambdas
    if op.lambda1 > 0.0:
        c0 = float(lam[0] ** (-op.exponent))
    else:
        c0 = max(1.0, float(lam[1] ** (-op.exponent))) if op.basis.n > 1 else 1.0
    return DualNormReport(
        value=float(np.sqrt(direct)),
        value_identity=float(np.sqrt(identity)),
        bound=c0 * float(np.sqrt(jump)) + float(np.sqrt(power)),
        c0=c0,
    )


def dual_norm_rate(traj: DiscreteTrajectory, config: SchemeConfig) -> float:
    """The dual-space rate norm; see :func:`dual_norm_report`."""
    return dual_norm_report(traj, config).value
