"""Implicit time discretization of the two-operator phase separation system.

One step advances the pair (y, mu) by solving

    (y+ - y)/h + mu+ + A2r mu+ = mu
    tau (y+ - y)/h + (L I + B2s + beta_lam + pi)(y+) = L y + mu+ + u+

where ``A2r`` and ``B2s`` are the doubled fractional powers of the two
operators, ``beta_lam`` is the Yosida approximation of the graph at level
``lam``, and ``L`` is the Lipschitz constant of ``pi`` plus one.  The new
potential value is eliminated through the diagonal spectral inverse
``mu+ = (I + A2r)^(-1) (mu - (y+ - y)/h)``, leaving a strongly monotone
nodal equation in ``y+`` that a damped Newton iteration solves to a
prescribed residual.  Trajectories start from ``y0`` with ``mu0 = 0``;
that initialization is part of the scheme, not a configurable choice, and
it is what makes the discrete mass identity exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from . import potentials as pot
from . import spectral as sp
from .errors import (
    ConfigurationError,
    ConstantSpanHypothesisError,
    DimensionError,
    InitialDataHypothesisError,
    MeanInteriorHypothesisError,
    SourceTailHypothesisError,
    SpectrumHypothesisError,
    StepError,
)


@dataclass(frozen=True)
class SchemeConfig:
    """Everything the scheme needs besides the data: operators, potential, steps."""

    op_A: sp.FractionalOperator
    op_B: sp.FractionalOperator
    spec: pot.PotentialSpec
    yosida_lambda: float
    tau: float
    h: float
    steps: int
    newton_tol: float = 1e-10
    newton_max: int = 50

    def __post_init__(self):
        if not (0.0 <= self.tau <= 1.0):
            raise ConfigurationError("tau must lie in [0, 1]")
        if not self.h > 0:
            raise ConfigurationError("step size must be positive")
        if self.steps < 0:
            raise ConfigurationError("step count must be nonnegative")
        if not self.yosida_lambda > 0:
            raise ConfigurationError("regularization level must be positive")
        if not self.op_A.basis.grid.same_as(self.op_B.basis.grid):
            raise ConfigurationError("the two operators must share one quadrature grid")

    @property
    def grid(self) -> sp.Grid:
        return self.op_A.basis.grid

    @property
    def regularization(self) -> pot.YosidaRegularization:
        return pot.YosidaRegularization(self.spec, self.yosida_lambda)

    @property
    def final_time(self) -> float:
        return self.steps * self.h


@dataclass(frozen=True)
class DecaySource:
    """Source ``u(t) = u_inf + bump * exp(-rate*t)``.

    Covers the constant case (zero bump) and the settling case (positive
    rate).  The time derivative has the exact integral norm
    ``|bump| * (1 - exp(-rate*T))`` used by the energy ledgers.
    """

    u_inf: sp.Field
    bump: Optional[sp.Field] = None
    rate: float = 0.0

    def __post_init__(self):
        if self.rate < 0:
            raise ConfigurationError("decay rate must be nonnegative")
        if self.bump is not None and not self.bump.grid.same_as(self.u_inf.grid):
            raise DimensionError("bump and settled value live on different grids")

    def at(self, t: float) -> sp.Field:
        if self.bump is None:
            return self.u_inf
        return self.u_inf + np.exp(-self.rate * t) * self.bump

    def derivative_l1(self, horizon: float) -> float:
        """Exact value of the integral of |du/dt| over (0, horizon)."""
        if self.bump is None or self.rate == 0.0:
            return 0.0
        return sp.norm(self.bump) * (1.0 - np.exp(-self.rate * horizon))

    def settles(self) -> bool:
        """Whether u - u_inf is square integrable on the half line."""
        return self.bump is None or sp.norm(self.bump) == 0.0 or self.rate > 0.0


@dataclass(frozen=True)
class TabulatedSource:
    """Right-continuous step source through tabulated (time, field) samples."""

    times: np.ndarray
    fields: Sequence[sp.Field]

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size != len(self.fields) or t.size == 0:
            raise ConfigurationError("tabulated source needs matching times and fields")
        if np.any(np.diff(t) <= 0):
            raise ConfigurationError("tabulated times must be strictly increasing")
        t.flags.writeable = False
        object.__setattr__(self, "times", t)

    @property
    def u_inf(self) -> sp.Field:
        return self.fields[-1]

    def at(self, t: float) -> sp.Field:
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.fields[max(idx, 0)]

    def derivative_l1(self, horizon: float) -> float:
        total = 0.0
        for i in range(1, len(self.fields)):
            if self.times[i] <= horizon:
                total += sp.norm(self.fields[i] - self.fields[i - 1])
        return total

    def settles(self) -> bool:
        return True  # compactly supported variation


def zero_source(grid: sp.Grid) -> DecaySource:
    return DecaySource(sp.constant_field(0.0, grid))


@dataclass(frozen=True)
class ProblemData:
    """Initial state and source term."""

    y0: sp.Field
    source: DecaySource | TabulatedSource
    u_infinity: Optional[sp.Field] = None

    def __post_init__(self):
        if self.u_infinity is None:
            object.__setattr__(self, "u_infinity", self.source.u_inf)

    @property
    def initial_mean(self) -> float:
        return sp.mean(self.y0)


@dataclass(frozen=True)
class ValidationReport:
    """Named outcomes of the hypothesis checks; all true when validation passes."""

    checks: dict

    def __bool__(self):
        return all(self.checks.values())


def validate(config: SchemeConfig, data: ProblemData) -> ValidationReport:
    """Check the structural and data hypotheses; raise a named error on failure.

    With a positive first eigenvalue of the first operator the mean-value
    hypotheses are skipped.  With a zero first eigenvalue the zero must be
    simple with a constant first mode, constants must be representable in
    the second operator's basis, and the initial mean must lie strictly
    inside the graph domain.
    """
    checks = {}
    basis_a = config.op_A.basis
    lam1 = config.op_A.lambda1
    checks["lambda1_branch"] = "positive" if lam1 > 0 else "zero"
    if lam1 == 0.0:
        if basis_a.n < 2 or basis_a.lambdas[1] <= 0.0:
            raise SpectrumHypothesisError("zero eigenvalue is not simple: lambda_2 = 0")
        if not basis_a.first_mode_is_constant():
            raise SpectrumHypothesisError(
                "first eigenvalue vanishes but the first mode is not constant"
            )
        checks["simple_zero_eigenvalue"] = True
        ones = sp.constant_field(1.0, config.grid)
        defect = config.op_B.basis.span_projection_defect(ones)
        if defect > 1e-10 * np.sqrt(config.grid.length):
            raise ConstantSpanHypothesisError(
                f"constants are not in the span of the second basis (defect {defect:.3e})"
            )
        checks["constants_in_second_span"] = True
    y0 = data.y0
    if not y0.grid.same_as(config.grid):
        raise DimensionError("initial state is not on the scheme grid")
    energy = config.spec.beta_hat(y0.values)
    if not np.all(np.isfinite(energy)):
        raise InitialDataHypothesisError(
            "initial state has non-integrable convex energy (values outside the domain)"
        )
    checks["initial_energy_integrable"] = True
    if lam1 == 0.0:
        m0 = data.initial_mean
        if not config.spec.beta_domain.strictly_contains(m0):
            raise MeanInteriorHypothesisError(
                f"initial mean {m0!r} is not interior to the graph domain"
            )
        checks["mean_interior"] = True
    if not data.source.settles():
        raise SourceTailHypothesisError(
            "source does not settle: u - u_inf is not square integrable in time"
        )
    checks["source_settles"] = True
    return ValidationReport(checks)


@dataclass
class StepStats:
    """Per-step solver diagnostics."""

    iterations: int
    residual_phase: float
    residual_potential: float
    dampings: int = 0


@dataclass(frozen=True)
class DiscreteTrajectory:
    """Solution tuples (y^0..y^N, mu^0..mu^N) plus solver diagnostics."""

    ys: List[sp.Field]
    mus: List[sp.Field]
    h: float
    solver_stats: List[StepStats]
    config: SchemeConfig
    data: ProblemData

    @property
    def steps(self) -> int:
        return len(self.ys) - 1

    @property
    def final_time(self) -> float:
        return self.steps * self.h

    def times(self) -> np.ndarray:
        return self.h * np.arange(self.steps + 1)

    def truncated(self, steps: int) -> "DiscreteTrajectory":
        """Prefix of the trajectory with the given number of steps."""
        if not (0 <= steps <= self.steps):
            raise ConfigurationError("truncation exceeds the trajectory length")
        return DiscreteTrajectory(
            ys=self.ys[: steps + 1],
            mus=self.mus[: steps + 1],
            h=self.h,
            solver_stats=self.solver_stats[:steps],
            config=self.config,
            data=self.data,
        )


class _Workspace:
    """Dense matrices reused across the steps of one run."""

    def __init__(self, config: SchemeConfig):
        grid = config.grid
        m = grid.size
        ba, bb = config.op_A.basis, config.op_B.basis
        wa2 = config.op_A.power_weights(2.0)
        wb2 = config.op_B.power_weights(2.0)
        self.b2 = bb.modes @ (wb2[:, None] * bb.analysis_matrix)
        # (I + A^{2r})^{-1} acts as the identity off the span
        self.sinv = np.eye(m) - ba.modes @ ((wa2 / (1.0 + wa2))[:, None] * ba.analysis_matrix)
        self.a2 = ba.modes @ (wa2[:, None] * ba.analysis_matrix)
        self.eye = np.eye(m)
        self.w = grid.w
        self.config = config
        self.reg = config.regularization

    def h_norm(self, v: np.ndarray) -> float:
        return float(np.sqrt(np.sum(self.w * v * v)))


def _newton_solve(ws: _Workspace, y_prev: np.ndarray, mu_prev: np.ndarray,
                  u_next: np.ndarray, y_start: np.ndarray):
    cfg = ws.config
    h, tau = cfg.h, cfg.tau
    shift = cfg.spec.stability_shift
    reg = ws.reg

    def residual(yc):
        mu = ws.sinv @ (mu_prev - (yc - y_prev) / h)
        g = (
            tau * (yc - y_prev) / h
            + shift * (yc - y_prev)
            + ws.b2 @ yc
            + pot.yosida(reg, yc)
            + cfg.spec.pi(yc)
            - u_next
            - mu
        )
        return g, mu

    y = y_start.copy()
    g, mu = residual(y)
    res = ws.h_norm(g)
    history = [res]
    dampings = 0
    for iteration in range(cfg.newton_max):
        if res <= cfg.newton_tol:
            return y, mu, iteration, res, dampings
        diag = pot.yosida_derivative(reg, y) + cfg.spec.pi_derivative(y)
        jac = (tau / h + shift) * ws.eye + ws.b2 + np.diag(diag) + ws.sinv / h
        delta = np.linalg.solve(jac, -g)
        alpha = 1.0
        for _ in range(30):
            y_new = y + alpha * delta
            g_new, mu_new = residual(y_new)
            res_new = ws.h_norm(g_new)
            if res_new < res:
                break
            alpha *= 0.5
            dampings += 1
        else:
            raise StepError(
                "Newton step could not reduce the residual after 30 halvings; "
                "try a smaller step size or a larger regularization level",
                residual_history=history,
            )
        y, g, mu, res = y_new, g_new, mu_new, res_new
        history.append(res)
    if res <= cfg.newton_tol:
        return y, mu, cfg.newton_max, res, dampings
    raise StepError(
        f"Newton did not reach tolerance {cfg.newton_tol:.1e} in {cfg.newton_max} "
        "iterations; try a smaller step size or a larger regularization level",
        residual_history=history,
    )


def solve_step(prev_y: sp.Field, prev_mu: sp.Field, u_next: sp.Field,
               config: SchemeConfig, workspace: Optional[_Workspace] = None,
               start: Optional[sp.Field] = None):
    """Advance one step; returns ``(next_y, next_mu, stats)``.

    The potential value is eliminated exactly through the shifted spectral
    inverse, so the first equation holds to round-off by construction; the
    Newton residual reported in the stats is the one of the remaining
    nodal equation in the new state.
    """
    ws = workspace or _Workspace(config)
    for f in (prev_y, prev_mu, u_next):
        if not f.grid.same_as(config.grid):
            raise DimensionError("step fields are not on the scheme grid")
    y_start = (start or prev_y).values
    y, mu, iters, res, dampings = _newton_solve(
        ws, prev_y.values, prev_mu.values, u_next.values, y_start
    )
    phase_res = ws.h_norm((y - prev_y.values) / config.h + mu + ws.a2 @ mu - prev_mu.values)
    stats = StepStats(
        iterations=iters, residual_phase=phase_res,
        residual_potential=res, dampings=dampings,
    )
    return sp.Field(y, config.grid), sp.Field(mu, config.grid), stats


def run(config: SchemeConfig, data: ProblemData) -> DiscreteTrajectory:
    """Validate, then march the scheme from (y0, 0) for the configured steps."""
    validate(config, data)
    ws = _Workspace(config)
    ys = [data.y0]
    mus = [sp.constant_field(0.0, config.grid)]
    stats: List[StepStats] = []
    for n in range(config.steps):
        u_next = data.source.at((n + 1) * config.h)
        try:
            y, mu, st = solve_step(ys[-1], mus[-1], u_next, config, workspace=ws)
        except StepError as exc:
            exc.step_index = n
            raise
        ys.append(y)
        mus.append(mu)
        stats.append(st)
    return DiscreteTrajectory(ys=ys, mus=mus, h=config.h, solver_stats=stats,
                              config=config, data=data)


_INTERPOLANT_KINDS = ("piecewise_constant_right", "piecewise_constant_left",
                      "piecewise_linear")


def interpolate(traj: DiscreteTrajectory, kind: str, t: float,
                which: str = "y") -> sp.Field:
    """Evaluate an interpolant of the trajectory at time ``t``.

    ``piecewise_constant_right`` returns the right node value on each step
    interval (and the initial state at t = 0), ``piecewise_constant_left``
    the left node value, and ``piecewise_linear`` the nodal interpolation.
    """
    if kind not in _INTERPOLANT_KINDS:
        raise ConfigurationError(f"unknown interpolant kind: {kind!r}")
    if which not in ("y", "mu"):
        raise ConfigurationError("which must be 'y' or 'mu'")
    values = traj.ys if which == "y" else traj.mus
    h, n_steps = traj.h, traj.steps
    end = n_steps * h
    if t < -1e-12 * h or t > end + 1e-12 * h:
        raise ConfigurationError(f"time {t} outside [0, {end}]")
    t = min(max(t, 0.0), end)
    if t == 0.0:
        return values[0]
    n = int(np.ceil(t / h - 1e-12))
    n = min(max(n, 1), n_steps)
    if kind == "piecewise_constant_right":
        return values[n]
    if kind == "piecewise_constant_left":
        return values[n - 1]
    weight = (t - (n - 1) * h) / h
    return (1.0 - weight) * values[n - 1] + weight * values[n]
