"""Spectral representation of monotone selfadjoint operators.

Two operators enter the evolution system.  Each is represented by an
orthonormal eigenbasis on a shared quadrature grid, and fractional powers
act diagonally on the expansion coefficients: raising a field's
coefficients by ``lambda_j**p`` realizes the power ``p`` of the operator.
All spectral sums are truncated at the basis size; components outside the
span are projected away by every operator application.

Reference bases are one-dimensional cosine (zero-flux) and sine
(zero-boundary) families on an interval with trapezoid quadrature, under
which the modes are orthonormal to machine precision.  Arbitrary operators
up to 512 modes enter through a dense symmetric matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigurationError,
    DimensionError,
    HypothesisError,
    OperatorError,
    SpectrumHypothesisError,
)

#: Absolute floor below which a computed eigenvalue is clamped to zero.
EIGENVALUE_CLAMP = 1e-12

#: Tolerance used when deciding whether the first mode is constant.
CONSTANT_MODE_TOL = 1e-10


@dataclass(frozen=True)
class Grid:
    """Quadrature grid: node coordinates and positive weights.

    Weights sum to the domain length, so ``sum(w * v) / length`` is the
    mean value of a nodal function ``v``.
    """

    x: np.ndarray
    w: np.ndarray
    length: float

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        w = np.array(self.w, dtype=float)
        if x.ndim != 1 or w.shape != x.shape:
            raise ConfigurationError("grid coordinates and weights must be 1-d and equal length")
        if np.any(w <= 0):
            raise ConfigurationError("quadrature weights must be positive")
        if abs(w.sum() - self.length) > 1e-10 * max(1.0, self.length):
            raise ConfigurationError("quadrature weights must sum to the domain length")
        x.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "w", w)

    @property
    def size(self) -> int:
        return self.x.size

    def same_as(self, other: "Grid") -> bool:
        return (
            self.size == other.size
            and self.length == other.length
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.w, other.w)
        )


def interval_grid(length: float, points: int) -> Grid:
    """Uniform grid on [0, length] with trapezoid quadrature weights."""
    if points < 2:
        raise ConfigurationError("need at least two grid points")
    x = np.linspace(0.0, length, points)
    w = np.full(points, length / (points - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return Grid(x, w, float(length))


def index_grid(points: int) -> Grid:
    """Unit-weight grid for matrix-backed operators; length equals the size."""
    return Grid(np.arange(points, dtype=float), np.ones(points), float(points))


@dataclass(frozen=True)
class Field:
    """A spatial function stored as nodal values on a quadrature grid."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.x.shape:
            raise DimensionError("field values must match the grid size")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __add__(self, other):
        self._check(other)
        return Field(self.values + other.values, self.grid)

    def __sub__(self, other):
        self._check(other)
        return Field(self.values - other.values, self.grid)

    def __mul__(self, scalar):
        return Field(self.values * float(scalar), self.grid)

    __rmul__ = __mul__

    def _check(self, other):
        if not isinstance(other, Field) or not self.grid.same_as(other.grid):
            raise DimensionError("fields live on different grids")


def constant_field(value: float, grid: Grid) -> Field:
    return Field(np.full(grid.size, float(value)), grid)


def inner(u: Field, v: Field) -> float:
    """Quadrature L2 inner product."""
    u._check(v)
    return float(np.sum(u.grid.w * u.values * v.values))


def norm(u: Field) -> float:
    """Quadrature L2 norm."""
    return float(np.sqrt(np.sum(u.grid.w * u.values * u.values)))


def mean(u: Field) -> float:
    """Mean value: quadrature integral divided by the domain length."""
    return float(np.sum(u.grid.w * u.values) / u.grid.length)


@dataclass(frozen=True)
class EigenBasis:
    """Orthonormal eigenpairs of a monotone selfadjoint operator.

    Attributes
    ----------
    lambdas : (n,) nondecreasing nonnegative eigenvalues.
    modes : (m, n) eigenvectors as nodal columns, orthonormal under the
        grid's quadrature inner product.
    kind : one of ``neumann``, ``dirichlet``, ``matrix``.
    """

    lambdas: np.ndarray
    modes: np.ndarray
    grid: Grid
    kind: str
    _analysis: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        lam = np.array(self.lambdas, dtype=float)
        modes = np.array(self.modes, dtype=float)
        if lam.ndim != 1 or modes.shape != (self.grid.size, lam.size):
            raise ConfigurationError("eigenvalues and mode columns are inconsistent")
        if np.any(np.diff(lam) < 0):
            raise OperatorError("eigenvalues must be nondecreasing")
        if np.any(lam < 0):
            raise OperatorError("eigenvalues must be nonnegative")
        lam.flags.writeable = False
        modes.flags.writeable = False
        analysis = (modes * self.grid.w[:, None]).T
        analysis.flags.writeable = False
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "_analysis", analysis)
        defect = self.gram_defect()
        if defect > 1e-10:
            raise OperatorError(
                f"modes are not orthonormal under the quadrature inner product "
                f"(Gram defect {defect:.3e})"
            )

    @property
    def n(self) -> int:
        return self.lambdas.size

    @property
    def analysis_matrix(self) -> np.ndarray:
        """(n, m) matrix whose rows compute coefficients: ``modes.T @ diag(w)``."""
        return self._analysis

    def gram_defect(self) -> float:
        """Max deviation of the quadrature Gram matrix from the identity."""
        g = self._analysis @ self.modes
        return float(np.abs(g - np.eye(self.n)).max())

    def first_mode_is_constant(self, tol: float = CONSTANT_MODE_TOL) -> bool:
        e1 = self.modes[:, 0]
        return float(np.abs(e1 - e1.mean()).max()) <= tol * max(1.0, float(np.abs(e1).max()))

    def span_projection_defect(self, f: Field) -> float:
        """Norm of the component of ``f`` outside the truncated span."""
        residual = f.values - self.modes @ self.analyze(f)
        return float(np.sqrt(np.sum(self.grid.w * residual * residual)))

    def analyze(self, f: Field) -> np.ndarray:
        """Expansion coefficients (f, e_j) under the quadrature inner product."""
        if not f.grid.same_as(self.grid):
            raise DimensionError("field is not on the basis grid")
        return self._analysis @ f.values

    def synthesize(self, coefficients: np.ndarray) -> Field:
        """Nodal field from expansion coefficients."""
        c = np.asarray(coefficients, dtype=float)
        if c.shape != (self.n,):
            raise DimensionError("coefficient vector does not match the mode count")
        return Field(self.modes @ c, self.grid)


def build_interval_basis(kind: str, n: int, length: float, grid_points: int) -> EigenBasis:
    """Cosine or sine eigenbasis of the 1-d second-derivative operator.

    ``neumann`` uses zero-flux cosines with eigenvalues ``(pi*(j-1)/length)**2``
    (so the first mode is constant with a zero eigenvalue), ``dirichlet``
    zero-boundary sines with ``(pi*j/length)**2``.  Modes are normalized
    numerically under the trapezoid quadrature, which makes the Gram matrix
    the identity to machine precision.
    """
    if length <= 0:
        raise ConfigurationError("interval length must be positive")
    if n < 1:
        raise ConfigurationError("mode count must be at least 1")
    if n > grid_points:
        raise ConfigurationError(f"mode count {n} exceeds grid resolution {grid_points}")
    grid = interval_grid(length, grid_points)
    if kind == "neumann":
        freqs = np.arange(n)
        lambdas = (np.pi * freqs / length) ** 2
        modes = np.cos(np.pi * np.outer(grid.x, freqs) / length)
    elif kind == "dirichlet":
        if n > grid_points - 2:
            raise ConfigurationError(
                f"dirichlet basis needs at least n + 2 grid points (n={n}, points={grid_points})"
            )
        freqs = np.arange(1, n + 1)
        lambdas = (np.pi * freqs / length) ** 2
        modes = np.sin(np.pi * np.outer(grid.x, freqs) / length)
    else:
        raise ConfigurationError(f"unknown interval basis kind: {kind!r}")
    norms = np.sqrt(np.sum(grid.w[:, None] * modes**2, axis=0))
    return EigenBasis(lambdas, modes / norms, grid, kind)


def build_matrix_basis(matrix: np.ndarray) -> EigenBasis:
    """Full eigendecomposition of a symmetric positive-semidefinite matrix.

    The matrix acts on nodal vectors under the unit-weight inner product.
    Eigenvalues within the clamp tolerance below zero are set to zero;
    anything more negative is rejected rather than repaired.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise OperatorError("operator matrix must be square")
    if m.shape[0] > 512:
        raise ConfigurationError("matrix-backed operators are limited to 512 modes")
    scale = max(1.0, float(np.abs(m).max()))
    if float(np.abs(m - m.T).max()) > 1e-12 * scale:
        raise OperatorError("operator matrix is not symmetric to 1e-12")
    lambdas, modes = np.linalg.eigh(0.5 * (m + m.T))
    floor = -EIGENVALUE_CLAMP * scale
    if np.any(lambdas < floor):
        raise OperatorError(
            f"matrix has negative eigenvalue {lambdas.min():.3e} below the clamp tolerance"
        )
    lambdas = np.clip(lambdas, 0.0, None)
    return EigenBasis(lambdas, modes, index_grid(m.shape[0]), "matrix")


def load_matrix_file(path) -> np.ndarray:
    """Read a dense operator matrix: first line n, then n rows of n reals."""
    with open(path, "r", encoding="utf-8") as fh:
        tokens = fh.read().split()
    if not tokens:
        raise ConfigurationError(f"matrix file {path} is empty")
    try:
        n = int(tokens[0])
        values = [float(t) for t in tokens[1:]]
    except ValueError as exc:
        raise ConfigurationError(f"matrix file {path} is malformed: {exc}") from None
    if len(values) != n * n:
        raise ConfigurationError(
            f"matrix file {path} declares n={n} but carries {len(values)} entries"
        )
    return np.array(values).reshape(n, n)


@dataclass(frozen=True)
class FractionalOperator:
    """A positive fractional power of a spectrally represented operator."""

    basis: EigenBasis
    exponent: float

    def __post_init__(self):
        if not self.exponent > 0:
            raise ConfigurationError("fractional exponent must be positive")

    @property
    def lambda1(self) -> float:
        return float(self.basis.lambdas[0])

    def power_weights(self, multiplier: float = 1.0) -> np.ndarray:
        """Eigenvalue weights ``lambda_j**(exponent*multiplier)``.

        Zero eigenvalues map to zero weight for any positive power.
        """
        p = self.exponent * multiplier
        lam = self.basis.lambdas
        with np.errstate(divide="ignore"):
            weights = np.where(lam > 0.0, lam**p, 0.0)
        return weights


def apply_power(op: FractionalOperator, f: Field, multiplier: float = 1.0) -> Field:
    """Apply the fractional power: coefficients scaled by ``lambda_j**(r*multiplier)``.

    A multiplier of 2 yields the doubled power used by the evolution system.
    The result lies in the truncated span; out-of-span components are
    projected away.
    """
    c = op.basis.analyze(f)
    return op.basis.synthesize(op.power_weights(multiplier) * c)


def solve_shifted(op: FractionalOperator, f: Field, shift: float = 1.0,
                  multiplier: float = 2.0) -> Field:
    """Solve ``(shift*I + A^(r*multiplier)) u = f`` for ``u``.

    The operator acts as zero outside the truncated span, so the inverse is
    the identity scaled by ``1/shift`` there and diagonal on the span.  The
    returned field satisfies the shifted equation nodally to round-off.
    """
    if shift <= 0:
        raise ConfigurationError("shift must be positive")
    c = op.basis.analyze(f)
    weights = op.power_weights(multiplier)
    # identity/shift off the span, diagonal 1/(shift + lambda^p) on it
    reduction = c * weights / (shift * (shift + weights))
    u = f.values / shift - op.basis.modes @ reduction
    return Field(u, f.grid)


def fractional_norm(op: FractionalOperator, f: Field) -> float:
    """Equivalent Hilbert norm of the operator's fractional domain space.

    With a positive first eigenvalue this is the plain power norm
    ``(sum |lambda_j^r c_j|^2)^(1/2)``; with a zero first eigenvalue the
    first coefficient enters unweighted: ``(|c_1|^2 + sum_{j>=2}
    |lambda_j^r c_j|^2)^(1/2)``.
    """
    c = op.basis.analyze(f)
    weighted = op.power_weights() * c
    if op.lambda1 > 0.0:
        return float(np.sqrt(np.sum(weighted**2)))
    return float(np.sqrt(c[0] ** 2 + np.sum(weighted[1:] ** 2)))


def fractional_dual_norm(op: FractionalOperator, f: Field) -> float:
    """Dual of :func:`fractional_norm`: coefficients weighted by ``lambda_j**(-r)``.

    With a zero first eigenvalue the first coefficient again enters
    unweighted.  Components outside the span do not contribute.
    """
    c = op.basis.analyze(f)
    lam = op.basis.lambdas
    with np.errstate(divide="ignore"):
        inv = np.where(lam > 0.0, lam ** (-op.exponent), 0.0)
    weighted = inv * c
    if op.lambda1 > 0.0:
        return float(np.sqrt(np.sum(weighted**2)))
    return float(np.sqrt(c[0] ** 2 + np.sum(weighted[1:] ** 2)))


def graph_norm(op: FractionalOperator, f: Field) -> float:
    """Graph norm ``(|f|^2 + |A^r f|^2)^(1/2)`` of the power's domain."""
    return float(np.hypot(norm(f), norm(apply_power(op, f))))


def poincare_constant(op: FractionalOperator) -> float:
    """Sharp constant in ``|v| <= C |A^r v|`` on the kernel-orthogonal complement.

    Requires a zero first eigenvalue with a spectral gap; the constant is
    ``lambda_2**(-r)`` for the truncated basis and is attained on the second
    mode.  When the first mode is constant, orthogonality to it is the same
    as having zero mean.
    """
    lam = op.basis.lambdas
    if lam[0] > 0.0:
        raise HypothesisError(
            "first eigenvalue is positive; the inequality is not needed on this branch"
        )
    if op.basis.n < 2 or lam[1] <= 0.0:
        raise SpectrumHypothesisError("second eigenvalue vanishes; no spectral gap")
    return float(lam[1] ** (-op.exponent))
