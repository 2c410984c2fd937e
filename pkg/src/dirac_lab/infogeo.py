"""Dually flat geometry of a convex energy density and its Legendre transform."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .densities import PolynomialDensity, quadratic_density
from .phs import EnergySpec
from .stokes_dirac import Signature

__all__ = [
    "ConvergenceError",
    "DuallyFlatChart",
    "LegendreBoundaryError",
    "LegendreResult",
    "NonConvexError",
    "NumericConjugate",
    "OrthogonalityError",
    "alpha_connection",
    "alpha_connection_identity",
    "biconjugation_residual",
    "canonical_divergence",
    "conjugate_hessian_fd",
    "duality_pairing_check",
    "fiber_metric",
    "gradient_inversion_residual",
    "hessian_product_residual",
    "legendre_transform",
    "pythagoras_check",
    "quadratic_cotransform",
]


class LegendreBoundaryError(RuntimeError):
    """The maximiser of x.y - psi(x) is not interior to the search box."""


class NonConvexError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    pass


class OrthogonalityError(ValueError):
    pass


@dataclass(frozen=True)
class LegendreResult:
    value: float
    maximizer: np.ndarray
    iterations: int


def _box(box, dim: int) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = box
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (dim,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (dim,)).copy()
    if np.any(hi <= lo):
        raise ValueError(f"empty search box {lo}..{hi}")
    return lo, hi


def _grid_start(psi, y, lo, hi, per_axis: int | None) -> np.ndarray:
    dim = len(y)
    if per_axis is None:
        per_axis = int(min(41, max(3, round(2e4 ** (1.0 / dim)))))
    axes = [np.linspace(l, h, per_axis) for l, h in zip(lo, hi)]
    pts = np.array(list(product(*axes)))
    objective = pts @ y - psi.value(pts)
    return pts[int(np.argmax(objective))].copy()


def legendre_transform(psi, y, box=(-10.0, 10.0), tol: float = 1e-12,
                       max_iter: int = 200, grid_points: int | None = None) -> LegendreResult:
    """sup_x [x.y - psi(x)] by grid search followed by damped Newton.

    Stops when |y - grad psi(x)| <= tol * max(1, |y|). Raises if the maximiser
    is on (or outside) the box boundary or if psi has a direction of negative
    curvature along the way. ``grid_points`` per axis sets the starting
    search (default keeps the grid near 2e4 points).
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    dim = len(y)
    lo, hi = _box(box, dim)
    x = _grid_start(psi, y, lo, hi, grid_points)
    target = tol * max(1.0, float(np.linalg.norm(y)))

    def objective(v):
        return float(v @ y - psi.value(v))

    for it in range(max_iter):
        residual = y - psi.gradient(x)
        if np.linalg.norm(residual) <= target:
            break
        hess = psi.hessian(x)
        eig = np.linalg.eigvalsh(hess)
        scale = max(1.0, float(np.max(np.abs(eig))))
        if eig[0] < -1e-10 * scale:
            raise NonConvexError(f"psi has negative curvature {eig[0]:.3e} at x = {x}")
        if eig[0] < 1e-12 * scale:
            hess = hess + 1e-12 * scale * np.eye(dim)
        dx = np.linalg.solve(hess, residual)
        base = objective(x)
        t = 1.0
        while t > 1e-12:
            trial = x + t * dx
            if objective(trial) >= base - 1e-14 * max(1.0, abs(base)):
                break
            t *= 0.5
        else:
            raise ConvergenceError(f"line search stalled at x = {x}")
        x = trial
    else:
        raise ConvergenceError(f"no convergence after {max_iter} Newton steps; residual {np.linalg.norm(residual):.3e}")
    margin = 1e-9 * (hi - lo)
    if np.any(x <= lo + margin) or np.any(x >= hi - margin):
        raise LegendreBoundaryError(f"maximiser {x} reaches the search box {lo}..{hi}")
    return LegendreResult(objective(x), x, it)


@dataclass(frozen=True, eq=False)
class NumericConjugate:
    """phi = L[psi] evaluated pointwise by ``legendre_transform``.

    grad phi(y) is the maximiser x*(y); Hess phi(y) is the inverse of
    Hess psi(x*(y)).
    """

    psi: object
    box: tuple = (-10.0, 10.0)
    tol: float = 1e-12

    @property
    def dim(self) -> int:
        return self.psi.dim

    def _each(self, y, fn):
        y = np.asarray(y, dtype=float)
        flat = y.reshape(-1, y.shape[-1])
        out = np.array([fn(legendre_transform(self.psi, row, self.box, self.tol)) for row in flat])
        return out.reshape(y.shape[:-1] + out.shape[1:])

    def value(self, y):
        return self._each(y, lambda r: r.value)

    def gradient(self, y):
        return self._each(y, lambda r: r.maximizer)

    def hessian(self, y):
        return self._each(y, lambda r: self._inverse_metric(r.maximizer))

    def _inverse_metric(self, x):
        g = self.psi.hessian(x)
        eig = np.linalg.eigvalsh(g)
        if eig[0] <= 1e-14 * max(1.0, float(np.max(np.abs(eig)))):
            raise NonConvexError(f"psi is not strictly convex at x = {x}; Hess phi is unbounded there")
        return np.linalg.inv(g)


def quadratic_cotransform(spec: EnergySpec, signature: Signature) -> PolynomialDensity:
    """Closed-form conjugate of the quadratic fibre density: sum_a y_a^2 / (4 c_a)."""
    if spec.kind != "quadratic":
        raise ValueError("closed-form conjugate exists only for quadratic energies")
    psi = spec.fiber_density(signature)
    coefs = [c for c, _ in psi.terms]
    return quadratic_density(psi.dim, [1.0 / (4.0 * c) for c in coefs])


def fiber_metric(psi, x) -> np.ndarray:
    return psi.hessian(np.asarray(x, dtype=float))


def conjugate_hessian_fd(phi, y, step: float = 1e-3) -> np.ndarray:
    """Hess phi by Richardson-extrapolated central differences of grad phi."""
    y = np.asarray(y, dtype=float)
    dim = len(y)
    h = step * max(1.0, float(np.max(np.abs(y))))
    out = np.empty((dim, dim))
    for a in range(dim):
        e = np.zeros(dim)
        e[a] = 1.0

        def central(width):
            return (phi.gradient(y + width * e) - phi.gradient(y - width * e)) / (2 * width)

        out[:, a] = (4 * central(h / 2) - central(h)) / 3
    return 0.5 * (out + out.T)


def hessian_product_residual(psi, x, box=(-10.0, 10.0), step: float = 1e-3) -> float:
    """max |Hess psi(x) Hess phi(y) - I| at y = grad psi(x), Hess phi by differencing the conjugate."""
    x = np.asarray(x, dtype=float)
    phi = NumericConjugate(psi, box)
    y = psi.gradient(x)
    return float(np.max(np.abs(fiber_metric(psi, x) @ conjugate_hessian_fd(phi, y, step) - np.eye(len(x)))))


def duality_pairing_check(psi, x, box=(-10.0, 10.0), step: float = 1e-3) -> float:
    """max over (a, b) of |g(d/dx^b, d/dy_a) - delta_b^a|.

    d/dy_a expands as (dx^j/dy_a) d/dx^j with the Jacobian of the maximiser
    map y -> x*(y) taken by differences, so the pairing is g_bj dx^j/dy_a.
    """
    x = np.asarray(x, dtype=float)
    phi = NumericConjugate(psi, box)
    jacobian = conjugate_hessian_fd(phi, psi.gradient(x), step)   # [j, a] = dx^j / dy_a
    pairing = np.einsum("bj,ja->ba", fiber_metric(psi, x), jacobian)
    return float(np.max(np.abs(pairing - np.eye(len(x)))))


def gradient_inversion_residual(psi, x, box=(-10.0, 10.0)) -> float:
    """max |grad phi(grad psi(x)) - x|"""
    x = np.asarray(x, dtype=float)
    phi = NumericConjugate(psi, box)
    return float(np.max(np.abs(phi.gradient(psi.gradient(x)) - x)))


def biconjugation_residual(psi, x, box=(-10.0, 10.0), dual_box=(-5.0, 5.0)) -> float:
    """|L[L[psi]](x) - psi(x)|; the outer search uses a coarse grid since each phi costs a solve."""
    x = np.asarray(x, dtype=float)
    phi = NumericConjugate(psi, box)
    back = legendre_transform(phi, x, dual_box, grid_points=7)
    return abs(back.value - float(psi.value(x)))


def alpha_connection(psi, x, alpha: float) -> np.ndarray:
    """Gamma^(alpha)_abc = (1 - alpha)/2 * d^3 psi / dx^a dx^b dx^c"""
    return 0.5 * (1.0 - alpha) * psi.third(np.asarray(x, dtype=float))


def alpha_connection_identity(psi, x, alpha: float, step: float = 1e-3) -> float:
    """max |d_a g_bc - Gamma^(alpha)_abc - Gamma^(-alpha)_acb| with d_a g by differences."""
    x = np.asarray(x, dtype=float)
    dim = len(x)
    h = step * max(1.0, float(np.max(np.abs(x))))
    dg = np.empty((dim, dim, dim))
    for a in range(dim):
        e = np.zeros(dim)
        e[a] = 1.0

        def central(width):
            return (psi.hessian(x + width * e) - psi.hessian(x - width * e)) / (2 * width)

        dg[a] = (4 * central(h / 2) - central(h)) / 3
    total = alpha_connection(psi, x, alpha) + np.swapaxes(alpha_connection(psi, x, -alpha), 1, 2)
    return float(np.max(np.abs(dg - total)))


@dataclass(frozen=True, eq=False)
class DuallyFlatChart:
    """psi with its conjugate phi; phi defaults to the numeric transform."""

    psi: object
    phi: object = None
    box: tuple = (-10.0, 10.0)

    def __post_init__(self):
        if self.phi is None:
            object.__setattr__(self, "phi", NumericConjugate(self.psi, self.box))

    def dual_coordinates(self, x) -> np.ndarray:
        return self.psi.gradient(np.asarray(x, dtype=float))

    def metric(self, x) -> np.ndarray:
        return fiber_metric(self.psi, x)

    def inverse_metric(self, y) -> np.ndarray:
        return self.phi.hessian(np.asarray(y, dtype=float))


def canonical_divergence(chart: DuallyFlatChart, xi, xi_prime) -> float:
    """D(xi || xi') = psi(xi) + phi(y(xi')) - xi . y(xi'), both points in x-coordinates."""
    xi = np.asarray(xi, dtype=float)
    y_prime = chart.dual_coordinates(xi_prime)
    return float(chart.psi.value(xi) + chart.phi.value(y_prime) - xi @ y_prime)


def pythagoras_check(chart: DuallyFlatChart, xi1, xi2, xi3, tol: float = 1e-9) -> float:
    """|D(xi3||xi1) - D(xi3||xi2) - D(xi2||xi1)| for xi1-xi2 straight in y, xi2-xi3 straight in x.

    The two geodesics must meet g-orthogonally at xi2: with the y-straight
    tangent converted to x-coordinates by Hess phi, g(u, Hess phi w) = u.w, so
    the condition is (xi3 - xi2).(y2 - y1) = 0.
    """
    xi1, xi2, xi3 = (np.asarray(v, dtype=float) for v in (xi1, xi2, xi3))
    y1, y2 = chart.dual_coordinates(xi1), chart.dual_coordinates(xi2)
    inner = float((xi3 - xi2) @ (y2 - y1))
    scale = max(1.0, float(np.linalg.norm(xi3 - xi2) * np.linalg.norm(y2 - y1)))
    if abs(inner) > tol * scale:
        raise OrthogonalityError(f"geodesics are not orthogonal at the middle point (g = {inner:.3e})")
    lhs = canonical_divergence(chart, xi3, xi1)
    rhs = canonical_divergence(chart, xi3, xi2) + canonical_divergence(chart, xi2, xi1)
    return abs(lhs - rhs)
