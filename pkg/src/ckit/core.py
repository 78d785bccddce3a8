"""Vectors, feasible sets, oracle bundles and the generalized prox step.

Everything downstream (subsolvers, catalyst loops, testbed, harness) is
built on the primitives in this module.  Points are plain 1-d float64
numpy arrays; feasible sets expose Euclidean projections; objectives are
oracle bundles carrying their smoothness/convexity moduli.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import ContractViolationError

__all__ = [
    "as_point",
    "PrimalDualPoint",
    "Ball",
    "Box",
    "Simplex",
    "ProductSet",
    "project",
    "prox_step",
    "SmoothObjective",
    "SaddleObjective",
    "saddle_operator",
    "OracleStream",
    "sample_grad",
]


def as_point(x, dim: Optional[int] = None) -> np.ndarray:
    """Validate and return ``x`` as a finite 1-d float64 vector."""
    p = np.asarray(x, dtype=np.float64)
    if p.ndim == 0:
        p = p.reshape(1)
    if p.ndim != 1:
        raise ContractViolationError(f"point must be 1-d, got shape {p.shape}")
    if p.size < 1:
        raise ContractViolationError("point must have dimension >= 1")
    if not np.all(np.isfinite(p)):
        raise ContractViolationError("point has non-finite entries")
    if dim is not None and p.size != dim:
        raise ContractViolationError(f"dimension mismatch: expected {dim}, got {p.size}")
    return p


@dataclass(frozen=True)
class PrimalDualPoint:
    """A stacked (x, y) iterate with the primal/dual split index."""

    coords: np.ndarray
    split: int

    def __post_init__(self):
        object.__setattr__(self, "coords", as_point(self.coords))
        if not 1 <= self.split < self.coords.size:
            raise ContractViolationError(
                f"split must satisfy 1 <= split < {self.coords.size}, got {self.split}"
            )

    @property
    def x(self) -> np.ndarray:
        return self.coords[: self.split]

    @property
    def y(self) -> np.ndarray:
        return self.coords[self.split:]


# ---------------------------------------------------------------------------
# Feasible sets
# ---------------------------------------------------------------------------


class Ball:
    """Euclidean ball {p : ||p - center|| <= radius}."""

    def __init__(self, center, radius: float):
        self.center = as_point(center)
        self.radius = float(radius)
        if not self.radius > 0:
            raise ContractViolationError("ball radius must be > 0")
        self.dim = self.center.size

    def project(self, p: np.ndarray) -> np.ndarray:
        d = p - self.center
        nsq = float(d @ d)
        if nsq <= self.radius * self.radius:
            return p
        return self.center + d * (self.radius / math.sqrt(nsq))

    def contains(self, p: np.ndarray, tol: float = 1e-9) -> bool:
        return float(np.linalg.norm(p - self.center)) <= self.radius * (1 + tol) + tol

    def __repr__(self):
        return f"Ball(dim={self.dim}, radius={self.radius})"


class Box:
    """Axis-aligned box {p : lower <= p <= upper} componentwise."""

    def __init__(self, lower, upper):
        self.lower = as_point(lower)
        self.upper = as_point(upper, dim=self.lower.size)
        if np.any(self.lower > self.upper):
            raise ContractViolationError("box requires lower <= upper componentwise")
        self.dim = self.lower.size

    def project(self, p: np.ndarray) -> np.ndarray:
        return np.clip(p, self.lower, self.upper)

    def contains(self, p: np.ndarray, tol: float = 1e-9) -> bool:
        return bool(np.all(p >= self.lower - tol) and np.all(p <= self.upper + tol))

    def __repr__(self):
        return f"Box(dim={self.dim})"


class Simplex:
    """Scaled simplex {p : p >= 0, sum(p) = scale}."""

    def __init__(self, scale: float, dim: int):
        self.scale = float(scale)
        if not self.scale > 0:
            raise ContractViolationError("simplex scale must be > 0")
        self.dim = int(dim)
        if self.dim < 1:
            raise ContractViolationError("simplex dimension must be >= 1")

    def project(self, p: np.ndarray) -> np.ndarray:
        # sort-and-threshold; ties in the sort do not affect the (unique) output
        u = np.sort(p)[::-1]
        css = np.cumsum(u)
        idx = np.arange(1, p.size + 1)
        rho = np.nonzero(u * idx > css - self.scale)[0][-1]
        theta = (css[rho] - self.scale) / (rho + 1.0)
        return np.maximum(p - theta, 0.0)

    def contains(self, p: np.ndarray, tol: float = 1e-9) -> bool:
        return bool(np.all(p >= -tol) and abs(float(p.sum()) - self.scale) <= tol * max(1.0, self.scale))

    def __repr__(self):
        return f"Simplex(scale={self.scale}, dim={self.dim})"


class ProductSet:
    """Cartesian product of two sets, stacked as [first; second]."""

    def __init__(self, first, second):
        self.first = first
        self.second = second
        self.dim = first.dim + second.dim
        self.split = first.dim

    def project(self, p: np.ndarray) -> np.ndarray:
        s = self.split
        return np.concatenate([self.first.project(p[:s]), self.second.project(p[s:])])

    def contains(self, p: np.ndarray, tol: float = 1e-9) -> bool:
        s = self.split
        return self.first.contains(p[:s], tol) and self.second.contains(p[s:], tol)

    def __repr__(self):
        return f"ProductSet({self.first!r}, {self.second!r})"


def project(fs, p) -> np.ndarray:
    """Euclidean projection of ``p`` onto the feasible set ``fs``."""
    p = as_point(p, dim=fs.dim)
    return fs.project(p)


def prox_step(fs, eta: float, center, grad, anchors=()) -> np.ndarray:
    """Exact minimizer over ``fs`` of the quadratic-anchored linear model.

    Minimizes ``<grad, u> + (1/(2*eta))*||u - center||^2
    + sum_i (w_i/2)*||u - a_i||^2`` where ``anchors`` is a sequence of
    ``(w_i, a_i)`` pairs with ``w_i >= 0``.  The objective is a scaled
    squared distance to its unconstrained minimizer, so projecting that
    minimizer onto ``fs`` is exact.
    """
    if not eta > 0:
        raise ContractViolationError(f"stepsize must be > 0, got {eta}")
    center = as_point(center, dim=fs.dim)
    grad = as_point(grad, dim=fs.dim)
    if not anchors:
        return fs.project(center - eta * grad)
    num = center / eta - grad
    den = 1.0 / eta
    for w, a in anchors:
        if w < 0:
            raise ContractViolationError("anchor weights must be >= 0")
        if w > 0:
            num = num + w * as_point(a, dim=fs.dim)
            den += w
    return fs.project(num / den)


# ---------------------------------------------------------------------------
# Oracle bundles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SmoothObjective:
    """Oracle bundle for an L-smooth, mu-convex objective over a set.

    ``sigma`` is the standard-deviation budget of the stochastic gradient
    oracle: sampled gradients satisfy E||noise||^2 = sigma^2 exactly.
    """

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    L: float
    mu: float
    set: object
    sigma: float = 0.0

    def __post_init__(self):
        if not self.L > 0:
            raise ContractViolationError("smoothness modulus L must be > 0")
        if self.mu < 0 or self.mu > self.L * (1 + 1e-12):
            raise ContractViolationError("need 0 <= mu <= L")
        if self.sigma < 0:
            raise ContractViolationError("noise level sigma must be >= 0")

    @property
    def dim(self) -> int:
        return self.set.dim

    def with_mu(self, mu: float) -> "SmoothObjective":
        """Same oracles with a (weaker) declared convexity modulus."""
        return replace(self, mu=mu)

    def audit(self, rng: np.random.Generator, n_pairs: int = 64) -> None:
        """Sampled smoothness / convexity checks; raises on violation."""
        for _ in range(n_pairs):
            a = self.set.project(rng.standard_normal(self.dim) * 3.0)
            b = self.set.project(rng.standard_normal(self.dim) * 3.0)
            ga, gb = self.grad(a), self.grad(b)
            gap = float(np.linalg.norm(ga - gb)) - self.L * float(np.linalg.norm(a - b))
            if gap > 1e-8 * max(1.0, self.L):
                raise ContractViolationError("sampled gradient Lipschitz check failed")
            lower = self.value(a) + float(ga @ (b - a)) + 0.5 * self.mu * float((b - a) @ (b - a))
            if self.value(b) < lower - 1e-8 * max(1.0, abs(self.value(b))):
                raise ContractViolationError("sampled strong-convexity check failed")


@dataclass(frozen=True)
class SaddleObjective:
    """Oracle bundle for F(x, y), mu_p-convex in x and mu_d-concave in y."""

    value: Callable[[np.ndarray, np.ndarray], float]
    grad_x: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad_y: Callable[[np.ndarray, np.ndarray], np.ndarray]
    L: float
    mu_p: float
    mu_d: float
    set_x: object
    set_y: object
    sigma: float = 0.0
    d_y: Optional[float] = None
    # optional fused evaluation of the stacked operator (hot-loop shortcut;
    # must agree with [grad_x; -grad_y] and return a fresh array per call)
    operator_impl: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if not self.L > 0:
            raise ContractViolationError("smoothness modulus L must be > 0")
        if self.mu_p < 0 or self.mu_d < 0:
            raise ContractViolationError("moduli must be >= 0")
        if self.mu_d < self.mu_p:
            raise ContractViolationError("need mu_d >= mu_p")
        if self.sigma < 0:
            raise ContractViolationError("noise level sigma must be >= 0")

    @property
    def dim_x(self) -> int:
        return self.set_x.dim

    @property
    def dim_y(self) -> int:
        return self.set_y.dim

    @property
    def dim(self) -> int:
        return self.dim_x + self.dim_y

    @property
    def set_z(self) -> ProductSet:
        return ProductSet(self.set_x, self.set_y)

    def with_mu_p(self, mu_p: float) -> "SaddleObjective":
        return replace(self, mu_p=mu_p)

    def operator(self, z: np.ndarray) -> np.ndarray:
        if self.operator_impl is not None:
            return self.operator_impl(z)
        x, y = z[: self.dim_x], z[self.dim_x:]
        return np.concatenate([self.grad_x(x, y), -self.grad_y(x, y)])

    def audit(self, rng: np.random.Generator, n_pairs: int = 64) -> None:
        """Sampled operator-Lipschitz and convexity/concavity checks."""
        dx = self.dim_x
        for _ in range(n_pairs):
            za = self.set_z.project(rng.standard_normal(self.dim) * 3.0)
            zb = self.set_z.project(rng.standard_normal(self.dim) * 3.0)
            dist = float(np.linalg.norm(za - zb))
            gap = float(np.linalg.norm(self.operator(za) - self.operator(zb))) - self.L * dist
            if gap > 1e-8 * max(1.0, self.L):
                raise ContractViolationError("sampled operator Lipschitz check failed")
            xa, ya = za[:dx], za[dx:]
            xb, yb = zb[:dx], zb[dx:]
            dxv = xa - xb
            lhs = self.value(xa, ya) - self.value(xb, ya) - float(self.grad_x(xb, ya) @ dxv)
            if lhs < 0.5 * self.mu_p * float(dxv @ dxv) - 1e-8 * max(1.0, abs(lhs)):
                raise ContractViolationError("sampled x-convexity check failed")
            dyv = ya - yb
            rhs = self.value(xa, ya) - self.value(xa, yb) - float(self.grad_y(xa, yb) @ dyv)
            if rhs > -0.5 * self.mu_d * float(dyv @ dyv) + 1e-8 * max(1.0, abs(rhs)):
                raise ContractViolationError("sampled y-concavity check failed")


def saddle_operator(prob: SaddleObjective, z) -> np.ndarray:
    """Stacked monotone operator [grad_x F; -grad_y F] at z."""
    if isinstance(z, PrimalDualPoint):
        if z.split != prob.dim_x:
            raise ContractViolationError("primal/dual split does not match the problem")
        z = z.coords
    z = as_point(z, dim=prob.dim)
    return prob.operator(z)


# ---------------------------------------------------------------------------
# Stochastic first-order oracle stream
# ---------------------------------------------------------------------------


class OracleStream:
    """Counter-based noise source owned by exactly one run.

    Draws come from a Philox generator keyed by the seed and are consumed
    sequentially; ``counter`` records the number of oracle calls.  Equal
    (seed, call-sequence) pairs reproduce identical draws, and a block of
    ``n`` draws is bitwise-identical to ``n`` successive single draws, so
    solvers may pre-draw their noise tables.
    """

    def __init__(self, seed: int, spawn_key: tuple = ()):
        self.seed = int(seed)
        self.spawn_key = tuple(int(k) for k in spawn_key)
        self.counter = 0
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.spawn_key)
        self._gen = np.random.Generator(np.random.Philox(ss))

    @classmethod
    def for_run(cls, base_seed: int, run_id: int) -> "OracleStream":
        """Independent per-run stream; distinct runs never share state."""
        return cls(base_seed, spawn_key=(run_id,))

    def normal(self, dim: int) -> np.ndarray:
        """One standard-normal vector; advances the counter."""
        self.counter += 1
        return self._gen.standard_normal(dim)

    def normal_block(self, n: int, dim: int) -> np.ndarray:
        """(n, dim) standard normals == n successive ``normal`` calls."""
        self.counter += n
        return self._gen.standard_normal((n, dim))

    def noise(self, dim: int, sigma: float) -> Optional[np.ndarray]:
        """Isotropic noise with E||n||^2 = sigma^2, or None when sigma=0."""
        if sigma == 0.0:
            self.counter += 1
            return None
        return self.normal(dim) * (sigma / math.sqrt(dim))

    def noise_block(self, n: int, dim: int, sigma: float) -> Optional[np.ndarray]:
        if sigma == 0.0:
            self.counter += n
            return None
        return self.normal_block(n, dim) * (sigma / math.sqrt(dim))


def sample_grad(prob, point, stream: OracleStream) -> np.ndarray:
    """Unbiased gradient (or saddle-operator) sample with variance sigma^2.

    The noise is isotropic Gaussian scaled so that E||noise||^2 equals
    ``prob.sigma**2`` exactly; sigma=0 returns the exact gradient bitwise.
    """
    if isinstance(prob, SaddleObjective):
        g = saddle_operator(prob, point)
    else:
        g = prob.grad(as_point(point, dim=prob.dim))
    n = stream.noise(g.size, prob.sigma)
    return g if n is None else g + n
