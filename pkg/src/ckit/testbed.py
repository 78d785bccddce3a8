"""Synthetic problems with analytically known optima.

Quadratic instances f(x) = (1/2) x'Ax - b'x over a ball, with a controlled
spectrum, known minimizer and a closed-form prox; bilinear-coupled saddle
instances F(x,y) = (mu_p/2)||x||^2 + x'By - (mu_d/2)||y||^2 + c'x + d'y
over a product of balls, with a known saddle point and a closed-form inner
argmax.  Ground truth from these instances is what the benchmark harness
measures against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np

from .core import Ball, ProductSet, SaddleObjective, SmoothObjective, as_point
from .errors import ContractViolationError

__all__ = [
    "QuadraticInstance",
    "SaddleInstance",
    "gen_quadratic",
    "gen_saddle",
    "exact_prox",
    "inner_argmax",
    "primal_value",
    "save_instance",
    "load_instance",
]

_MAGIC = b"CKIT1"


def _power_extremes(a: np.ndarray, iters: int = 3000) -> tuple[float, float]:
    """Extreme eigenvalues of a symmetric positive-definite matrix: power
    iteration for the top, inverse iteration for the bottom (the bottom of
    a log-uniform spectrum clusters, which plain shifting cannot resolve)."""
    d = a.shape[0]
    if d == 1:
        return float(a[0, 0]), float(a[0, 0])
    rng = np.random.default_rng(0)
    v = np.ones(d) / math.sqrt(d) + 1e-3 * rng.standard_normal(d)
    lam_max = 0.0
    for _ in range(iters):
        w = a @ v
        v = w / np.linalg.norm(w)
        new = float(v @ (a @ v))
        done = abs(new - lam_max) <= 1e-13 * max(1.0, abs(new))
        lam_max = new
        if done:
            break
    a_inv = np.linalg.inv(a)
    v = np.ones(d) / math.sqrt(d) + 1e-3 * rng.standard_normal(d)
    lam_min = lam_max
    for _ in range(iters):
        w = a_inv @ v
        v = w / np.linalg.norm(w)
        new = float(v @ (a @ v))
        done = abs(new - lam_min) <= 1e-13 * max(1e-12, abs(new))
        lam_min = new
        if done:
            break
    return lam_min, lam_max


@dataclass(frozen=True)
class QuadraticInstance:
    """f(x) = (1/2) x'Ax - b'x over Ball(0, radius), with known optimum."""

    a: np.ndarray
    b: np.ndarray
    L: float
    mu: float
    seed: int
    radius: float
    x_star: np.ndarray
    f_star: float

    @property
    def dim(self) -> int:
        return self.b.size

    def value(self, x: np.ndarray) -> float:
        return 0.5 * float(x @ (self.a @ x)) - float(self.b @ x)

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.a @ x - self.b

    def feasible_set(self) -> Ball:
        return Ball(np.zeros(self.dim), self.radius)

    def objective(self, sigma: float = 0.0) -> SmoothObjective:
        return SmoothObjective(
            value=self.value,
            grad=self.grad,
            L=self.L,
            mu=self.mu,
            set=self.feasible_set(),
            sigma=sigma,
        )

    def exact_prox(self, center, beta: float) -> np.ndarray:
        """Closed-form minimizer of f(u) + (beta/2)||u - center||^2 over the
        ball: (A + beta I)^-1 (beta*center + b), projected if needed."""
        if not beta > 0:
            raise ContractViolationError("prox weight beta must be > 0")
        center = as_point(center, dim=self.dim)
        u = np.linalg.solve(self.a + beta * np.eye(self.dim), beta * center + self.b)
        return self.feasible_set().project(u)

    def audit(self) -> None:
        if not np.allclose(self.a, self.a.T, atol=1e-12):
            raise ContractViolationError("quadratic matrix must be symmetric")
        lam_min, lam_max = _power_extremes(self.a)
        target_min = self.mu if self.mu > 0 else 1e-6
        if abs(lam_max - self.L) > 1e-6 * max(1.0, self.L):
            raise ContractViolationError("top eigenvalue drifted from L")
        if self.dim > 1 and abs(lam_min - target_min) > 1e-6 * max(1.0, self.L):
            raise ContractViolationError("bottom eigenvalue drifted from mu")
        if abs(np.linalg.norm(self.x_star) - self.radius / 2) > 1e-9 * max(1.0, self.radius):
            raise ContractViolationError("minimizer is not at half radius")
        scale = max(1.0, self.L * np.linalg.norm(self.x_star))
        if np.linalg.norm(self.grad(self.x_star)) > 1e-8 * scale:
            raise ContractViolationError("gradient at the known minimizer is not ~0")
        if abs(self.value(self.x_star) - self.f_star) > 1e-8 * max(1.0, abs(self.f_star)):
            raise ContractViolationError("stored optimal value is inconsistent")


def gen_quadratic(d: int, L: float, mu: float, seed: int) -> QuadraticInstance:
    """Random quadratic with spectrum endpoints (mu, L), interior optimum.

    The interior eigenvalues are log-uniform in [max(mu, 1e-6), L]; for
    mu = 0 the spectrum is floored at 1e-6 for conditioning of the eigen
    audit only, and the emitted objective still declares mu = 0.
    """
    if d < 1:
        raise ContractViolationError("dimension must be >= 1")
    if mu < 0 or mu > L:
        raise ContractViolationError("need 0 <= mu <= L")
    if d == 1 and mu not in (0.0, L):
        raise ContractViolationError("d=1 carries a single eigenvalue; need mu in {0, L}")
    rng = np.random.default_rng(seed)
    floor = mu if mu > 0 else 1e-6
    if d == 1:
        lam = np.array([L])
    else:
        lam = np.empty(d)
        lam[0] = floor
        lam[-1] = L
        if d > 2:
            lam[1:-1] = np.exp(rng.uniform(math.log(floor), math.log(L), size=d - 2))
    g = rng.standard_normal((d, d))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))
    a = (q * lam) @ q.T
    a = 0.5 * (a + a.T)
    x_star = rng.standard_normal(d)
    while np.linalg.norm(x_star) < 1e-8:
        x_star = rng.standard_normal(d)
    b = a @ x_star
    inst = QuadraticInstance(
        a=a,
        b=b,
        L=float(L),
        mu=float(mu),
        seed=int(seed),
        radius=2.0 * float(np.linalg.norm(x_star)),
        x_star=x_star,
        f_star=-0.5 * float(b @ x_star),
    )
    inst.audit()
    return inst


def exact_prox(inst: QuadraticInstance, center, beta: float) -> np.ndarray:
    return inst.exact_prox(center, beta)


# ---------------------------------------------------------------------------
# Saddle instances
# ---------------------------------------------------------------------------


def _jacobian_norm_sq(s: float, mu_p: float, mu_d: float) -> float:
    # largest singular value (squared) of [[mu_p I, B], [-B', mu_d I]] as a
    # function of s = ||B||_2; increasing in s
    avg = 0.5 * (mu_p * mu_p + mu_d * mu_d)
    half_diff = 0.5 * abs(mu_p * mu_p - mu_d * mu_d)
    return s * s + avg + math.sqrt(half_diff**2 + (mu_p - mu_d) ** 2 * s * s)


def _coupling_norm_for(L: float, mu_p: float, mu_d: float) -> float:
    """||B||_2 making the operator's Lipschitz constant exactly L."""
    target = L * L
    lo, hi = 0.0, L
    if _jacobian_norm_sq(lo, mu_p, mu_d) > target * (1 + 1e-12):
        raise ContractViolationError("need L >= max(mu_p, mu_d)")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _jacobian_norm_sq(mid, mu_p, mu_d) <= target:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class SaddleInstance:
    """Bilinear-coupled quadratic saddle with interior saddle point."""

    b_mat: np.ndarray
    c_vec: np.ndarray
    d_vec: np.ndarray
    L: float
    mu_p: float
    mu_d: float
    seed: int
    radius_x: float
    radius_y: float
    d_y: float
    x_star: np.ndarray
    y_star: np.ndarray
    f_star: float

    @property
    def dim_x(self) -> int:
        return self.c_vec.size

    @property
    def dim_y(self) -> int:
        return self.d_vec.size

    def value(self, x: np.ndarray, y: np.ndarray) -> float:
        return (
            0.5 * self.mu_p * float(x @ x)
            + float(x @ (self.b_mat @ y))
            - 0.5 * self.mu_d * float(y @ y)
            + float(self.c_vec @ x)
            + float(self.d_vec @ y)
        )

    def grad_x(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.mu_p * x + self.b_mat @ y + self.c_vec

    def grad_y(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.b_mat.T @ x - self.mu_d * y + self.d_vec

    def jacobian(self) -> np.ndarray:
        dx, dy = self.dim_x, self.dim_y
        j = np.zeros((dx + dy, dx + dy))
        j[:dx, :dx] = self.mu_p * np.eye(dx)
        j[:dx, dx:] = self.b_mat
        j[dx:, :dx] = -self.b_mat.T
        j[dx:, dx:] = self.mu_d * np.eye(dy)
        return j

    def operator_affine(self) -> tuple[np.ndarray, np.ndarray]:
        """(J, g0) with G(z) = J z + g0."""
        return self.jacobian(), np.concatenate([self.c_vec, -self.d_vec])

    def set_x(self) -> Ball:
        return Ball(np.zeros(self.dim_x), self.radius_x)

    def set_y(self) -> Ball:
        return Ball(np.zeros(self.dim_y), self.radius_y)

    def set_z(self) -> ProductSet:
        return ProductSet(self.set_x(), self.set_y())

    def objective(self, sigma: float = 0.0) -> SaddleObjective:
        j, g0 = self.operator_affine()
        return SaddleObjective(
            value=self.value,
            grad_x=self.grad_x,
            grad_y=self.grad_y,
            L=self.L,
            mu_p=self.mu_p,
            mu_d=self.mu_d,
            set_x=self.set_x(),
            set_y=self.set_y(),
            sigma=sigma,
            d_y=self.d_y,
            operator_impl=lambda z: j @ z + g0,
        )

    @property
    def z_star(self) -> np.ndarray:
        return np.concatenate([self.x_star, self.y_star])

    def inner_argmax(self, x: np.ndarray) -> np.ndarray:
        """argmax_y F(x, y); the closed form (B'x + d)/mu_d, asserted interior."""
        y = (self.b_mat.T @ x + self.d_vec) / self.mu_d
        if float(np.linalg.norm(y)) > self.radius_y * (1 + 1e-6):
            raise ContractViolationError("inner argmax left the dual set; instance mis-sized")
        return y

    def primal_value(self, x: np.ndarray) -> float:
        """f(x) = max_y F(x, y) in closed form."""
        r = self.b_mat.T @ x + self.d_vec
        return (
            0.5 * self.mu_p * float(x @ x)
            + float(self.c_vec @ x)
            + 0.5 * float(r @ r) / self.mu_d
        )

    def dual_value(self, y: np.ndarray) -> float:
        """g(y) = min_x F(x, y) over the primal ball, in closed form."""
        r = self.b_mat @ y + self.c_vec
        base = -0.5 * self.mu_d * float(y @ y) + float(self.d_vec @ y)
        if self.mu_p > 0:
            return base - 0.5 * float(r @ r) / self.mu_p
        return base - self.radius_x * float(np.linalg.norm(r))

    def audit(self) -> None:
        g_star = np.concatenate(
            [self.grad_x(self.x_star, self.y_star), -self.grad_y(self.x_star, self.y_star)]
        )
        scale = max(1.0, self.L * (np.linalg.norm(self.x_star) + np.linalg.norm(self.y_star)))
        if np.linalg.norm(g_star) > 1e-8 * scale:
            raise ContractViolationError("operator at the known saddle point is not ~0")
        top = float(np.linalg.svd(self.jacobian(), compute_uv=False)[0])
        if abs(top - self.L) > 1e-8 * max(1.0, self.L):
            raise ContractViolationError("recorded Lipschitz constant drifted")
        if np.linalg.norm(self.x_star) > 0.5 * self.radius_x * (1 + 1e-9) or np.linalg.norm(
            self.y_star
        ) > 0.5 * self.radius_y * (1 + 1e-9) + 1e-12:
            raise ContractViolationError("saddle point is not strictly interior")
        # strong duality through the closed forms
        fv = self.primal_value(self.x_star)
        gv = self.dual_value(self.y_star)
        sv = self.value(self.x_star, self.y_star)
        ref = max(1.0, abs(sv))
        if abs(fv - sv) > 1e-8 * ref or abs(gv - sv) > 1e-8 * ref or abs(fv - self.f_star) > 1e-8 * ref:
            raise ContractViolationError("strong duality check failed")
        # inner argmax must stay inside Y over the whole primal ball
        b_norm = float(np.linalg.svd(self.b_mat, compute_uv=False)[0])
        reach = (b_norm * self.radius_x + float(np.linalg.norm(self.d_vec))) / self.mu_d
        if reach > self.radius_y * (1 + 1e-9):
            raise ContractViolationError("dual set cannot hold the inner argmax range")


def gen_saddle(
    dx: int,
    dy: int,
    L: float,
    mu_p: float,
    mu_d: float,
    seed: int,
    scale: float = 1.0,
) -> SaddleInstance:
    """Random saddle instance with operator Lipschitz constant exactly L.

    ``scale`` multiplies the linear terms c, d (and thus the solution
    norms), which sets how far from the saddle a run can start.
    """
    if dx < 1 or dy < 1:
        raise ContractViolationError("dimensions must be >= 1")
    if mu_p < 0 or mu_d <= 0 or mu_p > mu_d:
        raise ContractViolationError("need 0 <= mu_p <= mu_d, mu_d > 0")
    if L < max(mu_p, mu_d):
        raise ContractViolationError("need L >= max(mu_p, mu_d)")
    if mu_p == 0 and dx > dy:
        raise ContractViolationError("mu_p = 0 needs dx <= dy for a unique primal optimum")
    last_err = None
    for attempt in range(5):
        rng = np.random.default_rng(seed + 1000003 * attempt)
        b = rng.standard_normal((dx, dy))
        s_target = _coupling_norm_for(L, mu_p, mu_d)
        s_now = float(np.linalg.svd(b, compute_uv=False)[0])
        b = b * (s_target / s_now) if s_now > 0 else b
        c = rng.standard_normal(dx) * scale
        d = rng.standard_normal(dy) * scale
        try:
            if mu_p > 0:
                dxy = dx + dy
                m = np.zeros((dxy, dxy))
                m[:dx, :dx] = mu_p * np.eye(dx)
                m[:dx, dx:] = b
                m[dx:, :dx] = -b.T
                m[dx:, dx:] = mu_d * np.eye(dy)
                sol = np.linalg.solve(m, np.concatenate([-c, d]))
                x_star, y_star = sol[:dx], sol[dx:]
            else:
                h = b @ b.T / mu_d
                if np.linalg.cond(h) > 1e12:
                    raise np.linalg.LinAlgError("reduced primal system ill-conditioned")
                x_star = np.linalg.solve(h, -(c + b @ d / mu_d))
                y_star = (b.T @ x_star + d) / mu_d
        except np.linalg.LinAlgError as err:
            last_err = err
            continue
        radius_x = 2.0 * float(np.linalg.norm(x_star))
        if radius_x < 1e-8:
            radius_x = 1.0
        b_norm = float(np.linalg.svd(b, compute_uv=False)[0])
        reach = (b_norm * radius_x + float(np.linalg.norm(d))) / mu_d
        radius_y = max(2.0 * float(np.linalg.norm(y_star)), 1.05 * reach, 1e-8)
        inst = SaddleInstance(
            b_mat=b,
            c_vec=c,
            d_vec=d,
            L=float(L),
            mu_p=float(mu_p),
            mu_d=float(mu_d),
            seed=int(seed),
            radius_x=radius_x,
            radius_y=radius_y,
            d_y=2.0 * radius_y,
            x_star=x_star,
            y_star=y_star,
            f_star=0.0,
        )
        inst = SaddleInstance(**{**inst.__dict__, "f_star": inst.primal_value(x_star)})
        inst.audit()
        return inst
    raise ContractViolationError(f"could not generate a well-posed instance: {last_err}")


def inner_argmax(inst: SaddleInstance, x) -> np.ndarray:
    return inst.inner_argmax(as_point(x, dim=inst.dim_x))


def primal_value(inst: SaddleInstance, x) -> float:
    return inst.primal_value(as_point(x, dim=inst.dim_x))


# ---------------------------------------------------------------------------
# Flat-file serialization (magic "CKIT1", little-endian float64 payload)
# ---------------------------------------------------------------------------


def _le(a) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def save_instance(inst, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        if isinstance(inst, QuadraticInstance):
            head = [1.0, inst.dim, inst.L, inst.mu, inst.seed, inst.radius, inst.f_star]
            fh.write(_le(head))
            fh.write(_le(inst.a.ravel()))
            fh.write(_le(inst.b))
            fh.write(_le(inst.x_star))
        elif isinstance(inst, SaddleInstance):
            head = [
                2.0,
                inst.dim_x,
                inst.dim_y,
                inst.L,
                inst.mu_p,
                inst.mu_d,
                inst.seed,
                inst.radius_x,
                inst.radius_y,
                inst.d_y,
                inst.f_star,
            ]
            fh.write(_le(head))
            fh.write(_le(inst.b_mat.ravel()))
            fh.write(_le(inst.c_vec))
            fh.write(_le(inst.d_vec))
            fh.write(_le(inst.x_star))
            fh.write(_le(inst.y_star))
        else:
            raise ContractViolationError(f"cannot serialize {type(inst).__name__}")


def load_instance(path):
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ContractViolationError("bad magic header; not an instance file")
        payload = np.frombuffer(fh.read(), dtype="<f8")
    kind = payload[0]
    if kind == 1.0:
        d = int(payload[1])
        L, mu, seed, radius, f_star = payload[2:7]
        off = 7
        a = payload[off: off + d * d].reshape(d, d).copy()
        off += d * d
        b = payload[off: off + d].copy()
        off += d
        x_star = payload[off: off + d].copy()
        return QuadraticInstance(a, b, float(L), float(mu), int(seed), float(radius), x_star, float(f_star))
    if kind == 2.0:
        dx, dy = int(payload[1]), int(payload[2])
        L, mu_p, mu_d, seed, radius_x, radius_y, d_y, f_star = payload[3:11]
        off = 11
        b_mat = payload[off: off + dx * dy].reshape(dx, dy).copy()
        off += dx * dy
        c = payload[off: off + dx].copy()
        off += dx
        d_vec = payload[off: off + dy].copy()
        off += dy
        x_star = payload[off: off + dx].copy()
        off += dx
        y_star = payload[off: off + dy].copy()
        return SaddleInstance(
            b_mat,
            c,
            d_vec,
            float(L),
            float(mu_p),
            float(mu_d),
            int(seed),
            float(radius_x),
            float(radius_y),
            float(d_y),
            x_star,
            y_star,
            float(f_star),
        )
    raise ContractViolationError(f"unknown instance kind {kind}")
