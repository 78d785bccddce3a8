"""Inner methods catalyzed by the outer accelerated proximal-point loops.

Four solvers live here: a prox-anchored stochastic gradient method for
strongly convex subproblems, a regularized extragradient method (and its
stochastic and restarted variants) for strongly monotone saddle operators,
and the asymmetric-weight stochastic extragradient used inside the
stochastic minimax catalyst.  Every solver returns an ergodic point, its
last iterate, the analytic oracle-call count and an inexactness
certificate whose (alpha, eps, eps', delta) entries are the closed forms
its convergence guarantee supplies.

Certificates are dimensionless: alpha and eps multiply (modulus/2) *
squared distances in the guarantee, delta is an absolute value-scale
error.  The decay weights Lambda follow their defining recursions; the
linear-rate products are handled in log domain so certificates stay
finite for very long runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .core import OracleStream, PrimalDualPoint, as_point
from .errors import ContractViolationError, RecipeViolationError

__all__ = [
    "ProxSubproblem",
    "SaddleSubproblem",
    "InexactnessCertificate",
    "SolverOutput",
    "sgd_prox",
    "sgd_lambda",
    "sgd_certificate",
    "reg",
    "sreg",
    "sreg_schedule",
    "sreg_restarted",
    "sreg_asym",
    "asym_stepsize",
    "asym_certificate",
]


def _inv_expm1(y: float) -> float:
    """1 / (e^y - 1), stable for any y > 0 (underflows to 0, never overflows)."""
    if y <= 0:
        raise ContractViolationError("need a positive exponent")
    t = math.exp(-y)
    return t / (1.0 - t) if t < 1.0 else math.inf


@dataclass(frozen=True)
class InexactnessCertificate:
    """Closed-form (alpha, eps, eps', delta) attached to a solver output."""

    alpha: float
    eps: float
    delta: float
    eps_prime: Optional[float] = None

    def __post_init__(self):
        if not self.alpha > 0 or self.eps < 0 or self.delta < 0:
            raise ContractViolationError("certificate entries out of range")
        if self.eps_prime is not None and self.eps_prime < 0:
            raise ContractViolationError("certificate entries out of range")
        companion = self.eps if self.eps_prime is None else self.eps_prime
        if math.isfinite(companion) and abs(self.alpha - 1.0 - companion) > 1e-9 * self.alpha:
            raise ContractViolationError("certificate is not self-consistent (alpha != 1 + eps)")


@dataclass(frozen=True)
class SolverOutput:
    ergodic: Union[np.ndarray, PrimalDualPoint]
    last: Union[np.ndarray, PrimalDualPoint]
    sfo_calls: int
    certificate: InexactnessCertificate


# ---------------------------------------------------------------------------
# Prox subproblems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProxSubproblem:
    """phi(u) = f(u) + (beta/2)||u - center||^2 with implied moduli."""

    base: object  # SmoothObjective
    beta: float
    center: np.ndarray

    def __post_init__(self):
        if not self.beta > 0:
            raise ContractViolationError("prox weight beta must be > 0")
        object.__setattr__(self, "center", as_point(self.center, dim=self.base.dim))

    @property
    def mu_phi(self) -> float:
        return self.base.mu + self.beta

    @property
    def L_phi(self) -> float:
        return self.base.L + self.beta

    @property
    def set(self):
        return self.base.set

    @property
    def sigma(self) -> float:
        return self.base.sigma

    def value(self, u: np.ndarray) -> float:
        d = u - self.center
        return self.base.value(u) + 0.5 * self.beta * float(d @ d)

    def grad(self, u: np.ndarray) -> np.ndarray:
        return self.base.grad(u) + self.beta * (u - self.center)


@dataclass(frozen=True)
class SaddleSubproblem:
    """Psi(x,y) = F(x,y) + (beta/2)||x - center||^2 with shifted moduli."""

    base: object  # SaddleObjective
    beta: float
    center: np.ndarray

    def __post_init__(self):
        if self.beta < 0:
            raise ContractViolationError("prox weight beta must be >= 0")
        object.__setattr__(self, "center", as_point(self.center, dim=self.base.dim_x))

    @property
    def mu_x(self) -> float:
        return self.base.mu_p + self.beta

    @property
    def mu_y(self) -> float:
        return self.base.mu_d + self.beta

    @property
    def L(self) -> float:
        return self.base.L + self.beta

    @property
    def dim_x(self) -> int:
        return self.base.dim_x

    @property
    def dim_y(self) -> int:
        return self.base.dim_y

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def sigma(self) -> float:
        return self.base.sigma

    @property
    def d_y(self):
        return self.base.d_y

    @property
    def set_x(self):
        return self.base.set_x

    @property
    def set_y(self):
        return self.base.set_y

    @property
    def set_z(self):
        return self.base.set_z

    def value(self, x: np.ndarray, y: np.ndarray) -> float:
        d = x - self.center
        return self.base.value(x, y) + 0.5 * self.beta * float(d @ d)

    def operator(self, z: np.ndarray) -> np.ndarray:
        # base.operator returns a fresh array, safe to shift in place
        g = self.base.operator(z)
        if self.beta > 0:
            dx = self.base.dim_x
            g[:dx] += self.beta * (z[:dx] - self.center)
        return g


# ---------------------------------------------------------------------------
# Prox-anchored stochastic gradient descent
# ---------------------------------------------------------------------------


def sgd_lambda(t: int, t0: int) -> float:
    """Closed form of the decay weight recursion Lambda_t = (1 - eta_t*mu)Lambda_{t-1}
    under the stepsize eta_t = 2/(mu*(t + t0 + 2))."""
    return (t0 + 1) * (t0 + 2) / ((t + t0 + 1) * (t + t0 + 2))


def sgd_certificate(T: int, t0: int, mu_phi: float, L_phi: float, sigma: float):
    """(eps, alpha, delta) certified by a T-step run; computable a priori."""
    lam_T = sgd_lambda(T, t0)
    eps = lam_T / (1.0 - lam_T)
    alpha = 1.0 / (1.0 - lam_T)
    if sigma == 0.0:
        return eps, alpha, 0.0
    t = np.arange(1, T + 1, dtype=np.float64)
    eta = 2.0 / (mu_phi * (t + t0 + 2))
    lam = (t0 + 1) * (t0 + 2) / ((t + t0 + 1) * (t + t0 + 2))
    terms = mu_phi * eta**2 / (lam * (1.0 - L_phi * eta))
    delta = lam_T / (2.0 * (1.0 - lam_T)) * sigma**2 * float(terms.sum())
    return eps, alpha, delta


def sgd_prox(sub: ProxSubproblem, T: int, t0: int, stream: OracleStream) -> SolverOutput:
    """Projected SGD on the anchored subproblem, started at its prox center.

    Runs T steps with stepsizes eta_t = 2/(mu_phi*(t + t0 + 2)) and returns
    the decay-weighted ergodic mean together with the last iterate.  The
    certificate satisfies eps <= 1 and delta <= 32*sigma^2/(mu_phi*T)
    whenever t0 >= 4*L_phi/mu_phi and T >= t0.
    """
    mu_phi, L_phi = sub.mu_phi, sub.L_phi
    if T < 1:
        raise RecipeViolationError("need T >= 1")
    if t0 < 4.0 * L_phi / mu_phi - 1e-12:
        raise RecipeViolationError(
            f"offset t0={t0} below 4*L_phi/mu_phi={4 * L_phi / mu_phi:.6g}"
        )
    if T < t0:
        raise RecipeViolationError(f"need T >= t0, got T={T}, t0={t0}")
    project = sub.set.project
    grad = sub.grad
    d = sub.center.size
    u = sub.center
    mean = np.zeros(d)
    wsum = 0.0
    noise = stream.noise_block(T, d, sub.sigma)
    for t in range(1, T + 1):
        g = grad(u)
        if noise is not None:
            g = g + noise[t - 1]
        eta = 2.0 / (mu_phi * (t + t0 + 2))
        u = project(u - eta * g)
        w = float(t + t0 + 1)  # eta_t*mu_phi/Lambda_t up to a constant factor
        wsum += w
        mean += (w / wsum) * (u - mean)
    eps, alpha, delta = sgd_certificate(T, t0, mu_phi, L_phi, sub.sigma)
    cert = InexactnessCertificate(alpha=alpha, eps=eps, delta=delta)
    return SolverOutput(ergodic=mean, last=u, sfo_calls=T, certificate=cert)


# ---------------------------------------------------------------------------
# Regularized extragradient (deterministic and stochastic)
# ---------------------------------------------------------------------------


def _eta_fn(eta) -> Callable[[int], float]:
    return eta if callable(eta) else (lambda t: float(eta))


def _split_prox(sub, eta, z, g, anchor=None, weights=None):
    """One extragradient prox over the product set, with optional anchored
    quadratics whose weights may differ between the primal and dual block.

    Inlines the prox_step arithmetic (inputs are solver-internal and
    already validated); the anchored form is (c + eta*(w*a - g))/(1 + eta*w)
    projected blockwise.
    """
    dx = sub.dim_x
    if anchor is None:
        x = sub.set_x.project(z[:dx] - eta * g[:dx])
        y = sub.set_y.project(z[dx:] - eta * g[dx:])
        return np.concatenate([x, y])
    w_x, w_y = weights
    x = sub.set_x.project((z[:dx] + eta * (w_x * anchor[:dx] - g[:dx])) / (1.0 + eta * w_x))
    y = sub.set_y.project((z[dx:] + eta * (w_y * anchor[dx:] - g[dx:])) / (1.0 + eta * w_y))
    return np.concatenate([x, y])


def reg(
    sub,
    mu: float,
    z0,
    T: int,
    eta,
    record: Optional[Callable[[int, np.ndarray], None]] = None,
) -> SolverOutput:
    """Regularized extragradient for a mu-strongly-monotone saddle operator.

    The look-ahead step probes the operator; the commit step carries an
    extra (mu/2)||z - z_hat||^2 anchor, which is what upgrades the classic
    method to a linear rate.  With eta = 1/L the last iterate contracts as
    ||z_T - z*||^2 <= (1 + mu/L)^(-T) ||z_0 - z*||^2.
    """
    if not mu > 0:
        raise ContractViolationError("regularization modulus mu must be > 0")
    if T < 1:
        raise RecipeViolationError("need T >= 1")
    eta_of = _eta_fn(eta)
    L = sub.L
    z = as_point(z0, dim=sub.dim)
    mean = np.zeros(sub.dim)
    s = 0.0  # running (sum eta_j*Lambda_j)/Lambda_t
    log_lam = 0.0
    for t in range(T):
        eta_t = eta_of(t)
        if eta_t * L > 1.0 + 1e-12:
            raise RecipeViolationError(f"stepsize eta_t={eta_t:.6g} exceeds 1/L at t={t}")
        g = sub.operator(z)
        z_hat = _split_prox(sub, eta_t, z, g)
        g_hat = sub.operator(z_hat)
        z = _split_prox(sub, eta_t, z, g_hat, anchor=z_hat, weights=(mu, mu))
        s = s / (1.0 + mu * eta_t) + eta_t
        mean += (eta_t / s) * (z_hat - mean)
        log_lam += math.log1p(mu * eta_t)
        if record is not None:
            record(t + 1, z)
    eps = _inv_expm1(log_lam)
    cert = InexactnessCertificate(alpha=1.0 + eps, eps=eps, delta=0.0)
    split = sub.dim_x
    return SolverOutput(
        ergodic=PrimalDualPoint(mean, split),
        last=PrimalDualPoint(z, split),
        sfo_calls=2 * T,
        certificate=cert,
    )


def sreg_schedule(L: float, mu: float):
    """(t0, eta) for the stochastic variant: t0 = 4*ceil(L/mu) and
    eta_t = 2/(mu*(t + t0 + 1)), which keeps L*eta_t <= 1/2."""
    t0 = 4 * math.ceil(L / mu)
    return t0, (lambda t: 2.0 / (mu * (t + t0 + 1)))


def sreg(
    sub,
    mu: float,
    z0,
    T: int,
    stream: OracleStream,
    record: Optional[Callable[[int, np.ndarray], None]] = None,
) -> SolverOutput:
    """Stochastic regularized extragradient with the decaying schedule.

    Two independent gradient samples per step.  The expected error obeys
    E||z_T - z*||^2 <= (6 t0^2/T^2)||z_0 - z*||^2 + 768 sigma^2/(mu^2 T).
    """
    if not mu > 0:
        raise ContractViolationError("regularization modulus mu must be > 0")
    if T < 1:
        raise RecipeViolationError("need T >= 1")
    L = sub.L
    t0, eta_of = sreg_schedule(L, mu)
    if eta_of(0) * L > 0.5 + 1e-12:
        raise RecipeViolationError("schedule violates L*eta_t <= 1/2")
    sigma = sub.sigma
    d = sub.dim
    z = as_point(z0, dim=d)
    mean = np.zeros(d)
    s = 0.0
    log_lam = 0.0
    q = 0.0  # running (sum eta_j^2*Lambda_j)/Lambda_t, for the noise term
    noise = stream.noise_block(2 * T, d, sigma)
    for t in range(T):
        eta_t = eta_of(t)
        g = sub.operator(z)
        if noise is not None:
            g = g + noise[2 * t]
        z_hat = _split_prox(sub, eta_t, z, g)
        g_hat = sub.operator(z_hat)
        if noise is not None:
            g_hat = g_hat + noise[2 * t + 1]
        z = _split_prox(sub, eta_t, z, g_hat, anchor=z_hat, weights=(mu, mu))
        grow = 1.0 + mu * eta_t
        s = s / grow + eta_t
        q = q / grow + eta_t * eta_t
        mean += (eta_t / s) * (z_hat - mean)
        log_lam += math.log1p(mu * eta_t)
        if record is not None:
            record(t + 1, z)
    eps = _inv_expm1(log_lam)
    # q*Lambda_{T-1}/(Lambda_T - 1), all in log domain
    tail = q * math.exp(-math.log1p(mu * eta_of(T - 1))) / (-math.expm1(-log_lam))
    delta = 8.0 * mu * sigma**2 * tail
    cert = InexactnessCertificate(alpha=1.0 + eps, eps=eps, delta=delta)
    split = sub.dim_x
    return SolverOutput(
        ergodic=PrimalDualPoint(mean, split),
        last=PrimalDualPoint(z, split),
        sfo_calls=2 * T,
        certificate=cert,
    )


def sreg_restarted(
    sub,
    mu: float,
    z0,
    eps_target: float,
    stream: OracleStream,
    r_sq: float,
    record: Optional[Callable[[int, np.ndarray], None]] = None,
) -> SolverOutput:
    """Multi-epoch stochastic extragradient with per-epoch error halving.

    ``r_sq`` is a caller-supplied overestimate of ||z_0 - z*||^2; the epoch
    budget T_e = 6 t0 + 768*2^(e+3) sigma^2/(mu^2 r_sq) halves the expected
    squared distance each epoch, so E = ceil(log2(r_sq/eps)) epochs reach
    the target.
    """
    if not eps_target > 0:
        raise ContractViolationError("target accuracy must be > 0")
    if not r_sq > 0:
        raise ContractViolationError("distance overestimate must be > 0")
    t0, _ = sreg_schedule(sub.L, mu)
    epochs = max(1, math.ceil(math.log2(r_sq / eps_target)))
    z = as_point(z0, dim=sub.dim)
    sigma = sub.sigma
    total = 0
    out = None
    for e in range(1, epochs + 1):
        budget = math.ceil(6 * t0 + 768.0 * 2.0 ** (e + 3) * sigma**2 / (mu**2 * r_sq))
        out = sreg(sub, mu, z, budget, stream)
        z = out.last.coords
        total += out.sfo_calls
        if record is not None:
            record(e, z)
    return SolverOutput(ergodic=out.ergodic, last=out.last, sfo_calls=total, certificate=out.certificate)


# ---------------------------------------------------------------------------
# Asymmetric-weight stochastic extragradient (minimax-catalyst inner method)
# ---------------------------------------------------------------------------


def asym_stepsize(T: int, mu_x: float, eta_bar: float, mu_bar_x: float, d_y: float, sigma: float) -> float:
    """Constant stepsize min(eta_bar, q*log(T)/(mu_x*T)); sigma=0 keeps eta_bar."""
    if sigma == 0.0:
        return eta_bar
    if T < 2:
        raise RecipeViolationError("stochastic runs need T >= 2")
    log_t = math.log(T)
    q = max(2.0 * (math.log(mu_bar_x**2 * d_y**2 / sigma**2) + log_t) / log_t, 1.0 / log_t)
    return min(eta_bar, q * log_t / (mu_x * T))


def asym_certificate(
    T: int, mu_x: float, eta: float, eta_bar: float, mu_bar_x: float, d_y: float, sigma: float
):
    """(eps, eps_prime, alpha, delta) certified by a T-step asymmetric run."""
    eps_prime = _inv_expm1(T * math.log1p(mu_x * eta))
    alpha = 1.0 + eps_prime
    eps = 4.0 * _inv_expm1(T * math.log1p(mu_x * eta_bar))
    if sigma == 0.0:
        delta = 0.0
    else:
        delta = (
            16.0
            * sigma**2
            * (math.log(mu_bar_x**2 * d_y**2 / sigma**2) + math.log(T) + 2.0)
            / (mu_x * T)
        )
    return eps, eps_prime, alpha, max(delta, 0.0)


def sreg_asym(
    sub: SaddleSubproblem,
    z0,
    T: int,
    eta_bar: float,
    stream: OracleStream,
    mu_bar_x: Optional[float] = None,
    mu_under_x: Optional[float] = None,
) -> SolverOutput:
    """Stochastic extragradient whose commit step anchors the primal and
    dual blocks with their own moduli (mu_x, mu_y).

    Requires 4*mu_x <= mu_y and eta_bar <= 1/(2L).  The certificate's
    eps' is at most 1 once T >= 1/(mu_under_x*eta_bar).
    """
    mu_x, mu_y = sub.mu_x, sub.mu_y
    if 4.0 * mu_x > mu_y * (1 + 1e-12):
        raise RecipeViolationError(f"need 4*mu_x <= mu_y, got mu_x={mu_x:.6g}, mu_y={mu_y:.6g}")
    if not mu_x > 0:
        raise ContractViolationError("primal modulus must be > 0")
    if T < 1:
        raise RecipeViolationError("need T >= 1")
    if eta_bar > 1.0 / (2.0 * sub.L) + 1e-15:
        raise RecipeViolationError("cap eta_bar must satisfy eta_bar <= 1/(2L)")
    if mu_bar_x is None:
        mu_bar_x = mu_x
    if mu_bar_x < mu_x - 1e-12:
        raise ContractViolationError("mu_bar_x must overestimate mu_x")
    sigma = sub.sigma
    if sigma > 0 and sub.d_y is None:
        raise ContractViolationError("stochastic runs need the dual diameter d_y")
    eta = asym_stepsize(T, mu_x, eta_bar, mu_bar_x, sub.d_y if sub.d_y else 0.0, sigma)
    d = sub.dim
    z = as_point(z0, dim=d)
    mean = np.zeros(d)
    s = 0.0
    noise = stream.noise_block(2 * T, d, sigma)
    grow = 1.0 + mu_x * eta
    # hot loop: hoist every lookup and inline the split prox arithmetic
    dx = sub.dim_x
    px, py = sub.set_x.project, sub.set_y.project
    base = sub.base
    base_op = base.operator_impl if getattr(base, "operator_impl", None) is not None else base.operator
    beta, center = sub.beta, sub.center
    den_x, den_y = 1.0 + eta * mu_x, 1.0 + eta * mu_y
    for t in range(T):
        g = base_op(z)
        if beta > 0.0:
            g[:dx] += beta * (z[:dx] - center)
        if noise is not None:
            g = g + noise[2 * t]
        z_hat = np.concatenate([px(z[:dx] - eta * g[:dx]), py(z[dx:] - eta * g[dx:])])
        g = base_op(z_hat)
        if beta > 0.0:
            g[:dx] += beta * (z_hat[:dx] - center)
        if noise is not None:
            g = g + noise[2 * t + 1]
        z = np.concatenate(
            [
                px((z[:dx] + eta * (mu_x * z_hat[:dx] - g[:dx])) / den_x),
                py((z[dx:] + eta * (mu_y * z_hat[dx:] - g[dx:])) / den_y),
            ]
        )
        s = s / grow + eta
        mean += (eta / s) * (z_hat - mean)
    eps, eps_prime, alpha, delta = asym_certificate(
        T, mu_x, eta, eta_bar, mu_bar_x, sub.d_y if sub.d_y else 0.0, sigma
    )
    cert = InexactnessCertificate(alpha=alpha, eps=eps, delta=delta, eps_prime=eps_prime)
    split = sub.dim_x
    return SolverOutput(
        ergodic=PrimalDualPoint(mean, split),
        last=PrimalDualPoint(z, split),
        sfo_calls=2 * T,
        certificate=cert,
    )
