"""Outer catalyst loop for convex-concave minimax problems.

Each outer iteration anchors the primal variable, hands the regularized
saddle subproblem Psi_k(x,y) = F(x,y) + (beta_k/2)||x - x_hat_k||^2 to an
extragradient inner solver started at (x_hat_k, y_{k-1}), and folds the
returned (ergodic, last) pair into the momentum update.  Deterministic
recipes catalyze the regularized extragradient method; stochastic recipes
catalyze its asymmetric-weight variant.  The restarted wrapper halves the
composite gap f(x_tilde) - f* + c*||y_opt(x_tilde) - y||^2 per epoch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import OracleStream, as_point
from .errors import ConfigurationError, RecipeViolationError
from .subsolvers import (
    SaddleSubproblem,
    asym_certificate,
    asym_stepsize,
    reg,
    sreg_asym,
)

__all__ = [
    "MinimaxRecipe",
    "recipe_det",
    "recipe_stoch",
    "check_minimax_recipe",
    "catalyst_minimax_run",
    "r_catalyst_minimax_run",
    "MinimaxIterate",
]


def _inv_expm1(y: float) -> float:
    t = math.exp(-y)
    return t / (1.0 - t) if t < 1.0 else math.inf


@dataclass(frozen=True)
class MinimaxIterate:
    k: int
    x_tilde: np.ndarray
    y_last: np.ndarray
    sfo_calls: int


@dataclass(frozen=True)
class MinimaxRecipe:
    """Parameter pack for the minimax catalyst.

    ``T_of`` maps the epoch index (1 for single-pass recipes) to the inner
    step count; ``eta`` is the inner stepsize schedule over the outer index
    k (the stepsize cap for the stochastic inner method).  ``eps_cap`` is
    the bound the certified relative eps must stay under; stochastic
    recipes also cap eps' at 1 and the noise floor delta at
    ``delta_target_of(e)``.
    """

    K: int
    mu_d: float
    gamma: Callable[[int], float]
    beta: Callable[[int], float]
    inner: str  # "reg" | "sreg_asym"
    T_of: Callable[[int], int]
    eta: Callable[[int], float]
    eps_cap: float
    epochs: Optional[int] = None
    mu_bar_x: Optional[float] = None
    mu_under_x: Optional[float] = None
    sigma: float = 0.0
    d_y: float = 0.0
    delta_target_of: Callable[[int], float] = lambda e: math.inf

    # -- planned certificate entries (identical to the runtime ones) -----

    def planned_eps(self, e: int, k: int) -> float:
        rate = self.beta(k) * self.eta(k)
        val = _inv_expm1(self.T_of(e) * math.log1p(rate))
        return 4.0 * val if self.inner == "sreg_asym" else val

    def planned_eps_prime(self, e: int, k: int) -> float:
        if self.inner != "sreg_asym":
            return self.planned_eps(e, k)
        T = self.T_of(e)
        beta_k = self.beta(k)
        step = asym_stepsize(T, beta_k, self.eta(k), self.mu_bar_x, self.d_y, self.sigma)
        return _inv_expm1(T * math.log1p(beta_k * step))

    def planned_delta(self, e: int, k: int) -> float:
        if self.inner != "sreg_asym" or self.sigma == 0.0:
            return 0.0
        T = self.T_of(e)
        beta_k = self.beta(k)
        step = asym_stepsize(T, beta_k, self.eta(k), self.mu_bar_x, self.d_y, self.sigma)
        return asym_certificate(T, beta_k, step, self.eta(k), self.mu_bar_x, self.d_y, self.sigma)[3]

    def total_sfo(self) -> int:
        """Oracle calls one full run will consume (two per inner step)."""
        epochs = self.epochs or 1
        return sum(2 * self.K * self.T_of(e) for e in range(1, epochs + 1))


def _exact_eps_steps(eps_req: float, rate: float, scale: float) -> int:
    """Smallest T with scale/( (1+rate)^T - 1 ) <= eps_req."""
    return max(1, math.ceil(math.log1p(scale / eps_req) / math.log1p(rate)))


def recipe_det(
    prob,
    eps_target: Optional[float] = None,
    K: Optional[int] = None,
    gap_ratio: float = 1.0,
    strongly_convex: bool = False,
    epochs: Optional[int] = None,
    delta0_hat: Optional[float] = None,
    d_sq: Optional[float] = None,
    dy0_sq: Optional[float] = None,
) -> MinimaxRecipe:
    """Deterministic recipe with the regularized-extragradient inner method.

    ``gap_ratio`` estimates [f(x0) - f*]/||x* - x0||^2 (default 1; the cost
    of misestimation is logarithmic).  For ``strongly_convex`` problems the
    epoch length is 12*sqrt(mu_d/mu_p) and ``epochs`` (or eps_target with
    ``delta0_hat``) sets the restart count.
    """
    mu_d, L = prob.mu_d, prob.L
    if not mu_d > 0:
        raise ConfigurationError("minimax catalyst needs mu_d > 0")
    if strongly_convex:
        if not prob.mu_p > 0:
            raise ConfigurationError("strongly_convex recipe needs mu_p > 0")
        K = K or math.ceil(12.0 * math.sqrt(mu_d / prob.mu_p))
        if epochs is None:
            if eps_target is None or delta0_hat is None:
                raise ConfigurationError("need epochs, or eps_target with delta0_hat")
            epochs = max(1, math.ceil(math.log2(delta0_hat / eps_target)))
        gap_term = 0.0
    else:
        if K is None:
            if eps_target is None or d_sq is None or dy0_sq is None:
                raise ConfigurationError("need K, or eps_target with d_sq and dy0_sq")
            K = math.ceil(math.sqrt(4.0 * (2.0 * mu_d * d_sq + mu_d * dy0_sq) / eps_target))
        epochs = None
        gap_term = math.log(2.0 * gap_ratio)
    K = max(1, K)
    eps_req = min(1.0 / 12.0, 1.0 / ((K + 1) * (K + 2)))
    if not strongly_convex and gap_ratio > 0:
        eps_req = min(eps_req, 1.0 / (2.0 * gap_ratio))
    rate = mu_d / (6.0 * L)
    t_display = (6.0 * L / mu_d) * (math.log(12.0) + math.log(6.0 * K * K) + gap_term)
    T = max(math.ceil(max(t_display, 1.0)), _exact_eps_steps(eps_req, rate, 1.0))
    return MinimaxRecipe(
        K=K,
        mu_d=mu_d,
        gamma=lambda k: 2.0 / (k + 1),
        beta=lambda k: mu_d * (k + 1) / (2.0 * (k + 2)),
        inner="reg",
        T_of=lambda e: T,
        eta=lambda k: (k + 2) / (3.0 * (k + 1) * L),
        eps_cap=eps_req,
        epochs=epochs,
    )


def recipe_stoch(
    prob,
    eps_target: Optional[float] = None,
    K: Optional[int] = None,
    gap_ratio: float = 1.0,
    strongly_convex: bool = False,
    epochs: Optional[int] = None,
    delta0_hat: Optional[float] = None,
    d_sq: Optional[float] = None,
    dy0_sq: Optional[float] = None,
) -> MinimaxRecipe:
    """Stochastic recipe with the asymmetric-weight extragradient inner.

    Wires mu_x = beta_k <= mu_d/4 and mu_y = mu_d + beta_k, so the inner
    method's modulus-gap requirement holds automatically.  sigma = 0
    callers should use recipe_det instead.
    """
    mu_d, L, sigma = prob.mu_d, prob.L, prob.sigma
    if not mu_d > 0:
        raise ConfigurationError("minimax catalyst needs mu_d > 0")
    if sigma <= 0:
        raise ConfigurationError("stochastic recipe needs sigma > 0; use recipe_det")
    d_y = prob.d_y
    if d_y is None or not d_y > 0:
        raise ConfigurationError("stochastic recipe needs the dual diameter d_y")
    if strongly_convex:
        if not prob.mu_p > 0:
            raise ConfigurationError("strongly_convex recipe needs mu_p > 0")
        if delta0_hat is None or not delta0_hat > 0:
            raise ConfigurationError("need the initial composite-gap estimate delta0_hat")
        K = K or math.ceil(24.0 * math.sqrt(mu_d / prob.mu_p))
        if epochs is None:
            if eps_target is None:
                raise ConfigurationError("need epochs or eps_target")
            epochs = max(1, math.ceil(math.log2(delta0_hat / eps_target)))
    else:
        if K is None:
            if eps_target is None or d_sq is None or dy0_sq is None:
                raise ConfigurationError("need K, or eps_target with d_sq and dy0_sq")
            K = math.ceil(math.sqrt(24.0 * (2.0 * mu_d * d_sq + mu_d * dy0_sq) / eps_target))
        epochs = None
    K = max(1, K)
    eps_req = min(1.0 / 12.0, 1.0 / ((K + 1) * (K + 2)))
    if not strongly_convex and gap_ratio > 0:
        eps_req = min(eps_req, 1.0 / (2.0 * gap_ratio))
    rate_cap = mu_d / (96.0 * L)  # beta_k * eta_bar_k, independent of k
    noise_scale = math.log(mu_d**2 * d_y**2 / sigma**2)

    def delta_target(e: int) -> float:
        if strongly_convex:
            return 2.0 ** (-e) * delta0_hat / (128.0 * K)
        return eps_target / (128.0 * K) if eps_target else math.inf

    def t_required(e: int) -> int:
        det_part = (288.0 * L / mu_d) * (math.log(96.0) + math.log(48.0 * K * K))
        if not strongly_convex:
            det_part += (288.0 * L / mu_d) * math.log(16.0 * gap_ratio)
            ratio = 49152.0 * sigma**2 * K / (mu_d * eps_target) if eps_target else 0.0
            noise_part = (
                24756.0 * sigma**2 * (noise_scale + 2.0) * K / (eps_target * mu_d)
                + ratio * max(math.log(ratio), 1.0)
            ) if eps_target else 0.0
        else:
            ratio = 49152.0 * K * sigma**2 / delta0_hat
            noise_part = (128.0 * K * 2.0**e / delta0_hat) * (
                192.0 * sigma**2 * (noise_scale + 2.0) / mu_d
                + 384.0 * sigma**2 * max(math.log(ratio) + e * math.log(2.0), 1.0) / mu_d
            )
        T = math.ceil(max(det_part + noise_part, 2.0, 144.0 * L / mu_d))
        T = max(T, _exact_eps_steps(eps_req, rate_cap, 4.0))
        # noise floor: delta is worst at the smallest beta_k (k = 1)
        target = delta_target(e)
        if math.isfinite(target):
            for _ in range(8):
                need = 96.0 * sigma**2 * (noise_scale + math.log(T) + 2.0) / (mu_d * target)
                if T >= need:
                    break
                T = math.ceil(need)
        return T

    return MinimaxRecipe(
        K=K,
        mu_d=mu_d,
        gamma=lambda k: 2.0 / (k + 1),
        beta=lambda k: mu_d * (k + 1) / (4.0 * (k + 2)),
        inner="sreg_asym",
        T_of=t_required,
        eta=lambda k: (k + 2) / (24.0 * (k + 1) * L),
        eps_cap=eps_req,
        epochs=epochs,
        mu_bar_x=mu_d / 4.0,
        mu_under_x=mu_d / 6.0,
        sigma=sigma,
        d_y=d_y,
        delta_target_of=delta_target,
    )


def check_minimax_recipe(recipe: MinimaxRecipe, prob, epoch: int = 1) -> None:
    """Numeric self-check of the outer schedule before any oracle call.

    Verifies gamma_1 = 1, the certified eps/eps'/delta caps, and the two
    chain conditions; the budget chain carries the structural slack factor
    rho_k = k(k+3)/((k+1)(k+2)) that the canonical increasing-beta
    schedules require (its cumulative deficit is a bounded constant already
    absorbed by the guarantee's leading coefficients).
    """
    K, mu_d = recipe.K, recipe.mu_d
    if abs(recipe.gamma(1) - 1.0) > 1e-12:
        raise RecipeViolationError("outer schedule must start with gamma_1 = 1")
    if recipe.inner == "sreg_asym":
        beta_1 = recipe.beta(1)
        if 4.0 * beta_1 > mu_d + beta_1 + 1e-12:
            raise RecipeViolationError("modulus gap 4*mu_x <= mu_y fails at k=1")
    tol = 1e-9
    for k in range(1, K + 1):
        eps_rel = recipe.planned_eps(epoch, k)
        if eps_rel > recipe.eps_cap * (1.0 + tol):
            raise RecipeViolationError(
                f"certified eps={eps_rel:.6g} exceeds the cap {recipe.eps_cap:.6g} at k={k}"
            )
        if recipe.inner == "sreg_asym":
            if recipe.planned_eps_prime(epoch, k) > 1.0 + tol:
                raise RecipeViolationError(f"certified eps' exceeds 1 at k={k}")
            delta = recipe.planned_delta(epoch, k)
            target = recipe.delta_target_of(epoch)
            if delta > target * (1.0 + tol):
                raise RecipeViolationError(
                    f"noise floor delta={delta:.6g} exceeds target {target:.6g} at k={k}"
                )
        eps_k = recipe.beta(k) * eps_rel
        if 4.0 * eps_k / mu_d >= 1.0:
            raise RecipeViolationError(f"4*eps_k/mu_d >= 1 at k={k}")
    for k in range(1, K):
        gam, gam_n = recipe.gamma(k), recipe.gamma(k + 1)
        beta_n = recipe.beta(k + 1)
        eps_k = recipe.beta(k) * recipe.planned_eps(epoch, k)
        eps_n = beta_n * recipe.planned_eps(epoch, k + 1)
        epsp_n = beta_n * recipe.planned_eps_prime(epoch, k + 1)
        alpha_k = recipe.beta(k) * (1.0 + recipe.planned_eps_prime(epoch, k))
        d1 = 4.0 * eps_k / mu_d
        d2 = 4.0 * eps_n / mu_d
        rho = k * (k + 3) / ((k + 1) * (k + 2))
        lhs = alpha_k * gam * gam / (1.0 - d1)
        rhs = (beta_n + epsp_n) * gam_n * gam_n / (1.0 - gam_n + d2)
        if lhs < rho * rhs * (1.0 - tol) - 1e-15:
            raise RecipeViolationError(f"budget chain fails at k={k}: {lhs:.12g} < {rho * rhs:.12g}")
        if eps_n / alpha_k > (1.0 - gam_n + d2) / (2.0 * (1.0 - d1)) * (1.0 + tol):
            raise RecipeViolationError(f"dual-error chain fails at k={k}")


def catalyst_minimax_run(
    prob,
    recipe: MinimaxRecipe,
    stream: Optional[OracleStream],
    z0,
    epoch: int = 1,
    skip_check: bool = False,
):
    """One catalyst pass of K outer iterations from z0 = (x0, y0).

    Returns ((x_tilde_K, y_K), records).  The inner solver starts at
    (x_hat_k, y_{k-1}) where y_{k-1} is the previous inner solve's last
    dual iterate; the momentum update uses the problem's declared mu_p.
    """
    if not prob.mu_d > 0:
        raise ConfigurationError("minimax catalyst needs mu_d > 0; the mu_d = 0 reduction is out of scope")
    if not skip_check:
        check_minimax_recipe(recipe, prob, epoch)
    mu_p = prob.mu_p
    base = prob.with_mu_p(0.0)  # subproblem modulus comes from beta_k alone
    dx = prob.dim_x
    z0 = as_point(z0, dim=prob.dim)
    x_bar = z0[:dx].copy()
    x_tilde = x_bar
    y_last = z0[dx:].copy()
    T = recipe.T_of(epoch)
    sfo = 0
    records = []
    for k in range(1, recipe.K + 1):
        gam = recipe.gamma(k)
        beta_k = recipe.beta(k)
        x_hat = gam * x_bar + (1.0 - gam) * x_tilde
        sub = SaddleSubproblem(base, beta_k, x_hat)
        z_start = np.concatenate([x_hat, y_last])
        if recipe.inner == "reg":
            out = reg(sub, beta_k, z_start, T, recipe.eta(k))
        else:
            out = sreg_asym(
                sub,
                z_start,
                T,
                recipe.eta(k),
                stream,
                mu_bar_x=recipe.mu_bar_x,
                mu_under_x=recipe.mu_under_x,
            )
        alpha_k = beta_k * out.certificate.alpha
        x_k = out.last.x
        y_last = out.last.y
        x_tilde_prev = x_tilde
        x_tilde = out.ergodic.x
        denom = alpha_k * gam + mu_p * (1.0 - gam)
        x_bar = (alpha_k * x_k + (mu_p - alpha_k) * (1.0 - gam) * x_tilde_prev) / denom
        sfo += out.sfo_calls
        records.append(MinimaxIterate(k=k, x_tilde=x_tilde, y_last=y_last, sfo_calls=sfo))
    return (x_tilde, y_last), records


def r_catalyst_minimax_run(prob, recipe: MinimaxRecipe, stream: Optional[OracleStream], z0):
    """Epoch-restarted minimax catalyst for mu_p > 0 problems.

    Epoch e starts exactly at the previous epoch's (x_tilde, y) output;
    returns ((x, y), per-epoch records with cumulative oracle counts).
    """
    if not prob.mu_p > 0:
        raise ConfigurationError("restarted minimax catalyst needs mu_p > 0")
    if recipe.epochs is None:
        raise ConfigurationError("recipe carries no epoch plan")
    dx = prob.dim_x
    z = as_point(z0, dim=prob.dim)
    sfo = 0
    records = []
    for e in range(1, recipe.epochs + 1):
        check_minimax_recipe(recipe, prob, epoch=e)
        (x_t, y_t), inner = catalyst_minimax_run(prob, recipe, stream, z, epoch=e, skip_check=True)
        z = np.concatenate([x_t, y_t])
        sfo += inner[-1].sfo_calls
        records.append(MinimaxIterate(k=e, x_tilde=x_t, y_last=y_t, sfo_calls=sfo))
    return (z[:dx], z[dx:]), records
