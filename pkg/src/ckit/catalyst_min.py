"""Outer accelerated inexact proximal-point loop for convex minimization.

``catalyst_run`` wraps an inner method: each outer iteration solves the
anchored subproblem min f(x) + (beta_k/2)||x - x_hat_k||^2 from the prox
center and combines the returned (ergodic, last) pair through a momentum
update whose weight alpha_k comes from the inner solver's certificate.
``r_catalyst_run`` restarts the loop epoch by epoch for strongly convex
objectives, halving the optimality gap per epoch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import OracleStream, as_point
from .errors import ConfigurationError, RecipeViolationError
from .subsolvers import (
    InexactnessCertificate,
    ProxSubproblem,
    SolverOutput,
    sgd_certificate,
    sgd_prox,
)

__all__ = [
    "MinRecipe",
    "EpochPlan",
    "recipe_smooth",
    "recipe_strongly_convex",
    "check_min_recipe",
    "catalyst_run",
    "r_catalyst_run",
    "MinIterate",
]

SGD_OFFSET = 8  # t0 for every catalyzed subproblem: beta_k >= L makes 4*L_phi/mu_phi <= 8


@dataclass(frozen=True)
class EpochPlan:
    """Restart plan: per-epoch inner budget T_of(e) for e = 1..epochs."""

    epochs: int
    T_of: Callable[[int], int]


@dataclass(frozen=True)
class MinRecipe:
    """Parameter pack for one catalyst run (plus optional restart plan).

    ``gamma``/``beta`` are schedules over the outer index k >= 1; ``T_of``
    gives the inner step count; ``inner`` is "sgd" or "exact" (closed-form
    prox with a zero-error certificate, for ground-truth baselines).
    """

    K: int
    gamma: Callable[[int], float]
    beta: Callable[[int], float]
    T_of: Callable[[int], int]
    t0: int = SGD_OFFSET
    inner: str = "sgd"
    delta_target: float = 0.0
    epochs: Optional[EpochPlan] = None

    def planned_certificate(self, k: int, L: float, sigma: float):
        """(eps, alpha_k, delta) the inner solve at iteration k will certify."""
        beta_k = self.beta(k)
        if self.inner == "exact":
            return 0.0, beta_k, 0.0
        eps, alpha, delta = sgd_certificate(self.T_of(k), self.t0, beta_k, 2.0 * beta_k, sigma)
        return eps, alpha * beta_k, delta


@dataclass(frozen=True)
class MinIterate:
    """One outer-iteration record emitted by the run."""

    k: int
    x_tilde: np.ndarray
    x_bar: np.ndarray
    sfo_calls: int


def recipe_smooth(L: float, eps_target: float, sigma: float, d_sq: float) -> MinRecipe:
    """Schedule reaching E[f - f*] <= eps on a smooth convex problem.

    K = ceil(4*sqrt(L*d_sq/eps)); the inner budget grows with sigma^2 so
    the per-iteration noise floor stays below the eps/(4K) target.
    """
    if not (L > 0 and eps_target > 0 and d_sq > 0 and sigma >= 0):
        raise ConfigurationError("recipe_smooth needs positive L, eps, d_sq and sigma >= 0")
    K = max(1, math.ceil(4.0 * math.sqrt(L * d_sq / eps_target)))
    T = max(SGD_OFFSET, math.ceil(SGD_OFFSET + 32.0 * sigma**2 * K / (L * eps_target)))
    return MinRecipe(
        K=K,
        gamma=lambda k: 2.0 / (k + 1),
        beta=lambda k: (k + 1) * L / k,
        T_of=lambda k: T,
        delta_target=eps_target / (4.0 * K),
    )


def recipe_strongly_convex(
    L: float, mu: float, eps_target: float, sigma: float, delta0_hat: float
) -> MinRecipe:
    """Restarted schedule for mu-strongly-convex problems.

    ``delta0_hat`` overestimates the initial gap f(x0) - f*; the epoch
    count only grows logarithmically with the overestimation factor.
    """
    if not mu > 0:
        raise ConfigurationError("restarted recipe needs mu > 0; use recipe_smooth for mu = 0")
    if not (L >= mu and eps_target > 0 and delta0_hat > 0 and sigma >= 0):
        raise ConfigurationError("bad recipe parameters")
    K = max(1, math.ceil(6.0 * math.sqrt(L / mu)))
    epochs = max(1, math.ceil(math.log2(delta0_hat / eps_target)))

    def t_of_epoch(e: int) -> int:
        return max(
            SGD_OFFSET,
            math.ceil(SGD_OFFSET + 128.0 * sigma**2 * 2.0**e * K / (L * delta0_hat)),
        )

    return MinRecipe(
        K=K,
        gamma=lambda k: 2.0 / (k + 1),
        beta=lambda k: (k + 1) * L / k,
        T_of=lambda k: t_of_epoch(1),  # overridden per epoch by the restart loop
        epochs=EpochPlan(epochs=epochs, T_of=t_of_epoch),
    )


def check_min_recipe(recipe: MinRecipe, prob, T_of: Optional[Callable[[int], int]] = None) -> None:
    """Numeric self-check of the outer schedule before any oracle call.

    Verifies gamma_1 = 1, certified eps <= 1, and the momentum-budget
    chain (beta_k + eps_k)*gamma_k^2/Gamma_k <=
    [alpha_{k-1}*gamma_{k-1} + mu*(1-gamma_{k-1})]*gamma_{k-1}/Gamma_{k-1},
    which holds with equality for the canonical schedules.
    """
    T_of = T_of or recipe.T_of
    mu = prob.mu
    if abs(recipe.gamma(1) - 1.0) > 1e-12:
        raise RecipeViolationError("outer schedule must start with gamma_1 = 1")
    gam_prev = recipe.gamma(1)
    Gam_prev = 1.0
    eps0, alpha_prev, _ = _planned(recipe, 1, T_of, prob.sigma)
    if eps0 > 1.0 + 1e-12:
        raise RecipeViolationError(f"certified eps={eps0:.6g} exceeds 1 at k=1")
    for k in range(2, recipe.K + 1):
        gam = recipe.gamma(k)
        Gam = Gam_prev * (1.0 - gam)
        eps_rel, alpha_k, _ = _planned(recipe, k, T_of, prob.sigma)
        if eps_rel > 1.0 + 1e-12:
            raise RecipeViolationError(f"certified eps={eps_rel:.6g} exceeds 1 at k={k}")
        beta_k = recipe.beta(k)
        lhs = (beta_k + beta_k * eps_rel) * gam * gam / Gam
        rhs = (alpha_prev * gam_prev + mu * (1.0 - gam_prev)) * gam_prev / Gam_prev
        if lhs > rhs * (1.0 + 1e-9) + 1e-12:
            raise RecipeViolationError(
                f"momentum-budget chain fails at k={k}: {lhs:.12g} > {rhs:.12g}"
            )
        gam_prev, Gam_prev, alpha_prev = gam, Gam, alpha_k
    if recipe.epochs is not None:
        for e in range(1, recipe.epochs.epochs + 1):
            if recipe.epochs.T_of(e) < recipe.t0:
                raise RecipeViolationError(f"epoch {e} inner budget below t0")


def _planned(recipe: MinRecipe, k: int, T_of, sigma: float):
    beta_k = recipe.beta(k)
    if recipe.inner == "exact":
        return 0.0, beta_k, 0.0
    eps, alpha, delta = sgd_certificate(T_of(k), recipe.t0, beta_k, 2.0 * beta_k, sigma)
    return eps, alpha * beta_k, delta


def catalyst_run(
    prob,
    recipe: MinRecipe,
    stream: Optional[OracleStream],
    x0,
    exact_prox_fn: Optional[Callable[[np.ndarray, float], np.ndarray]] = None,
    T_of: Optional[Callable[[int], int]] = None,
    skip_check: bool = False,
):
    """One catalyst pass of K outer iterations from x0.

    Returns (x_tilde_K, records).  The momentum update uses the problem's
    declared mu; inner subproblems are built over a mu=0 view so their
    certificates carry alpha = beta_k/(1 - Lambda_T) exactly.
    """
    T_of = T_of or recipe.T_of
    if not skip_check:
        check_min_recipe(recipe, prob, T_of)
    if recipe.inner == "exact" and exact_prox_fn is None:
        raise ConfigurationError("exact-prox mode needs a closed-form prox oracle")
    mu = prob.mu
    base = prob.with_mu(0.0)
    x_bar = as_point(x0, dim=prob.dim)
    x_tilde = x_bar
    sfo = 0
    records = []
    for k in range(1, recipe.K + 1):
        gam = recipe.gamma(k)
        beta_k = recipe.beta(k)
        x_hat = gam * x_bar + (1.0 - gam) * x_tilde
        if recipe.inner == "exact":
            u = exact_prox_fn(x_hat, beta_k)
            out = SolverOutput(
                ergodic=u, last=u, sfo_calls=0,
                certificate=InexactnessCertificate(alpha=1.0, eps=0.0, delta=0.0),
            )
            alpha_k = beta_k
        else:
            sub = ProxSubproblem(base, beta_k, x_hat)
            out = sgd_prox(sub, T_of(k), recipe.t0, stream)
            alpha_k = out.certificate.alpha * beta_k
        x_k = out.last
        x_tilde_prev = x_tilde
        x_tilde = out.ergodic
        denom = alpha_k * gam + mu * (1.0 - gam)
        x_bar = (alpha_k * x_k + (mu - alpha_k) * (1.0 - gam) * x_tilde_prev) / denom
        sfo += out.sfo_calls
        records.append(MinIterate(k=k, x_tilde=x_tilde, x_bar=x_bar, sfo_calls=sfo))
    return x_tilde, records


def r_catalyst_run(prob, recipe: MinRecipe, stream: Optional[OracleStream], x0):
    """Epoch-restarted catalyst for strongly convex problems.

    Each epoch reruns the catalyst from the previous output with its own
    inner budget; returns (x_final, per-epoch records with cumulative
    oracle counts).
    """
    if not prob.mu > 0:
        raise ConfigurationError("restarted catalyst needs mu > 0; use catalyst_run instead")
    if recipe.epochs is None:
        raise ConfigurationError("recipe carries no epoch plan")
    check_min_recipe(recipe, prob, lambda k: recipe.epochs.T_of(1))
    x = as_point(x0, dim=prob.dim)
    sfo = 0
    records = []
    for e in range(1, recipe.epochs.epochs + 1):
        budget = recipe.epochs.T_of(e)
        x, inner = catalyst_run(
            prob, recipe, stream, x, T_of=lambda k: budget, skip_check=True
        )
        sfo += inner[-1].sfo_calls
        records.append(MinIterate(k=e, x_tilde=x, x_bar=inner[-1].x_bar, sfo_calls=sfo))
    return x, records
