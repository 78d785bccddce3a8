import math

import numpy as np
import pytest

from ckit.core import Ball, OracleStream, SaddleObjective, SmoothObjective
from ckit.errors import ContractViolationError, RecipeViolationError
from ckit.subsolvers import (
    InexactnessCertificate,
    ProxSubproblem,
    SaddleSubproblem,
    asym_certificate,
    reg,
    sgd_certificate,
    sgd_lambda,
    sgd_prox,
    sreg,
    sreg_asym,
    sreg_restarted,
    sreg_schedule,
)
from ckit.testbed import gen_quadratic, gen_saddle


def square_subproblem(beta=2.0, center=1.0, sigma=0.0):
    # f(u) = u^2 declared as L=2, mu=0: mu_phi = beta, L_phi = 2 + beta
    base = SmoothObjective(
        value=lambda u: float(u[0] ** 2),
        grad=lambda u: 2.0 * u,
        L=2.0,
        mu=0.0,
        set=Ball([0.0], 10.0),
        sigma=sigma,
    )
    return ProxSubproblem(base, beta, [center])


def toy_saddle(mu=1.0, radius=10.0, sigma=0.0):
    # F(x,y) = x^2/2 + xy - y^2/2; operator Lipschitz constant sqrt(2)*mu-ish
    L = math.sqrt(mu * mu + 1.0)
    return SaddleObjective(
        value=lambda x, y: 0.5 * mu * float(x @ x) + float(x @ y) - 0.5 * mu * float(y @ y),
        grad_x=lambda x, y: mu * x + y,
        grad_y=lambda x, y: x - mu * y,
        L=L,
        mu_p=mu,
        mu_d=mu,
        set_x=Ball([0.0], radius),
        set_y=Ball([0.0], radius),
        sigma=sigma,
    )


# ---------------------------------------------------------------------------
# sgd_prox
# ---------------------------------------------------------------------------


def test_sgd_prox_reaches_closed_form_minimizer():
    sub = square_subproblem()  # minimizer beta*c/(2+beta) = 0.5
    out = sgd_prox(sub, T=500, t0=8, stream=OracleStream(0))
    assert abs(out.last[0] - 0.5) <= 1e-3
    assert out.sfo_calls == 500


def test_sgd_ergodic_weights_telescope_to_one():
    for T, t0 in [(8, 8), (100, 8), (37, 12), (1000, 40)]:
        lam_T = sgd_lambda(T, t0)
        total = sum(
            (2.0 / (t + t0 + 2)) / sgd_lambda(t, t0) for t in range(1, T + 1)
        )  # eta_t*mu_phi/Lambda_t
        assert abs(lam_T / (1 - lam_T) * total - 1.0) <= 1e-12


def test_sgd_lambda_closed_form_vs_recursion():
    for t0 in (8, 20):
        lam = 1.0
        for t in range(1, 10_001):
            lam *= 1.0 - 2.0 / (t + t0 + 2)
            closed = sgd_lambda(t, t0)
            assert abs(lam - closed) <= 1e-10 * closed


def test_sgd_lambda_pinned_values():
    assert sgd_lambda(8, 8) == pytest.approx(5.0 / 17.0, rel=1e-15)
    for T in (8, 100, 1000):
        assert sgd_lambda(T, 8) == pytest.approx(90.0 / ((T + 9) * (T + 10)), rel=1e-15)


def test_sgd_certificate_bounds_and_consistency():
    sub = square_subproblem(sigma=0.5)
    for T in (100, 1000):
        eps, alpha, delta = sgd_certificate(T, 8, sub.mu_phi, sub.L_phi, sub.sigma)
        assert eps <= 1.0
        assert delta <= 32 * sub.sigma**2 / (sub.mu_phi * T)
        assert alpha == pytest.approx(1.0 + eps, rel=1e-12)


def test_sgd_prox_certificate_inequality_on_quadratic():
    inst = gen_quadratic(4, 10.0, 0.0, seed=3)
    beta = inst.L
    rng = np.random.default_rng(0)
    center = inst.feasible_set().project(rng.standard_normal(4))
    sub = ProxSubproblem(inst.objective(sigma=0.5), beta, center)
    u_star = inst.exact_prox(center, beta)
    refs = [u_star] + [inst.feasible_set().project(rng.standard_normal(4) * 2) for _ in range(3)]
    T, t0 = 100, 8
    eps, alpha, delta = sgd_certificate(T, t0, sub.mu_phi, sub.L_phi, sub.sigma)
    n_seeds = 120
    lhs = {i: 0.0 for i in range(len(refs))}
    for s in range(n_seeds):
        out = sgd_prox(sub, T=T, t0=t0, stream=OracleStream.for_run(10, s))
        for i, u in enumerate(refs):
            d = u - out.last
            lhs[i] += sub.value(out.ergodic) - sub.value(u) + 0.5 * alpha * sub.mu_phi * float(d @ d)
    for i, u in enumerate(refs):
        du = u - center
        rhs = 0.5 * eps * sub.mu_phi * float(du @ du) + delta
        assert lhs[i] / n_seeds <= 1.2 * rhs


def test_sgd_prox_long_run_matches_closed_form_prox():
    inst = gen_quadratic(6, 12.0, 0.0, seed=14)
    beta = inst.L / 2
    center = inst.x_star * 0.25
    subp = ProxSubproblem(inst.objective(), beta, center)
    t0 = 12  # 4*L_phi/mu_phi = 4*(12+6)/6
    out = sgd_prox(subp, T=1000, t0=t0, stream=OracleStream(0))
    ref = inst.exact_prox(center, beta)
    assert np.linalg.norm(out.last - ref) <= 1e-4


def test_sgd_prox_rejects_bad_schedule():
    sub = square_subproblem()
    with pytest.raises(RecipeViolationError):
        sgd_prox(sub, T=4, t0=8, stream=OracleStream(0))  # T < t0
    with pytest.raises(RecipeViolationError):
        sgd_prox(sub, T=100, t0=4, stream=OracleStream(0))  # t0 < 4*L_phi/mu_phi


def test_sgd_prox_deterministic_and_feasible():
    sub = square_subproblem(sigma=1.0)
    a = sgd_prox(sub, T=64, t0=8, stream=OracleStream(5))
    b = sgd_prox(sub, T=64, t0=8, stream=OracleStream(5))
    assert np.array_equal(a.last, b.last) and np.array_equal(a.ergodic, b.ergodic)
    assert sub.set.contains(a.last) and sub.set.contains(a.ergodic)


# ---------------------------------------------------------------------------
# reg
# ---------------------------------------------------------------------------


def oracle_reg_2d(z0, mu, eta, T):
    """Independent recursion for the 2-d toy saddle: both prox steps are
    interior, so they reduce to the stationarity equations solved directly."""
    def G(z):
        x, y = z
        return np.array([mu * x + y, mu * y - x])

    traj = []
    z = np.array(z0, dtype=float)
    for _ in range(T):
        z_hat = z - eta * G(z)
        z = (z + eta * (mu * z_hat - G(z_hat))) / (1.0 + eta * mu)
        traj.append(z.copy())
    return traj


def test_reg_fixed_point_at_saddle():
    prob = toy_saddle()
    out = reg(prob, mu=1.0, z0=[0.0, 0.0], T=20, eta=1.0 / prob.L)
    np.testing.assert_allclose(out.last.coords, [0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(out.ergodic.coords, [0.0, 0.0], atol=1e-15)


def test_reg_single_step_hand_value():
    prob = toy_saddle()
    steps = []
    reg(prob, mu=1.0, z0=[1.0, 1.0], T=1, eta=1.0 / math.sqrt(2.0), record=lambda t, z: steps.append(z.copy()))
    np.testing.assert_allclose(steps[0], [0.17157287525381, 0.41421356237309], atol=1e-11)


def test_reg_matches_independent_recursion_and_bound():
    prob = toy_saddle()
    mu, L = 1.0, prob.L
    z0 = [1.0, 1.0]
    traj = []
    reg(prob, mu=mu, z0=z0, T=50, eta=1.0 / L, record=lambda t, z: traj.append(z.copy()))
    oracle = oracle_reg_2d(z0, mu, 1.0 / L, 50)
    d0 = 2.0
    for t in range(50):
        np.testing.assert_allclose(traj[t], oracle[t], atol=1e-12)
        dist = float(traj[t] @ traj[t])
        assert dist <= (1.0 + mu / L) ** (-(t + 1)) * d0 * (1 + 1e-12)


def test_reg_contraction_on_generated_instances():
    for d, ratio, seed in [(2, 10.0, 0), (5, 100.0, 1)]:
        inst = gen_saddle(d, d, ratio, 1.0, 1.0, seed)
        prob = inst.objective()
        dists = []
        reg(
            prob,
            mu=1.0,
            z0=np.zeros(2 * d),
            T=100,
            eta=1.0 / inst.L,
            record=lambda t, z: dists.append(float((z - inst.z_star) @ (z - inst.z_star))),
        )
        d0 = float(inst.z_star @ inst.z_star)
        for t, dist in enumerate(dists, start=1):
            assert dist <= (1.0 + 1.0 / inst.L) ** (-t) * d0


def test_reg_rejects_large_steps():
    prob = toy_saddle()
    with pytest.raises(RecipeViolationError):
        reg(prob, mu=1.0, z0=[1.0, 1.0], T=5, eta=2.0 / prob.L)


# ---------------------------------------------------------------------------
# sreg
# ---------------------------------------------------------------------------


def test_sreg_zero_noise_matches_reg_same_schedule():
    prob = toy_saddle()
    mu = 1.0
    t0, eta_of = sreg_schedule(prob.L, mu)
    traj_s = []
    traj_r = []
    sreg(prob, mu, [1.0, 1.0], 40, OracleStream(0), record=lambda t, z: traj_s.append(z.copy()))
    reg(prob, mu, [1.0, 1.0], 40, eta_of, record=lambda t, z: traj_r.append(z.copy()))
    for a, b in zip(traj_s, traj_r):
        np.testing.assert_array_equal(a, b)


def test_sreg_zero_noise_deterministic_bound():
    inst = gen_saddle(3, 3, 10.0, 1.0, 1.0, seed=2)
    prob = inst.objective()
    mu = 1.0
    t0, _ = sreg_schedule(prob.L, mu)
    z0 = np.zeros(6)
    d0 = float(inst.z_star @ inst.z_star)
    out = sreg(prob, mu, z0, 4 * t0, OracleStream(0))
    err = float((out.last.coords - inst.z_star) @ (out.last.coords - inst.z_star))
    assert err <= (6.0 / 16.0) * d0
    assert out.sfo_calls == 2 * 4 * t0


def test_sreg_lambda_closed_form():
    mu = 1.0
    t0, eta_of = sreg_schedule(5.0, mu)
    lam = 1.0
    for t in range(1, 10_001):
        lam *= 1.0 + mu * eta_of(t - 1)
        closed = (t + t0 + 1) * (t + t0 + 2) / ((t0 + 1) * (t0 + 2))
        assert abs(lam - closed) <= 1e-10 * closed


def test_sreg_restarted_halving_and_budget():
    inst = gen_saddle(2, 2, 10.0, 1.0, 1.0, seed=4)
    prob = inst.objective()  # sigma = 0
    z0 = np.zeros(4)
    r_sq = float(inst.z_star @ inst.z_star)
    marks = []
    out = sreg_restarted(
        prob, 1.0, z0, eps_target=r_sq * 2.0**-10, stream=OracleStream(0), r_sq=r_sq,
        record=lambda e, z: marks.append((e, float((z - inst.z_star) @ (z - inst.z_star)))),
    )
    assert len(marks) == 10  # E = log2(r_sq/eps) = 10
    for e, dist in marks:
        assert dist <= 2.0**-e * r_sq
    t0, _ = sreg_schedule(prob.L, 1.0)
    assert out.sfo_calls == 2 * 10 * (6 * t0)  # sigma = 0 keeps every epoch at 6*t0


def test_sreg_restarted_sample_complexity_order():
    inst = gen_saddle(2, 2, 8.0, 1.0, 1.0, seed=6)
    prob = inst.objective(sigma=1.0)
    mu = 1.0
    r_sq = max(1.0, float(inst.z_star @ inst.z_star))
    eps = r_sq / 2**6
    out = sreg_restarted(prob, mu, np.zeros(4), eps, OracleStream(1), r_sq)
    t0, _ = sreg_schedule(prob.L, mu)
    epochs = math.ceil(math.log2(r_sq / eps))
    budget = 3e4 * (t0 * epochs + prob.sigma**2 / (mu**2 * eps))
    assert out.sfo_calls <= budget


# ---------------------------------------------------------------------------
# sreg_asym
# ---------------------------------------------------------------------------


def test_equal_anchor_weights_merge_into_joint_prox():
    # with w_x == w_y the split commit step equals the single-anchor prox
    # over the product set, which is exactly the symmetric update
    from ckit.core import prox_step
    from ckit.subsolvers import _split_prox

    prob = toy_saddle()
    rng = np.random.default_rng(0)
    for _ in range(25):
        z = rng.standard_normal(2) * 3
        g = rng.standard_normal(2)
        anchor = rng.standard_normal(2)
        w = 0.3 + rng.random()
        eta = 0.05 + 0.3 * rng.random()
        split = _split_prox(prob, eta, z, g, anchor=anchor, weights=(w, w))
        joint = prox_step(prob.set_z, eta, z, g, anchors=[(w, anchor)])
        np.testing.assert_allclose(split, joint, atol=1e-14)


def test_sreg_asym_matches_independent_recursion_at_boundary():
    # base mu_p = 0, mu_d = 3*beta makes mu_y = 4*mu_x exactly
    beta = 0.5
    mu_d = 3 * beta
    L = math.sqrt(mu_d**2 + 1.0)
    base = SaddleObjective(
        value=lambda x, y: float(x @ y) - 0.5 * mu_d * float(y @ y),
        grad_x=lambda x, y: y,
        grad_y=lambda x, y: x - mu_d * y,
        L=L,
        mu_p=0.0,
        mu_d=mu_d,
        set_x=Ball([0.0], 50.0),
        set_y=Ball([0.0], 50.0),
        sigma=0.0,
        d_y=200.0,
    )
    sub = SaddleSubproblem(base, beta, [0.3])
    eta = 1.0 / (2 * sub.L)
    out = sreg_asym(sub, [1.0, 1.0], 25, eta, OracleStream(0))

    def G(z):
        x, y = z
        return np.array([y + beta * (x - 0.3), mu_d * y - x])

    z = np.array([1.0, 1.0])
    mu_x, mu_y = sub.mu_x, sub.mu_y
    for _ in range(25):
        zh = z - eta * G(z)  # interior: plain gradient look-ahead
        gh = G(zh)
        z = np.array(
            [
                (z[0] + eta * (mu_x * zh[0] - gh[0])) / (1 + eta * mu_x),
                (z[1] + eta * (mu_y * zh[1] - gh[1])) / (1 + eta * mu_y),
            ]
        )
    np.testing.assert_allclose(out.last.coords, z, atol=1e-12)


def test_sreg_asym_certificate_values():
    eps, eps_prime, alpha, delta = asym_certificate(
        T=8, mu_x=1.0, eta=0.25, eta_bar=0.25, mu_bar_x=1.0, d_y=1.0, sigma=0.0
    )
    assert eps == pytest.approx(4.0 / (1.25**8 - 1.0), rel=1e-12)
    assert eps == pytest.approx(0.8063761, rel=1e-7)
    assert alpha - eps_prime == pytest.approx(1.0, abs=1e-15)
    assert delta == 0.0


def test_sreg_asym_requires_modulus_gap():
    prob = toy_saddle()  # mu_p = mu_d = 1
    sub = SaddleSubproblem(prob, 0.5, [0.0])  # mu_x = 1.5, mu_y = 1.5
    with pytest.raises(RecipeViolationError):
        sreg_asym(sub, [1.0, 1.0], 10, 1.0 / (2 * sub.L), OracleStream(0))


def test_sreg_asym_eps_prime_cap_and_feasibility():
    inst = gen_saddle(2, 2, 6.0, 0.0, 2.0, seed=8)
    prob = inst.objective(sigma=0.3)
    beta = prob.mu_d / 6.0
    sub = SaddleSubproblem(prob, beta, np.zeros(2))
    eta_bar = 1.0 / (2 * sub.L)
    T = max(2, math.ceil(1.0 / (beta * eta_bar)))
    out = sreg_asym(sub, np.zeros(4), T, eta_bar, OracleStream(3), mu_bar_x=prob.mu_d / 4)
    assert out.certificate.eps_prime <= 1.0
    assert out.certificate.alpha == pytest.approx(1.0 + out.certificate.eps_prime, rel=1e-12)
    assert sub.set_z.contains(out.last.coords) and sub.set_z.contains(out.ergodic.coords)
    assert out.sfo_calls == 2 * T


def test_certificate_self_consistency_guard():
    with pytest.raises(ContractViolationError):
        InexactnessCertificate(alpha=2.0, eps=0.5, delta=0.0)
    InexactnessCertificate(alpha=1.5, eps=0.5, delta=0.0)
    InexactnessCertificate(alpha=1.25, eps=0.9, delta=0.1, eps_prime=0.25)


def test_ergodic_weights_sum_to_one_reg_family():
    # sum eta_t*Lambda_t equals (Lambda_T - 1)/mu for the linear-rate weights
    mu, eta, T = 0.7, 0.05, 200
    lam, total = 1.0, 0.0
    for _ in range(T):
        total += eta * lam
        lam *= 1.0 + mu * eta
    assert abs(mu * total / (lam - 1.0) - 1.0) <= 1e-12
