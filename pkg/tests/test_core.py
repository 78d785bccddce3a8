import numpy as np
import pytest

from ckit.core import (
    Ball,
    Box,
    OracleStream,
    ProductSet,
    SaddleObjective,
    Simplex,
    SmoothObjective,
    as_point,
    project,
    prox_step,
    saddle_operator,
    sample_grad,
)
from ckit.errors import ContractViolationError


def simplex_qp_2d(scale, p):
    """Independent oracle: solve the 2-d simplex projection QP by KKT
    enumeration of active sets (vertices plus the interior segment)."""
    candidates = [np.array([scale, 0.0]), np.array([0.0, scale])]
    # interior of the segment: p - theta*1 with sum = scale
    theta = (p[0] + p[1] - scale) / 2.0
    interior = p - theta
    if np.all(interior >= 0):
        candidates.append(interior)
    return min(candidates, key=lambda c: float((c - p) @ (c - p)))


def test_primal_dual_point_split_and_invariants():
    from ckit.core import PrimalDualPoint

    z = PrimalDualPoint(np.array([1.0, 2.0, 3.0]), split=1)
    np.testing.assert_array_equal(z.x, [1.0])
    np.testing.assert_array_equal(z.y, [2.0, 3.0])
    with pytest.raises(ContractViolationError):
        PrimalDualPoint(np.array([1.0, 2.0]), split=2)
    with pytest.raises(ContractViolationError):
        PrimalDualPoint(np.array([1.0, np.inf]), split=1)


def test_point_validation():
    with pytest.raises(ContractViolationError):
        as_point([1.0, np.nan])
    with pytest.raises(ContractViolationError):
        as_point([1.0, 2.0], dim=3)
    assert as_point(2.5).shape == (1,)


def test_project_ball_radial_scaling():
    ball = Ball([0.0, 0.0], 1.0)
    np.testing.assert_allclose(project(ball, [3.0, 4.0]), [0.6, 0.8], rtol=0, atol=1e-15)


def test_project_box_componentwise_clamp():
    box = Box([0.0, 0.0], [1.0, 1.0])
    np.testing.assert_allclose(project(box, [-1.0, 0.5]), [0.0, 0.5], atol=0)


def test_project_simplex_matches_kkt_oracle():
    s = Simplex(1.0, 2)
    np.testing.assert_allclose(project(s, [2.0, 0.0]), simplex_qp_2d(1.0, np.array([2.0, 0.0])), atol=1e-12)
    rng = np.random.default_rng(5)
    for _ in range(200):
        p = rng.standard_normal(2) * 2.0
        np.testing.assert_allclose(project(s, p), simplex_qp_2d(1.0, p), atol=1e-10)


def _random_sets(rng, dim):
    yield Ball(rng.standard_normal(dim), 0.5 + rng.random())
    lo = rng.standard_normal(dim)
    yield Box(lo, lo + rng.random(dim) + 0.1)
    yield Simplex(0.5 + rng.random(), dim)


def test_projection_idempotent_and_nonexpansive():
    rng = np.random.default_rng(11)
    for dim in (1, 2, 5, 17):
        for fs in _random_sets(rng, dim):
            for _ in range(50):
                p = rng.standard_normal(dim) * 3.0
                q = rng.standard_normal(dim) * 3.0
                pp, qq = fs.project(p), fs.project(q)
                assert np.linalg.norm(fs.project(pp) - pp) <= 1e-12
                assert np.linalg.norm(pp - qq) <= np.linalg.norm(p - q) + 1e-12


def test_product_set_blockwise():
    ps = ProductSet(Ball([0.0], 1.0), Box([0.0, 0.0], [1.0, 1.0]))
    assert ps.dim == 3
    np.testing.assert_allclose(ps.project(np.array([5.0, -1.0, 0.5])), [1.0, 0.0, 0.5])
    assert ps.contains(np.array([0.5, 0.5, 0.5]))
    with pytest.raises(ContractViolationError):
        project(ps, [1.0, 2.0])


def test_prox_step_examples():
    big = Ball([0.0], 10.0)
    np.testing.assert_allclose(prox_step(big, 0.5, [0.0], [1.0]), [-0.5], atol=1e-15)
    np.testing.assert_allclose(prox_step(big, 1.0, [0.0], [0.0], anchors=[(1.0, [2.0])]), [1.0], atol=1e-15)
    small = Ball([0.0], 0.1)
    np.testing.assert_allclose(prox_step(small, 0.5, [0.0], [1.0]), [-0.1], atol=1e-15)
    with pytest.raises(ContractViolationError):
        prox_step(big, 0.0, [0.0], [1.0])


def test_prox_step_equals_gradient_step_on_huge_ball():
    rng = np.random.default_rng(3)
    fs = Ball(np.zeros(6), 1e12)
    for _ in range(20):
        c = rng.standard_normal(6)
        g = rng.standard_normal(6)
        eta = 0.01 + rng.random()
        np.testing.assert_array_equal(prox_step(fs, eta, c, g), c - eta * g)


def test_prox_step_minimality_against_perturbations():
    rng = np.random.default_rng(7)
    fs = Ball(np.zeros(4), 2.0)
    c = rng.standard_normal(4)
    g = rng.standard_normal(4)
    anchors = [(0.7, rng.standard_normal(4)), (1.3, rng.standard_normal(4))]
    eta = 0.35

    def objective(u):
        val = float(g @ u) + float((u - c) @ (u - c)) / (2 * eta)
        for w, a in anchors:
            val += 0.5 * w * float((u - a) @ (u - a))
        return val

    u = prox_step(fs, eta, c, g, anchors)
    base = objective(u)
    for _ in range(1000):
        pert = fs.project(u + rng.standard_normal(4) * rng.choice([1e-4, 1e-2, 1.0]))
        assert objective(pert) >= base - 1e-10


def _bilinear_saddle(mu_p=1.0, mu_d=1.0):
    return SaddleObjective(
        value=lambda x, y: 0.5 * mu_p * float(x @ x) + float(x @ y) - 0.5 * mu_d * float(y @ y),
        grad_x=lambda x, y: mu_p * x + y,
        grad_y=lambda x, y: x - mu_d * y,
        L=np.sqrt(max(mu_p, mu_d) ** 2 + 1.0),
        mu_p=mu_p,
        mu_d=mu_d,
        set_x=Ball([0.0], 10.0),
        set_y=Ball([0.0], 10.0),
    )


def test_saddle_operator_direct_differentiation():
    prob = SaddleObjective(
        value=lambda x, y: float(x @ y),
        grad_x=lambda x, y: y,
        grad_y=lambda x, y: x,
        L=1.0,
        mu_p=0.0,
        mu_d=0.0,
        set_x=Ball([0.0], 5.0),
        set_y=Ball([0.0], 5.0),
    )
    np.testing.assert_allclose(saddle_operator(prob, [1.0, 2.0]), [2.0, -1.0])


def test_saddle_operator_quadratic_and_zero_at_saddle():
    prob = _bilinear_saddle(mu_p=0.3, mu_d=0.9)
    x, y = 1.7, -0.4
    np.testing.assert_allclose(
        saddle_operator(prob, [x, y]), [0.3 * x + y, 0.9 * y - x], atol=1e-15
    )
    np.testing.assert_allclose(saddle_operator(prob, [0.0, 0.0]), [0.0, 0.0], atol=0)


def test_sample_grad_zero_noise_is_bitwise_exact():
    rng = np.random.default_rng(0)
    A = np.diag([1.0, 3.0])
    prob = SmoothObjective(
        value=lambda x: 0.5 * float(x @ A @ x),
        grad=lambda x: A @ x,
        L=3.0,
        mu=1.0,
        set=Ball(np.zeros(2), 10.0),
        sigma=0.0,
    )
    st = OracleStream(42)
    x = rng.standard_normal(2)
    g = sample_grad(prob, x, st)
    assert np.array_equal(g, A @ x)
    assert st.counter == 1


def test_sample_grad_monte_carlo_mean_and_variance():
    d = 4
    sigma = 0.7
    A = np.eye(d)
    prob = SmoothObjective(
        value=lambda x: 0.5 * float(x @ x),
        grad=lambda x: A @ x,
        L=1.0,
        mu=1.0,
        set=Ball(np.zeros(d), 10.0),
        sigma=sigma,
    )
    st = OracleStream(2024)
    x = np.full(d, 0.5)
    n = 100_000
    samples = np.empty((n, d))
    for i in range(n):
        samples[i] = sample_grad(prob, x, st)
    noise = samples - x
    # per-coordinate mean within 4*sigma/sqrt(n) of zero
    coord_sd = sigma / np.sqrt(d)
    assert np.all(np.abs(noise.mean(axis=0)) <= 4 * coord_sd / np.sqrt(n))
    # total second moment within 5% of sigma^2
    second = float((noise ** 2).sum(axis=1).mean())
    assert 0.95 * sigma**2 <= second <= 1.05 * sigma**2


def test_stream_reproducibility_and_block_equivalence():
    a = OracleStream(99)
    b = OracleStream(99)
    for dim in (3, 1, 5):
        np.testing.assert_array_equal(a.normal(dim), b.normal(dim))
    assert a.counter == b.counter == 3

    c = OracleStream(7)
    block = c.normal_block(6, 4)
    d = OracleStream(7)
    rows = np.stack([d.normal(4) for _ in range(6)])
    np.testing.assert_array_equal(block, rows)
    assert c.counter == d.counter == 6

    # distinct runs draw independent streams
    r0 = OracleStream.for_run(123, 0).normal(4)
    r1 = OracleStream.for_run(123, 1).normal(4)
    assert not np.array_equal(r0, r1)
    np.testing.assert_array_equal(r0, OracleStream.for_run(123, 0).normal(4))


def test_objective_audits_pass_and_catch_lies():
    rng = np.random.default_rng(1)
    A = np.diag([0.5, 2.0])
    good = SmoothObjective(
        value=lambda x: 0.5 * float(x @ A @ x),
        grad=lambda x: A @ x,
        L=2.0,
        mu=0.5,
        set=Ball(np.zeros(2), 5.0),
    )
    good.audit(rng)
    bad = SmoothObjective(
        value=lambda x: 0.5 * float(x @ A @ x),
        grad=lambda x: A @ x,
        L=1.0,  # understated smoothness
        mu=0.5,
        set=Ball(np.zeros(2), 5.0),
    )
    with pytest.raises(ContractViolationError):
        bad.audit(rng)
    _bilinear_saddle().audit(np.random.default_rng(2))


def test_saddle_objective_requires_mu_d_ge_mu_p():
    with pytest.raises(ContractViolationError):
        _bilinear_saddle(mu_p=1.0, mu_d=0.5)
