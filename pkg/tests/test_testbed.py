import numpy as np
import pytest

from ckit.errors import ContractViolationError
from ckit.testbed import (
    QuadraticInstance,
    SaddleInstance,
    exact_prox,
    gen_quadratic,
    gen_saddle,
    inner_argmax,
    load_instance,
    primal_value,
    save_instance,
)


def test_gen_quadratic_one_dim_is_pure_square():
    inst = gen_quadratic(1, 2.0, 2.0, seed=4)
    # f(x) = x^2 - b x up to the linear shift
    x = np.array([1.3])
    assert inst.value(x) == pytest.approx(float(x[0] ** 2 - inst.b[0] * x[0]))


def test_gen_quadratic_spectrum_endpoints_eigensolve_oracle():
    for d, L, mu, seed in [(6, 10.0, 1.0, 0), (20, 100.0, 0.0, 1), (35, 7.0, 0.5, 2)]:
        inst = gen_quadratic(d, L, mu, seed)
        lam = np.linalg.eigvalsh(inst.a)
        assert abs(lam[-1] - L) <= 1e-6 * max(1.0, L)
        assert abs(lam[0] - (mu if mu > 0 else 1e-6)) <= 1e-6 * max(1.0, L)


def test_gen_quadratic_stationarity_and_interiority():
    inst = gen_quadratic(12, 50.0, 2.0, seed=9)
    assert np.linalg.norm(inst.grad(inst.x_star)) <= 1e-8 * inst.L * np.linalg.norm(inst.x_star)
    assert inst.value(inst.x_star) == pytest.approx(inst.f_star, abs=1e-10)
    assert np.linalg.norm(inst.x_star) == pytest.approx(inst.radius / 2)


def test_gen_quadratic_rejects_bad_moduli():
    with pytest.raises(ContractViolationError):
        gen_quadratic(3, 1.0, 2.0, seed=0)
    with pytest.raises(ContractViolationError):
        gen_quadratic(1, 2.0, 1.0, seed=0)


def test_exact_prox_examples():
    inst = QuadraticInstance(
        a=np.array([[2.0]]),
        b=np.array([0.0]),
        L=2.0,
        mu=2.0,
        seed=0,
        radius=10.0,
        x_star=np.array([0.0]),
        f_star=0.0,
    )
    np.testing.assert_allclose(exact_prox(inst, [1.0], 2.0), [0.5], atol=1e-14)
    # beta -> infinity pulls the prox to its center
    np.testing.assert_allclose(exact_prox(inst, [1.0], 1e12), [1.0], atol=1e-9)

    rnd = gen_quadratic(5, 10.0, 1.0, seed=3)
    u = exact_prox(rnd, rnd.x_star + 0.1, 4.0)
    g = rnd.grad(u) + 4.0 * (u - (rnd.x_star + 0.1))
    assert np.linalg.norm(g) <= 1e-8


def test_gen_saddle_hand_instance():
    inst = SaddleInstance(
        b_mat=np.array([[1.0]]),
        c_vec=np.array([0.0]),
        d_vec=np.array([0.0]),
        L=np.sqrt(2.0),
        mu_p=1.0,
        mu_d=1.0,
        seed=0,
        radius_x=1.0,
        radius_y=1.0,
        d_y=2.0,
        x_star=np.array([0.0]),
        y_star=np.array([0.0]),
        f_star=0.0,
    )
    inst.audit()
    np.testing.assert_allclose(inst.z_star, [0.0, 0.0])


def test_gen_saddle_known_saddle_and_duality():
    for dx, dy, L, mp, md, seed in [(2, 2, 5.0, 1.0, 1.0, 0), (3, 4, 8.0, 0.0, 2.0, 1), (4, 3, 6.0, 0.5, 2.0, 2)]:
        inst = gen_saddle(dx, dy, L, mp, md, seed)
        j, g0 = inst.operator_affine()
        np.testing.assert_allclose(j @ inst.z_star + g0, np.zeros(dx + dy), atol=1e-8)
        assert inst.primal_value(inst.x_star) == pytest.approx(inst.f_star, abs=1e-8)
        assert inst.dual_value(inst.y_star) == pytest.approx(inst.f_star, abs=1e-8 * max(1, abs(inst.f_star)))


def test_gen_saddle_lipschitz_vs_sampled_oracle():
    inst = gen_saddle(3, 3, 12.0, 1.0, 2.0, seed=5)
    rng = np.random.default_rng(0)
    j, g0 = inst.operator_affine()
    worst = 0.0
    for _ in range(1000):
        a = rng.standard_normal(6)
        b = rng.standard_normal(6)
        num = np.linalg.norm((j @ a + g0) - (j @ b + g0))
        den = np.linalg.norm(a - b)
        worst = max(worst, num / den)
    assert worst <= inst.L * (1 + 1e-9)


def test_inner_argmax_and_primal_value():
    # F = xy - y^2/2 (mu_d = 1): y*(x) = x and f(x) = x^2/2
    inst = SaddleInstance(
        b_mat=np.array([[1.0]]),
        c_vec=np.array([0.0]),
        d_vec=np.array([0.0]),
        L=np.sqrt(2.0) * 0 + 1.5,
        mu_p=0.0,
        mu_d=1.0,
        seed=0,
        radius_x=2.0,
        radius_y=4.0,
        d_y=8.0,
        x_star=np.array([0.0]),
        y_star=np.array([0.0]),
        f_star=0.0,
    )
    x = np.array([0.7])
    np.testing.assert_allclose(inner_argmax(inst, x), [0.7])
    assert primal_value(inst, x) == pytest.approx(0.7**2 / 2)


def test_primal_value_matches_grid_search_oracle():
    inst = gen_saddle(1, 1, 4.0, 0.5, 1.5, seed=11)
    x = np.array([0.3 * inst.radius_x])
    ys = np.linspace(-inst.radius_y, inst.radius_y, 10_001)
    vals = [inst.value(x, np.array([y])) for y in ys]
    assert primal_value(inst, x) == pytest.approx(max(vals), abs=1e-6 * max(1.0, abs(inst.f_star)))


def test_saddle_stationarity_of_primal_at_x_star():
    inst = gen_saddle(3, 3, 9.0, 0.0, 1.0, seed=13)
    eps = 1e-6
    f0 = inst.primal_value(inst.x_star)
    for i in range(3):
        e = np.zeros(3)
        e[i] = eps
        deriv = (inst.primal_value(inst.x_star + e) - f0) / eps
        assert abs(deriv) <= 1e-4 * max(1.0, abs(f0))


def test_instance_serialization_round_trip(tmp_path):
    q = gen_quadratic(7, 20.0, 0.5, seed=21)
    p = tmp_path / "quad.ckit"
    save_instance(q, p)
    q2 = load_instance(p)
    assert isinstance(q2, QuadraticInstance)
    np.testing.assert_array_equal(q.a, q2.a)
    np.testing.assert_array_equal(q.b, q2.b)
    np.testing.assert_array_equal(q.x_star, q2.x_star)
    assert (q.L, q.mu, q.seed, q.radius, q.f_star) == (q2.L, q2.mu, q2.seed, q2.radius, q2.f_star)

    s = gen_saddle(3, 5, 10.0, 1.0, 2.0, seed=22)
    p2 = tmp_path / "saddle.ckit"
    save_instance(s, p2)
    s2 = load_instance(p2)
    assert isinstance(s2, SaddleInstance)
    np.testing.assert_array_equal(s.b_mat, s2.b_mat)
    np.testing.assert_array_equal(s.c_vec, s2.c_vec)
    np.testing.assert_array_equal(s.d_vec, s2.d_vec)
    np.testing.assert_array_equal(s.x_star, s2.x_star)
    np.testing.assert_array_equal(s.y_star, s2.y_star)
    assert s.d_y == s2.d_y and s.f_star == s2.f_star

    with pytest.raises(ContractViolationError):
        bad = tmp_path / "bad.ckit"
        bad.write_bytes(b"NOPE!" + b"\x00" * 32)
        load_instance(bad)


def test_seed_determinism_bitwise():
    a = gen_quadratic(9, 30.0, 1.0, seed=77)
    b = gen_quadratic(9, 30.0, 1.0, seed=77)
    np.testing.assert_array_equal(a.a, b.a)
    np.testing.assert_array_equal(a.b, b.b)
    s1 = gen_saddle(4, 4, 11.0, 1.0, 3.0, seed=78)
    s2 = gen_saddle(4, 4, 11.0, 1.0, 3.0, seed=78)
    np.testing.assert_array_equal(s1.b_mat, s2.b_mat)
    np.testing.assert_array_equal(s1.c_vec, s2.c_vec)


def test_objective_views_pass_core_audits():
    rng = np.random.default_rng(3)
    gen_quadratic(8, 25.0, 1.0, seed=1).objective(sigma=0.3).audit(rng)
    gen_saddle(3, 3, 7.0, 1.0, 2.0, seed=2).objective(sigma=0.1).audit(rng)


def test_operator_impl_agrees_with_split_gradients():
    inst = gen_saddle(3, 4, 9.0, 0.5, 1.0, seed=6)
    prob = inst.objective()
    rng = np.random.default_rng(8)
    for _ in range(20):
        z = rng.standard_normal(7)
        split = np.concatenate([prob.grad_x(z[:3], z[3:]), -prob.grad_y(z[:3], z[3:])])
        np.testing.assert_allclose(prob.operator(z), split, atol=1e-12)
