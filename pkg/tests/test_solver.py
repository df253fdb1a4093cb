import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quarticdual.exceptions import DomainError
from quarticdual.instgen import generate
from quarticdual.problems import QpInstance, QuadraticForm
from quarticdual.solver import (
    TRACE_COLUMNS, QpState, QqState, SolverConfig, SolveStatus, gamma_qp, h_qp, h_qq,
    initial_state_qp, initial_state_qq, jacobian_qp, jacobian_qq, jvp_qp, jvp_qq,
    newton_direction_qp, newton_direction_qq, newton_rhs_qp, newton_rhs_qq, potential_qp,
    potential_qq, potential_directional_derivative_qp, potential_directional_derivative_qq,
    solve_qp, solve_qq, write_trace_csv,
)
from quarticdual.symlin import min_eigenvalue

from conftest import random_qp_instance, random_qp_state, random_qq_instance, random_qq_state


def fd_jacobian(h, z, h_step=1e-6):
    cols = []
    for k in range(z.size):
        e = np.zeros_like(z)
        e[k] = h_step
        cols.append((h(z + e) - h(z - e)) / (2 * h_step))
    return np.column_stack(cols)


def max_rel_err(J, Jfd):
    return float(np.max(np.abs(J - Jfd) / (1.0 + np.abs(J))))


def test_state_vector_roundtrip(rng):
    s = random_qp_state(rng, 3)
    t = QpState.from_vector(s.to_vector(), 3)
    np.testing.assert_array_equal(t.to_vector(), s.to_vector())
    s = random_qq_state(rng, 3)
    t = QqState.from_vector(s.to_vector(), 3)
    np.testing.assert_array_equal(t.to_vector(), s.to_vector())
    assert t.lam == s.lam and t.w == s.w


def test_h_qp_zero_at_hand_optimum(qp_hand):
    # x* = -1, sigma* = 2 q1(x*) = 0, W = A0 + 0 A1 = 1, U = 0
    s = QpState(np.array([-1.0]), 0.0, np.zeros((1, 1)), np.ones((1, 1)))
    np.testing.assert_array_equal(h_qp(qp_hand, s), np.zeros(4))
    np.testing.assert_array_equal(gamma_qp(qp_hand, [-1.0], 0.0), [0.0, 0.0])


def test_h_qq_zero_at_hand_optimum(qq_hand):
    s = QqState(np.array([2.0]), 6.0, 6.0, 0.0, np.zeros((1, 1)), np.zeros((1, 1)))
    np.testing.assert_array_equal(h_qq(qq_hand, s), np.zeros(6))


@pytest.mark.parametrize("n", [1, 2, 4])
def test_jacobian_qp_fd(rng, n):
    inst = random_qp_instance(rng, n)
    s = random_qp_state(rng, n)
    J = jacobian_qp(inst, s)
    Jfd = fd_jacobian(lambda z: h_qp(inst, QpState.from_vector(z, n)), s.to_vector())
    assert max_rel_err(J, Jfd) <= 1e-6


@pytest.mark.parametrize("n", [1, 2, 4])
def test_jacobian_qq_fd(rng, n):
    inst = random_qq_instance(rng, n)
    s = random_qq_state(rng, n)
    J = jacobian_qq(inst, s)
    Jfd = fd_jacobian(lambda z: h_qq(inst, QqState.from_vector(z, n)), s.to_vector())
    assert max_rel_err(J, Jfd) <= 1e-6


@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_jvp_matches_jacobian(n, seed):
    rng = np.random.default_rng(seed)
    inst, s, d = random_qp_instance(rng, n), random_qp_state(rng, n), random_qp_state(rng, n)
    np.testing.assert_allclose(jvp_qp(inst, s, d), jacobian_qp(inst, s) @ d.to_vector(),
                               rtol=1e-12, atol=1e-12)
    inst, s, d = random_qq_instance(rng, n), random_qq_state(rng, n), random_qq_state(rng, n)
    np.testing.assert_allclose(jvp_qq(inst, s, d), jacobian_qq(inst, s) @ d.to_vector(),
                               rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("beta", [0.0, 0.2])
@pytest.mark.parametrize("n", [1, 3, 6])
def test_reduced_direction_qp(rng, n, beta):
    inst = generate(max(n, 2), 10, "qp", n) if n > 1 else random_qp_instance(rng, 1)
    n = inst.n
    s = initial_state_qp(inst)
    s.x = rng.standard_normal(n)
    rhs = newton_rhs_qp(inst, s, beta)
    d = newton_direction_qp(inst, s, beta, rhs=rhs)
    dense = np.linalg.solve(jacobian_qp(inst, s), rhs)
    np.testing.assert_allclose(d.to_vector(), dense, rtol=0, atol=1e-9 * np.linalg.norm(dense))


@pytest.mark.parametrize("beta", [0.0, 0.2])
@pytest.mark.parametrize("family", ["qq1", "qq2"])
def test_reduced_direction_qq(rng, family, beta):
    inst = generate(4, 10, family, 1)
    s = initial_state_qq(inst)
    s.x = rng.standard_normal(4)
    s.w = 0.7
    rhs = newton_rhs_qq(inst, s, beta)
    d = newton_direction_qq(inst, s, beta, rhs=rhs)
    dense = np.linalg.solve(jacobian_qq(inst, s), rhs)
    np.testing.assert_allclose(d.to_vector(), dense, rtol=0, atol=1e-9 * np.linalg.norm(dense))


def test_centering_only_touches_complementarity(rng):
    inst, s = random_qp_instance(rng, 3), random_qp_state(rng, 3)
    diff = newton_rhs_qp(inst, s, 0.2) + h_qp(inst, s)
    assert np.all(diff[:4 + 9] == 0)
    # identity centering: (beta/n) tr(S) vec(I)
    S = (s.W @ s.U + s.U @ s.W) / 2
    np.testing.assert_allclose(diff[13:].reshape(3, 3), 0.2 / 3 * np.trace(S) * np.eye(3), atol=1e-14)
    inst, s = random_qq_instance(rng, 3), random_qq_state(rng, 3)
    diff = newton_rhs_qq(inst, s, 0.2) + h_qq(inst, s)
    S = (s.W @ s.U + s.U @ s.W) / 2
    mu = 0.2 / 4 * (np.trace(S) + s.lam * s.w)
    assert diff[4 + 1 + 9] == pytest.approx(mu)
    np.testing.assert_allclose(diff[15:].reshape(3, 3), mu * np.eye(3), atol=1e-14)
    assert np.all(diff[:14] == 0)


def test_pure_newton_slope(rng):
    # with beta = 0, J d = -H so d/dt rho log||H||^2 = -2 rho
    inst, s = random_qp_instance(rng, 3), random_qp_state(rng, 3)
    d = newton_direction_qp(inst, s, 0.0)
    np.testing.assert_allclose(jvp_qp(inst, s, d), -h_qp(inst, s), atol=1e-9)


@pytest.mark.parametrize("kind", ["qp", "qq"])
def test_potential_directional_derivative_fd(rng, kind):
    n = 3
    if kind == "qp":
        inst, s, d = random_qp_instance(rng, n), random_qp_state(rng, n), random_qp_state(rng, n)
        pot, slope, cls = potential_qp, potential_directional_derivative_qp, QpState
    else:
        inst, s, d = random_qq_instance(rng, n), random_qq_state(rng, n), random_qq_state(rng, n)
        pot, slope, cls = potential_qq, potential_directional_derivative_qq, QqState
    z, dz, h = s.to_vector(), d.to_vector(), 1e-6
    fd = (pot(inst, cls.from_vector(z + h * dz, n)) - pot(inst, cls.from_vector(z - h * dz, n))) / (2 * h)
    assert slope(inst, s, d) == pytest.approx(fd, rel=1e-6, abs=1e-6)


def test_potential_domain(rng):
    inst, s = random_qq_instance(rng, 2), random_qq_state(rng, 2)
    s.lam = 0.0
    with pytest.raises(DomainError):
        potential_qq(inst, s)
    inst, s = random_qp_instance(rng, 2), random_qp_state(rng, 2)
    s.U = -s.U
    with pytest.raises(DomainError):
        potential_qp(inst, s)


def test_initial_states_interior():
    inst = generate(5, 100, "qp", 0)
    s = initial_state_qp(inst)
    assert min_eigenvalue(s.W) > 0 and min_eigenvalue(s.U) > 0
    assert min_eigenvalue(inst.q0.A + s.sigma * inst.q1.A) > 0
    np.testing.assert_allclose(gamma_qp(inst, s.x, s.sigma)[:-1], 0, atol=1e-10)
    assert np.all(initial_state_qp(inst, "zero").x == 0)
    with pytest.raises(ValueError):
        initial_state_qp(inst, "middle")
    inst = generate(5, 100, "qq1", 0)
    s = initial_state_qq(inst)
    assert s.lam == 1.0 and s.w > 0
    assert min_eigenvalue(s.W) > 0
    s = initial_state_qq(inst, "slater")
    np.testing.assert_array_equal(s.x, inst.slater_point)
    assert s.w == pytest.approx(-inst.q2(inst.slater_point))


def test_initial_state_needs_witness():
    from quarticdual.problems import QuadraticForm
    inst = QpInstance(QuadraticForm([[-1.0]], [0.0], 0.0), QuadraticForm([[0.0]], [1.0], 0.0))
    with pytest.raises(DomainError):
        initial_state_qp(inst)


def test_config_validation():
    with pytest.raises(ValueError):
        solve_qp(generate(2, 10, "qp", 0), SolverConfig(epsilon=0))
    with pytest.raises(ValueError, match="rho"):
        SolverConfig(rho=2.0).resolved(3, "qp")
    with pytest.raises(ValueError):
        SolverConfig(beta=1.0).resolved(3, "qp")
    with pytest.raises(ValueError):
        SolverConfig(centering="mean").resolved(3, "qp")
    cfg = SolverConfig().resolved(4, "qq")
    assert (cfg.rho, cfg.memory) == (14.0, 10)
    cfg = SolverConfig().resolved(4, "qp")
    assert (cfg.rho, cfg.memory) == (10.0, 5)


def test_solve_qp_hand(qp_hand):
    state, report = solve_qp(qp_hand)
    assert report.status is SolveStatus.CONVERGED
    assert state.x[0] == pytest.approx(-1.0, abs=1e-4)
    assert report.objective == pytest.approx(-1.0, abs=1e-8)
    assert abs(report.gap) <= 1e-6


def test_solve_qp_hand_degenerate(qp_hand_origin):
    # sigma* = -2 puts A0 + sigma A1 on the boundary of the PSD cone
    state, report = solve_qp(qp_hand_origin)
    assert report.converged
    assert state.x[0] == pytest.approx(0.0, abs=1e-6)
    assert state.sigma == pytest.approx(-2.0, abs=1e-3)
    assert report.objective == pytest.approx(1.0, abs=1e-8)


def test_solve_qq_hand(qq_hand):
    state, report = solve_qq(qq_hand)
    assert report.converged
    assert abs(state.x[0]) == pytest.approx(2.0, abs=1e-6)
    assert state.sigma == pytest.approx(6.0, abs=1e-6)
    assert state.lam == pytest.approx(6.0, abs=1e-6)
    assert report.objective == pytest.approx(9.0, abs=1e-6)
    assert qq_hand.q2(state.x) <= 0


def test_solve_reports_iterations_and_trace():
    inst = generate(6, 10, "qp", 2)
    state, report = solve_qp(inst, SolverConfig(keep_trace=True))
    assert report.converged
    assert len(report.trace) == report.iterations
    assert report.final_gamma_norm <= 1e-4
    d = report.as_dict()
    assert d["status"] == "converged" and "message" not in d
    buf = io.StringIO()
    write_trace_csv(report, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(TRACE_COLUMNS)
    assert len(lines) == report.iterations + 1
    # potential is non-increasing relative to the non-monotone reference
    pots = [r["potential"] for r in report.trace]
    assert pots[-1] < pots[0]


def test_max_iter_status():
    inst = generate(6, 10, "qp", 2)
    _, report = solve_qp(inst, SolverConfig(max_iter=1), x0="lagrangian")
    assert report.status is SolveStatus.MAX_ITER
    assert report.iterations == 1


def test_warm_start_from_solution():
    inst = generate(4, 10, "qp", 3)
    state, _ = solve_qp(inst)
    again, report = solve_qp(inst, init=state)
    assert report.iterations == 0 and report.converged
    with pytest.raises(ValueError):
        solve_qp(inst, init=QpState(np.zeros(2), 1.0, np.eye(2), np.eye(2)))
    with pytest.raises(TypeError):
        solve_qq(inst)
    bad = initial_state_qq(generate(4, 10, "qq1", 0))
    bad.w = 0.0
    with pytest.raises(DomainError):
        solve_qq(generate(4, 10, "qq1", 0), init=bad)


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 8), st.integers(0, 1000))
def test_qq_returned_points_feasible(n, seed):
    inst = generate(n, 10, "qq2", seed)
    state, report = solve_qq(inst)
    assert inst.q2(state.x) <= 0.0
    assert state.lam > 0 and state.w > 0


@pytest.mark.parametrize("split", [True, False])
def test_split_and_joint_steps_agree(split):
    inst = generate(5, 10, "qp", 4)
    _, report = solve_qp(inst, SolverConfig(split_steps=split))
    assert report.converged
    assert report.objective == pytest.approx(solve_qp(inst)[1].objective, abs=1e-6)


def test_gamma_hand_value():
    inst = QpInstance(QuadraticForm([[1.0]], [0.0], 0.0), QuadraticForm([[1.0]], [0.0], -1.0))
    np.testing.assert_array_equal(gamma_qp(inst, [0.0], 0.0), [0.0, 1.0])


def test_gamma_is_gradient_of_lagrangian(rng):
    from quarticdual.problems import lagrangian_qp
    inst = random_qp_instance(rng, 3)
    x, s, h = rng.standard_normal(3), 1.3, 1e-6
    g = gamma_qp(inst, x, s)
    fd = [(lagrangian_qp(inst, x + h * e, s) - lagrangian_qp(inst, x - h * e, s)) / (2 * h) for e in np.eye(3)]
    np.testing.assert_allclose(g[:3], fd, rtol=1e-6, atol=1e-7)
    dsig = (lagrangian_qp(inst, x, s + h) - lagrangian_qp(inst, x, s - h)) / (2 * h)
    assert g[3] == pytest.approx(-dsig, rel=1e-6, abs=1e-7)


def test_h_qp_assembly(rng):
    inst, s = random_qp_instance(rng, 3), random_qp_state(rng, 3)
    H = h_qp(inst, s)
    M = inst.q0.A + s.sigma * inst.q1.A
    np.testing.assert_array_equal(H[:4], gamma_qp(inst, s.x, s.sigma))
    np.testing.assert_allclose(H[4:13], (M - s.W).ravel(), atol=0)
    assert np.linalg.norm(H[13:]) == pytest.approx(np.linalg.norm((s.W @ s.U + s.U @ s.W) / 2))
    s.W = M.copy()
    assert np.all(h_qp(inst, s)[4:13] == 0)


def test_zero_direction_at_root(qp_hand):
    s = QpState(np.array([-1.0]), 0.0, np.zeros((1, 1)), np.ones((1, 1)))
    d = newton_direction_qp(qp_hand, s, 0.0)
    assert np.all(d.to_vector() == 0)


def test_hand_direction_vs_dense():
    inst = QpInstance(QuadraticForm.zeros(1), QuadraticForm([[1.0]], [0.0], -1.0))
    x = 0.9
    s = QpState(np.array([x]), 2 * (x * x - 1), np.ones((1, 1)), np.ones((1, 1)))
    for beta in (0.0, 0.2):
        rhs = newton_rhs_qp(inst, s, beta)
        dense = np.linalg.solve(jacobian_qp(inst, s), rhs)
        np.testing.assert_allclose(newton_direction_qp(inst, s, beta).to_vector(), dense, atol=1e-10)


def test_potential_identities(rng):
    n = 3
    inst, s = random_qp_instance(rng, n), random_qp_state(rng, n)
    rho = 8.0
    logdet = np.sum(np.log(np.linalg.eigvalsh((s.W @ s.U + s.U @ s.W) / 2)))
    H = h_qp(inst, s)
    assert potential_qp(inst, s, rho) == pytest.approx(rho * np.log(H @ H) - logdet, rel=1e-12)
    s.U, s.W = np.eye(n), np.eye(n)
    H = h_qp(inst, s)
    assert potential_qp(inst, s, rho) == pytest.approx(rho * np.log(H @ H), rel=1e-14)
    # scaling H by t adds 2 rho log t: here rho log||tH||^2 - rho log||H||^2
    t = 3.0
    assert rho * np.log((t * H) @ (t * H)) - rho * np.log(H @ H) == pytest.approx(2 * rho * np.log(t))


def test_slope_zero_direction(rng):
    inst, s = random_qp_instance(rng, 3), random_qp_state(rng, 3)
    z = QpState(np.zeros(3), 0.0, np.zeros((3, 3)), np.zeros((3, 3)))
    assert potential_directional_derivative_qp(inst, s, z) == 0.0


def test_newton_is_descent_50_states():
    for k in range(50):
        rng = np.random.default_rng(5000 + k)
        n = 1 + k % 5
        inst, s = random_qp_instance(rng, n), random_qp_state(rng, n)
        d = newton_direction_qp(inst, s, 0.0)
        assert potential_directional_derivative_qp(inst, s, d) < 0


def test_grid_oracle_hand(qp_hand_origin):
    grid = np.arange(-2, 2 + 1e-12, 1e-5)
    f = 2 * grid ** 2 + (grid ** 2 - 1) ** 2
    state, report = solve_qp(qp_hand_origin)
    assert report.objective == pytest.approx(f.min(), abs=1e-4)
    assert state.x[0] == pytest.approx(grid[np.argmin(f)], abs=1e-4)


def test_root_init_converges_immediately(qp_hand, qq_hand):
    s = QpState(np.array([-1.0]), 0.0, 1e-9 * np.ones((1, 1)), np.ones((1, 1)))
    _, report = solve_qp(qp_hand, init=s)
    assert report.converged and report.iterations <= 1
    s = QqState(np.array([2.0]), 6.0, 6.0, 1e-12, 1e-9 * np.ones((1, 1)), 1e-9 * np.ones((1, 1)))
    _, report = solve_qq(qq_hand, init=s)
    assert report.converged and report.iterations <= 1


def test_category1_small():
    inst = generate(2, 10, "qq1", 0)
    state, report = solve_qq(inst)
    assert report.objective <= 1e-6
    assert abs(state.lam) <= 1e-4 and abs(state.sigma) <= 1e-4
    assert inst.q2(state.x) <= 0


def test_category2_small_grid():
    inst = generate(2, 10, "qq2", 1)
    state, report = solve_qq(inst)
    axis = np.arange(-3, 3 + 1e-12, 2e-3)
    X, Y = np.meshgrid(axis, axis)
    P = np.column_stack([X.ravel(), Y.ravel()])
    q = lambda f: np.einsum("ij,jk,ik->i", P, f.A, P) + 2 * P @ f.b + f.c
    feas = q(inst.q2) <= 0
    grid_best = (q(inst.q1)[feas] ** 2).min()
    assert inst.q2(state.x) <= 0
    assert abs(state.lam * inst.q2(state.x)) <= 1e-6
    assert abs(report.gap) <= 1e-3
    assert report.objective <= grid_best + 1e-9
    assert report.objective == pytest.approx(grid_best, rel=5e-2)
