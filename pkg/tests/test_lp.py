import numpy as np
import pytest
import scipy.optimize

from feedback_bandit.estimation import linear_loss
from feedback_bandit.lp import LPError, linear_loss_lp, solve_lp


class TestSolveLP:
    def test_two_variable_optimum(self):
        # min -x - y  s.t.  x + y <= 1, x <= 0.6
        x, obj, pivots = solve_lp([-1.0, -1.0], A_ub=[[1, 1], [1, 0]], b_ub=[1, 0.6])
        assert np.allclose(x, [0.6, 0.4])
        assert obj == pytest.approx(-1.0)

    def test_equality_constraint(self):
        # min x + 2y  s.t.  x + y = 1
        x, obj, _ = solve_lp([1.0, 2.0], A_eq=[[1, 1]], b_eq=[1.0])
        assert np.allclose(x, [1.0, 0.0])
        assert obj == pytest.approx(1.0)

    def test_negative_rhs_handled(self):
        # -x <= -0.5 means x >= 0.5
        x, obj, _ = solve_lp([1.0], A_ub=[[-1.0]], b_ub=[-0.5])
        assert x[0] == pytest.approx(0.5)

    def test_infeasible_raises(self):
        with pytest.raises(LPError, match="infeasible"):
            solve_lp([1.0], A_ub=[[1.0], [-1.0]], b_ub=[1.0, -2.0])

    def test_unbounded_raises(self):
        with pytest.raises(LPError, match="unbounded"):
            solve_lp([-1.0], A_ub=[[-1.0]], b_ub=[0.0])

    def test_matches_scipy_on_random_instances(self):
        rng = np.random.default_rng(17)
        for trial in range(30):
            n = int(rng.integers(2, 7))
            m = int(rng.integers(1, 6))
            c = rng.normal(size=n)
            A = rng.normal(size=(m, n))
            b = A @ rng.random(n) + rng.random(m)  # keeps a strictly interior point
            A_ub = np.vstack([A, np.ones(n)])  # cap total mass so min is finite
            b_ub = np.append(b, 10.0)
            ref = scipy.optimize.linprog(c, A_ub=A_ub, b_ub=b_ub, method="highs")
            assert ref.status == 0
            x, obj, _ = solve_lp(c, A_ub=A_ub, b_ub=b_ub)
            assert obj == pytest.approx(ref.fun, abs=1e-7), f"trial {trial}"
            assert np.all(A_ub @ x <= b_ub + 1e-8)


def random_instance(rng):
    T = int(rng.integers(5, 51))
    K = int(rng.integers(2, 5))
    N = int(rng.integers(1, 4))
    qhat = rng.random((T, K, N))
    topics = rng.integers(0, K, size=T)
    return qhat, topics


class TestLinearLossLP:
    def test_returns_feasible_point(self):
        rng = np.random.default_rng(31)
        qhat, topics = random_instance(rng)
        a, a_u, z, obj, pivots = linear_loss_lp(qhat, topics)
        assert np.all(a >= -1e-9) and a_u >= -1e-9
        assert a.sum() + a_u == pytest.approx(1.0, abs=1e-8)
        assert np.all(z >= -1e-9) and np.all(z <= a_u + 1e-9)

    def test_objective_matches_direct_evaluation(self):
        rng = np.random.default_rng(32)
        for _ in range(10):
            qhat, topics = random_instance(rng)
            a, a_u, z, obj, _ = linear_loss_lp(qhat, topics)
            assert obj == pytest.approx(linear_loss(a, a_u, z, qhat, topics), abs=1e-7)

    def test_optimum_is_zero_on_any_instance(self):
        # a = 0, a_u = 1 with constant z ties every topic score, so the
        # minimum of this program is always exactly zero
        rng = np.random.default_rng(33)
        for _ in range(10):
            qhat, topics = random_instance(rng)
            _, _, _, obj, _ = linear_loss_lp(qhat, topics)
            assert abs(obj) < 1e-9

    def test_sample_variant_objective_matches_direct_evaluation(self):
        rng = np.random.default_rng(34)
        qhat = rng.random((12, 5, 3, 2))  # (posts, S, K, N)
        topics = rng.integers(0, 3, size=12)
        a, a_u, z, obj, _ = linear_loss_lp(qhat, topics)
        assert obj == pytest.approx(linear_loss(a, a_u, z, qhat, topics), abs=1e-7)

    def test_matches_scipy_linprog_objective(self):
        rng = np.random.default_rng(35)
        qhat, topics = random_instance(rng)
        T, K, N = qhat.shape
        # variables: a (N), a_u, z (K), m (T)
        n_var = N + 1 + K + T
        c = np.zeros(n_var)
        c[N + 1 + K :] = 1.0
        for t in range(T):
            c[:N] -= qhat[t, topics[t]]
            c[N + 1 + topics[t]] -= 1.0
        rows, rhs = [], []
        for t in range(T):
            for k in range(K):
                row = np.zeros(n_var)
                row[:N] = qhat[t, k]
                row[N + 1 + k] = 1.0
                row[N + 1 + K + t] = -1.0
                rows.append(row)
                rhs.append(0.0)
        for k in range(K):
            row = np.zeros(n_var)
            row[N + 1 + k] = 1.0
            row[N] = -1.0
            rows.append(row)
            rhs.append(0.0)
        eq = np.zeros(n_var)
        eq[: N + 1] = 1.0
        ref = scipy.optimize.linprog(
            c,
            A_ub=np.array(rows),
            b_ub=np.array(rhs),
            A_eq=eq[None, :],
            b_eq=[1.0],
            bounds=[(0, None)] * n_var,
            method="highs",
        )
        assert ref.status == 0
        _, _, _, obj, _ = linear_loss_lp(qhat, topics)
        assert obj == pytest.approx(ref.fun, abs=1e-8)
