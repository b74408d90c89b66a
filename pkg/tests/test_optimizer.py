import numpy as np
import pytest

from taghash.model import (AccumStats, Hyperparams, RoundData, objective_value,
                           true_tag_objective)
from taghash.optimizer import (RoundAborted, assemble_q,
                               code_subproblem_value, compute_reweights,
                               dcc_bit_column, init_round, run_round,
                               update_b_dcc, update_p, update_u, update_v,
                               update_w)

from conftest import (committed_history, make_state, random_codes,
                      random_round_data)


def stacked_problem(rng, hyper, n_hist=3, n_rows=8, n_cur=6):
    """Committed history plus a live chunk, with everything stacked for
    batch reference solves."""
    state, stats, chunks, codes, weights = committed_history(
        rng, hyper, n_hist, n_rows)
    cur = random_round_data(rng, n_cur, hyper.m, hyper.c, hyper.f)
    cur_b = random_codes(rng, n_cur, hyper.r)
    cur_k = rng.uniform(0.2, 2.0, size=n_cur)
    b_all = np.vstack(codes + [cur_b])
    phi_all = np.vstack([ch.phi for ch in chunks] + [cur.phi])
    y_all = np.vstack([ch.y for ch in chunks] + [cur.y])
    z_all = np.vstack([ch.z for ch in chunks] + [cur.z])
    k_all = np.concatenate(weights + [cur_k])
    return state, stats, cur, cur_b, cur_k, b_all, phi_all, y_all, z_all, k_all


def ridge_lstsq(design, target, ridge):
    """Reference solve of min ||design @ X - target||^2 + ridge ||X||^2
    via an augmented least-squares system."""
    p = design.shape[1]
    aug = np.vstack([design, np.sqrt(ridge) * np.eye(p)])
    rhs = np.vstack([target, np.zeros((p, target.shape[1]))])
    return np.linalg.lstsq(aug, rhs, rcond=None)[0]


class TestClosedFormSolves:
    def test_u_matches_batch_lstsq(self, small_hyper):
        rng = np.random.default_rng(10)
        _, stats, cur, cur_b, _, b_all, phi_all, *_ = stacked_problem(
            rng, small_hyper)
        got = update_u(stats, cur, cur_b, small_hyper)
        want = ridge_lstsq(b_all, phi_all,
                           small_hyper.alpha / small_hyper.beta)
        assert np.allclose(got, want, rtol=1e-9, atol=1e-9)

    def test_p_matches_batch_lstsq(self, small_hyper):
        rng = np.random.default_rng(11)
        _, stats, cur, cur_b, _, b_all, phi_all, *_ = stacked_problem(
            rng, small_hyper)
        got = update_p(stats, cur, cur_b, small_hyper)
        want = ridge_lstsq(phi_all, b_all, small_hyper.alpha / small_hyper.mu)
        assert np.allclose(got, want, rtol=1e-9, atol=1e-9)

    def test_v_matches_batch_lstsq(self, small_hyper):
        rng = np.random.default_rng(12)
        _, stats, cur, cur_b, _, b_all, _, _, z_all, _ = stacked_problem(
            rng, small_hyper)
        got = update_v(stats, cur, cur_b, small_hyper)
        want = ridge_lstsq(b_all, z_all, small_hyper.alpha / small_hyper.theta)
        assert np.allclose(got, want, rtol=1e-9, atol=1e-9)

    def test_w_matches_weighted_batch_lstsq(self, small_hyper):
        rng = np.random.default_rng(13)
        (_, stats, cur, cur_b, cur_k, b_all, _, y_all, _,
         k_all) = stacked_problem(rng, small_hyper)
        got = update_w(stats, cur, cur_b, cur_k, small_hyper)
        s = np.sqrt(k_all)[:, None]
        want = ridge_lstsq(s * b_all, s * y_all, small_hyper.alpha)
        assert np.allclose(got, want, rtol=1e-9, atol=1e-9)

    def test_normal_equation_residuals(self, small_hyper):
        rng = np.random.default_rng(14)
        h = small_hyper
        _, stats, cur, cur_b, cur_k, *_ = stacked_problem(rng, h)
        eye = np.eye(h.r)
        u = update_u(stats, cur, cur_b, h)
        a = stats.c1 + cur_b.T @ cur_b + (h.alpha / h.beta) * eye
        assert np.max(np.abs(a @ u - (stats.c2 + cur_b.T @ cur.phi))) <= 1e-8
        p = update_p(stats, cur, cur_b, h)
        a = stats.c3 + cur.phi.T @ cur.phi + (h.alpha / h.mu) * np.eye(h.m)
        assert np.max(np.abs(a @ p - (stats.c4 + cur.phi.T @ cur_b))) <= 1e-8
        v = update_v(stats, cur, cur_b, h)
        a = stats.c1 + cur_b.T @ cur_b + (h.alpha / h.theta) * eye
        assert np.max(np.abs(a @ v - (stats.c5 + cur_b.T @ cur.z))) <= 1e-8
        w = update_w(stats, cur, cur_b, cur_k, h)
        bk = cur_b * cur_k[:, None]
        a = stats.d1 + bk.T @ cur_b + h.alpha * eye
        assert np.max(np.abs(a @ w - (stats.d2 + bk.T @ cur.y))) <= 1e-8

    def test_perturbations_never_improve(self, small_hyper):
        rng = np.random.default_rng(15)
        h = small_hyper
        (_, stats, cur, cur_b, cur_k, b_all, phi_all, y_all, z_all,
         k_all) = stacked_problem(rng, h)

        def quad(design, target, ridge, x):
            res = design @ x - target
            return float(np.sum(res * res)) + ridge * float(np.sum(x * x))

        s = np.sqrt(k_all)[:, None]
        solved = [
            (update_u(stats, cur, cur_b, h), b_all, phi_all,
             h.alpha / h.beta),
            (update_p(stats, cur, cur_b, h), phi_all, b_all, h.alpha / h.mu),
            (update_v(stats, cur, cur_b, h), b_all, z_all,
             h.alpha / h.theta),
            (update_w(stats, cur, cur_b, cur_k, h), s * b_all, s * y_all,
             h.alpha),
        ]
        for x, design, target, ridge in solved:
            base = quad(design, target, ridge, x)
            for _ in range(20):
                delta = rng.normal(scale=1e-3, size=x.shape)
                assert quad(design, target, ridge, x + delta) >= base - 1e-9

    def test_zero_ridge_falls_back(self):
        # alpha = 0 removes the ridge; the solve must still return a finite
        # least-squares answer even when the Gram matrix is rank deficient
        h = Hyperparams(r=4, m=3, f=2, c=2, alpha=0.0)
        rng = np.random.default_rng(16)
        state = make_state(h)
        stats = AccumStats.zeros(h)
        chunk = random_round_data(rng, 2, h.m, h.c, h.f)
        b = random_codes(rng, 2, h.r)  # rank <= 2 < r
        u = update_u(stats, chunk, b, h)
        assert np.all(np.isfinite(u))
        a = b.T @ b
        rhs = b.T @ chunk.phi
        # least-squares stationarity of the singular normal equations
        assert np.max(np.abs(a @ u - rhs)) <= 1e-8


class TestReweighting:
    def test_formula_on_known_residuals(self):
        y = np.array([[3.0, 4.0], [0.0, 0.0]])
        b = np.ones((2, 1))
        w = np.zeros((1, 2))
        k = compute_reweights(y, b, w, 1e-6)
        assert k[0] == pytest.approx(1.0 / 5.0, rel=1e-12)
        assert k[1] == pytest.approx(1e6, rel=1e-12)

    def test_floor_applies_only_to_tiny_rows(self):
        y = np.array([[1e-9], [2.0]])
        k = compute_reweights(y, np.zeros((2, 1)), np.zeros((1, 1)), 1e-6)
        assert k[0] == pytest.approx(1e6)
        assert k[1] == pytest.approx(0.5)

    def test_irls_alternation_descends(self, small_hyper):
        rng = np.random.default_rng(17)
        h = small_hyper
        state, stats, *_ = committed_history(rng, h, 2, 9)
        chunk = random_round_data(rng, 12, h.m, h.c, h.f)
        b = random_codes(rng, 12, h.r)
        state.w = rng.normal(scale=0.5, size=(h.r, h.c))
        values = [true_tag_objective(state, stats, chunk, b)]
        for _ in range(7):
            k = compute_reweights(chunk.y, b, state.w, h.epsilon_norm)
            state.w = update_w(stats, chunk, b, k, h)
            values.append(true_tag_objective(state, stats, chunk, b))
        diffs = np.diff(values)
        assert np.all(diffs <= 1e-9), values


class TestCodeDescent:
    def test_single_bit_is_sign_of_q(self):
        h = Hyperparams(r=1, m=3, f=2, c=2, alpha=1.0)
        rng = np.random.default_rng(20)
        state = make_state(h)
        state.w = rng.normal(size=(1, 2))
        state.u = rng.normal(size=(1, 3))
        state.v = rng.normal(size=(1, 2))
        q = rng.normal(size=(10, 1))
        b0 = random_codes(rng, 10, 1)
        b = update_b_dcc(q, b0, state, np.ones(10))
        assert np.array_equal(b[:, 0], np.where(q[:, 0] >= 0, 1.0, -1.0))

    def test_decoupled_terms_give_sign_of_projection(self):
        # with the quadratic couplings switched off the update reduces to the
        # sign of the hash-projection image, and zeros resolve to +1
        h = Hyperparams(r=3, m=4, f=2, c=2, beta=0.0, theta=0.0, mu=2.0)
        rng = np.random.default_rng(21)
        state = make_state(h)
        state.p = rng.normal(size=(h.m, h.r))
        state.p[:, 2] = 0.0  # forces a zero column in Q
        chunk = random_round_data(rng, 7, h.m, h.c, h.f)
        k = np.ones(7)
        q = assemble_q(chunk, state, k)
        b = update_b_dcc(q, random_codes(rng, 7, h.r), state, k)
        want = np.where(chunk.phi @ state.p >= 0, 1.0, -1.0)
        assert np.array_equal(b, want)
        assert np.all(b[:, 2] == 1.0)

    def test_every_bit_update_non_increasing(self, small_hyper):
        rng = np.random.default_rng(22)
        h = small_hyper
        state = make_state(h)
        state.w = rng.normal(size=(h.r, h.c))
        state.u = rng.normal(size=(h.r, h.m))
        state.v = rng.normal(size=(h.r, h.f))
        chunk = random_round_data(rng, 15, h.m, h.c, h.f)
        k = rng.uniform(0.2, 2.0, size=15)
        q = assemble_q(chunk, state, k)
        b = random_codes(rng, 15, h.r)
        prev = code_subproblem_value(b, q, state, k)
        for _ in range(3):
            for l in range(h.r):
                b[:, l] = dcc_bit_column(q, b, l, state, k)
                cur = code_subproblem_value(b, q, state, k)
                assert cur <= prev + 1e-9
                prev = cur

    def converged_instance(self, seed, n=4, r=3):
        h = Hyperparams(r=r, m=5, f=3, c=4, alpha=1.0, beta=0.5, theta=0.4,
                        mu=3.0, dcc_sweeps=1)
        rng = np.random.default_rng(seed)
        state = make_state(h)
        state.w = rng.normal(scale=0.3, size=(r, h.c))
        state.u = rng.normal(scale=0.3, size=(r, h.m))
        state.v = rng.normal(scale=0.3, size=(r, h.f))
        state.p = rng.normal(size=(h.m, r))
        chunk = random_round_data(rng, n, h.m, h.c, h.f)
        k = rng.uniform(0.5, 1.5, size=n)
        q = assemble_q(chunk, state, k)
        b = random_codes(rng, n, r)
        for _ in range(50):
            nxt = update_b_dcc(q, b, state, k)
            if np.array_equal(nxt, b):
                break
            b = nxt
        return h, state, q, b, k

    def test_fixed_point_is_columnwise_optimal(self):
        h, state, q, b, k = self.converged_instance(seed=23)
        n = b.shape[0]
        base = code_subproblem_value(b, q, state, k)
        for l in range(h.r):
            for pattern in range(2 ** n):
                trial = b.copy()
                trial[:, l] = [
                    1.0 if (pattern >> i) & 1 else -1.0 for i in range(n)]
                val = code_subproblem_value(trial, q, state, k)
                assert base <= val + 1e-9

    def test_beats_random_code_matrices(self):
        h, state, q, b, k = self.converged_instance(seed=24)
        rng = np.random.default_rng(25)
        base = code_subproblem_value(b, q, state, k)
        for _ in range(1000):
            trial = random_codes(rng, b.shape[0], h.r)
            assert base <= code_subproblem_value(trial, q, state, k) + 1e-9


class TestRunRound:
    def test_smoke_and_postconditions(self, small_hyper):
        rng = np.random.default_rng(30)
        state = make_state(small_hyper)
        stats = AccumStats.zeros(small_hyper)
        chunk = random_round_data(rng, 10, small_hyper.m, small_hyper.c,
                                  small_hyper.f)
        block, trace = run_round(state, stats, chunk, seed=0)
        assert block.dense.shape == (10, small_hyper.r)
        assert set(np.unique(block.dense)) <= {-1, 1}
        assert stats.rounds_committed == 1
        assert state.round_index == 1
        assert state.total_seen == 10
        assert len(trace) == small_hyper.iters
        assert np.all(np.isfinite(trace))

    def test_deterministic_for_fixed_seed(self, small_hyper):
        rng = np.random.default_rng(31)
        chunk = random_round_data(rng, 12, small_hyper.m, small_hyper.c,
                                  small_hyper.f)
        outs = []
        for _ in range(2):
            state = make_state(small_hyper)
            stats = AccumStats.zeros(small_hyper)
            block, trace = run_round(state, stats, chunk, seed=5)
            outs.append((block.dense.copy(), np.array(trace),
                         state.p.copy()))
        assert np.array_equal(outs[0][0], outs[1][0])
        assert np.array_equal(outs[0][1], outs[1][1])
        assert np.array_equal(outs[0][2], outs[1][2])

    def test_trace_monotone_without_reweighting(self):
        # with the tag term off every step exactly minimizes its block of the
        # surrogate, so the per-iteration trace can never increase
        h = Hyperparams(r=4, m=6, f=3, c=5, alpha=2.0, beta=0.5, theta=0.7,
                        mu=1.3, iters=6, dcc_sweeps=2, tag_regression=False)
        rng = np.random.default_rng(32)
        state = make_state(h)
        stats = AccumStats.zeros(h)
        chunk = random_round_data(rng, 14, h.m, h.c, h.f)
        _, trace = run_round(state, stats, chunk, seed=2)
        assert np.all(np.diff(trace) <= 1e-9), trace

    def test_second_round_extends_history(self, small_hyper):
        rng = np.random.default_rng(33)
        state = make_state(small_hyper)
        stats = AccumStats.zeros(small_hyper)
        c1_seen = []
        for _ in range(2):
            chunk = random_round_data(rng, 8, small_hyper.m, small_hyper.c,
                                      small_hyper.f)
            run_round(state, stats, chunk, seed=1)
            c1_seen.append(np.trace(stats.c1))
        assert stats.rounds_committed == 2
        # trace of C1 counts committed rows times bits
        assert c1_seen[0] == pytest.approx(8 * small_hyper.r)
        assert c1_seen[1] == pytest.approx(16 * small_hyper.r)

    def test_nonfinite_input_rolls_back(self, small_hyper):
        rng = np.random.default_rng(34)
        state = make_state(small_hyper)
        stats = AccumStats.zeros(small_hyper)
        good = random_round_data(rng, 8, small_hyper.m, small_hyper.c,
                                 small_hyper.f)
        run_round(state, stats, good, seed=0)
        before = {n: getattr(state, n).copy() for n in ("w", "u", "v", "p")}
        bad = random_round_data(rng, 8, small_hyper.m, small_hyper.c,
                                small_hyper.f)
        bad.phi[3, 2] = np.nan
        with pytest.raises(RoundAborted):
            run_round(state, stats, bad, seed=1)
        for name, a in before.items():
            assert np.array_equal(getattr(state, name), a)
        assert stats.rounds_committed == 1
        assert state.round_index == 1

    def test_round_one_warm_start_is_small(self, small_hyper):
        state = make_state(small_hyper)
        chunk = random_round_data(np.random.default_rng(35), 6,
                                  small_hyper.m, small_hyper.c,
                                  small_hyper.f)
        init_round(chunk, state, seed=9)
        assert np.max(np.abs(state.w)) < 0.1
        assert np.std(state.w) == pytest.approx(0.01, rel=0.5)

    def test_trace_matches_manual_replay(self):
        # replay the exact iteration schedule by hand and require the same
        # trace, codes and projections as run_round
        h = Hyperparams(r=4, m=6, f=3, c=5, alpha=2.0, beta=0.5, theta=0.7,
                        mu=1.3, iters=3, dcc_sweeps=2)
        rng = np.random.default_rng(36)
        chunk = random_round_data(rng, 9, h.m, h.c, h.f)

        state = make_state(h)
        stats = AccumStats.zeros(h)
        block, trace = run_round(state, stats, chunk, seed=3)

        manual = make_state(h)
        mstats = AccumStats.zeros(h)
        b, k = init_round(chunk, manual, seed=3)
        manual_trace = []
        for _ in range(h.iters):
            manual.u = update_u(mstats, chunk, b, h)
            manual.p = update_p(mstats, chunk, b, h)
            manual.v = update_v(mstats, chunk, b, h)
            k = compute_reweights(chunk.y, b, manual.w, h.epsilon_norm)
            manual.w = update_w(mstats, chunk, b, k, h)
            q = assemble_q(chunk, manual, k)
            b = update_b_dcc(q, b, manual, k)
            manual_trace.append(
                objective_value(manual, mstats, chunk, b, k))
        assert np.array_equal(block.dense.astype(float), b)
        assert manual_trace == trace
        assert np.array_equal(state.p, manual.p)
