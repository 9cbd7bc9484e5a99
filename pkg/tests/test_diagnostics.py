import numpy as np
import pytest

from nasolve.core import NonlinearProblem, SolverConfig
from nasolve.diagnostics import (
    InsufficientTail,
    MissingGroundTruth,
    OutOfRange,
    PairKind,
    ZeroStep,
    classify_pair,
    compatibility_monitor,
    diagnose_run,
    estimate_rate,
    estimate_root_order,
    nu_ratio,
    split_error,
    theta_gain,
)
from nasolve.harness import with_overrides
from nasolve.linalg import DenseJacobian
from nasolve.problems import MultipolySpec, multipoly
from nasolve.solvers import newton_anderson_solve, newton_solve


def toy_problem(n=4):
    # known root at 0 with null direction e_n
    basis = np.zeros((n, 1))
    basis[-1, 0] = 1.0
    return NonlinearProblem(
        name="toy",
        dim=n,
        residual=lambda x: x.copy(),
        jacobian=lambda x: DenseJacobian(np.eye(n)),
        start=np.ones(n),
        known_root=np.zeros(n),
        null_basis=basis,
    )


class TestSplitError:
    def test_coordinate_projection(self):
        p = toy_problem(4)
        s = split_error(np.ones(4), p)
        np.testing.assert_allclose(s.pn, [0, 0, 0, 1.0])
        np.testing.assert_allclose(s.pr, [1.0, 1.0, 1.0, 0])
        assert s.sigma == pytest.approx(np.sqrt(3.0))

    def test_zero_error_gives_infinite_sigma(self):
        s = split_error(np.zeros(4), toy_problem(4))
        assert np.all(s.pn == 0) and np.all(s.pr == 0)
        assert s.sigma == np.inf

    def test_random_basis_pythagoras_and_idempotence(self):
        rng = np.random.default_rng(12)
        n, m = 10, 3
        q, _ = np.linalg.qr(rng.standard_normal((n, m)))
        p = NonlinearProblem(
            name="toy", dim=n, residual=lambda x: x.copy(),
            jacobian=lambda x: DenseJacobian(np.eye(n)),
            start=np.ones(n), known_root=np.zeros(n), null_basis=q,
        )
        for _ in range(50):
            e = rng.standard_normal(n)
            s = split_error(e, p)
            np.testing.assert_allclose(s.pn + s.pr, e, atol=1e-12)
            assert abs(np.dot(s.pn, s.pr)) <= 1e-10 * np.linalg.norm(s.pn) * np.linalg.norm(s.pr)
            assert abs(np.dot(e, e) - (s.pn @ s.pn + s.pr @ s.pr)) <= 1e-12 * max(1.0, e @ e)
            # idempotence: projecting the null component changes nothing
            s2 = split_error(s.pn, p)
            np.testing.assert_allclose(s2.pn, s.pn, atol=1e-12)

    def test_missing_truth_raises(self):
        p = NonlinearProblem(
            name="nt", dim=2, residual=lambda x: x.copy(),
            jacobian=lambda x: DenseJacobian(np.eye(2)), start=np.ones(2),
        )
        with pytest.raises(MissingGroundTruth):
            split_error(np.ones(2), p)


class TestThetaGain:
    def test_zero_gamma_is_one(self):
        assert theta_gain(np.array([1.0, 2.0]), np.array([0.5, 0.5]), 0.0) == 1.0

    def test_orthogonal_pair_half_gamma(self):
        t = theta_gain(np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0.5)
        assert t == pytest.approx(np.sqrt(2.0) / 2.0)

    def test_colinear_cancellation(self):
        w = np.array([2.0, 0.0])
        wp = np.array([1.0, 0.0])
        from nasolve.linalg import lstsq_gamma

        assert theta_gain(w, wp, lstsq_gamma(w, wp)) == pytest.approx(0.0, abs=1e-15)

    def test_zero_step_raises(self):
        with pytest.raises(ZeroStep):
            theta_gain(np.zeros(2), np.ones(2), 0.5)

    def test_raw_gamma_minimizes_over_grid(self):
        from nasolve.linalg import lstsq_gamma

        rng = np.random.default_rng(4)
        w = rng.standard_normal(8)
        wp = rng.standard_normal(8)
        g = lstsq_gamma(w, wp)
        base = theta_gain(w, wp, g)
        for cand in np.arange(-2.0, 2.0, 1e-3):
            assert base <= theta_gain(w, wp, cand) + 1e-12


class TestNuRatio:
    def test_equal_products(self):
        assert nu_ratio(0.5, 1.0, 1.0).nu == pytest.approx(1.0)

    def test_vanishing_product(self):
        assert nu_ratio(0.0, 1.0, 1.0).nu == 0.0
        assert nu_ratio(0.5, 0.0, 1.0).nu == 0.0

    def test_hand_value(self):
        assert nu_ratio(1.0 / 3.0, 1.0, 4.0).nu == pytest.approx(0.5)

    def test_bounded_by_one(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            v = nu_ratio(rng.uniform(-2, 2), rng.uniform(0, 3), rng.uniform(0, 3)).nu
            assert 0.0 <= v <= 1.0

    def test_exactly_r_after_scaling_branch(self):
        # with the update norms substituted, the scaled coefficient makes the
        # balance hit r exactly
        from nasolve.solvers import gamma_safeguard

        rng = np.random.default_rng(21)
        fired = 0
        for _ in range(500):
            gamma = rng.uniform(-2.5, 0.999)
            wn, wp, r = rng.uniform(0.1, 10), rng.uniform(0.1, 10), rng.uniform(0.05, 0.95)
            dec = gamma_safeguard(gamma, wn, wp, r)
            if dec.took_newton_step or dec.lam == 1.0:
                continue
            fired += 1
            nu = nu_ratio(dec.lam * gamma, wn, wp).nu
            assert nu == pytest.approx(r, abs=1e-10)
            assert nu <= 1.5 * r
        assert fired > 50

    def test_bounded_by_r_on_instrumented_runs(self):
        # slack 1.5 covers the asymptotic constants in the balance bound
        for k in (2, 3):
            p = multipoly(MultipolySpec(n=2000, k=k))
            cfg = with_overrides(SolverConfig(), r=0.7)
            out = newton_anderson_solve(p, cfg, safeguard=True)
            assert out.converged
            fired = 0
            for prev, rec in zip(out.trace, out.trace[1:]):
                if rec.lam < 1.0:
                    fired += 1
                    nu = nu_ratio(rec.gamma_used, rec.step_norm, prev.step_norm).nu
                    assert nu <= 1.5 * cfg.r
            assert fired > 0


class TestClassifyPair:
    def test_pure_null_errors_make_n_pair(self):
        p = toy_problem(4)
        e_k = np.array([0.0, 0.0, 0.0, 0.1])
        e_km1 = np.array([0.0, 0.0, 0.0, 0.2])
        # Newton-like updates halve the null component
        w_next, w_k = -0.5 * e_k, -0.5 * e_km1
        label = classify_pair(split_error(e_k, p), split_error(e_km1, p), w_next, w_k, p)
        assert label.kind is PairKind.N_pair
        assert label.strong

    def test_pure_range_error_makes_r_pair(self):
        p = toy_problem(4)
        e_k = np.array([0.01, 0.0, 0.0, 0.0])
        e_km1 = np.array([0.02, 0.0, 0.0, 0.0])
        # updates whose compensated null part dominates the (zero) null error
        w_next = -e_k + np.array([0.0, 0.0, 0.0, 1e-4])
        w_k = -e_km1 + np.array([0.0, 0.0, 0.0, 2e-4])
        label = classify_pair(split_error(e_k, p), split_error(e_km1, p), w_next, w_k, p)
        assert label.kind is PairKind.R_pair

    def test_mixed_pair(self):
        p = toy_problem(4)
        e_k = np.array([0.0, 0.0, 0.0, 0.1])       # null side at k
        e_km1 = np.array([0.02, 0.0, 0.0, 0.0])    # range side at k-1
        w_next = -0.5 * e_k
        w_k = -e_km1 + np.array([0.0, 0.0, 0.0, 2e-4])
        label = classify_pair(split_error(e_k, p), split_error(e_km1, p), w_next, w_k, p)
        assert label.kind is PairKind.NR_pair

    def test_late_iterations_on_multipoly_are_n_pairs(self):
        p = multipoly(MultipolySpec(n=100, k=2))
        out = newton_anderson_solve(
            p, with_overrides(SolverConfig(), r=0.7), safeguard=True, keep_history=True
        )
        assert out.converged
        report = diagnose_run(p, out)
        late = [s.pair for s in report.steps if s.pair is not None][-3:]
        assert late and all(lbl.kind is PairKind.N_pair for lbl in late)


class TestCompatibilityMonitor:
    def test_zero_rhs_with_positive_lhs_is_false(self):
        from nasolve.core import IterationRecord

        p = toy_problem(2)
        splits = [split_error(np.ones(2), p), split_error(np.array([0.0, 0.5]), p)]
        rec = IterationRecord(k=0, res_norm=1, step_norm=1, gamma_raw=0, lam=1,
                              gamma_used=0, theta=0.0, step_kind="anderson")
        assert compatibility_monitor([rec], splits) == [False]

    def test_zero_lhs_is_true(self):
        from nasolve.core import IterationRecord

        p = toy_problem(2)
        splits = [split_error(np.ones(2), p), split_error(np.array([0.5, 0.0]), p)]
        rec = IterationRecord(k=0, res_norm=1, step_norm=1, gamma_raw=0, lam=1,
                              gamma_used=0, theta=0.0, step_kind="anderson")
        assert compatibility_monitor([rec], splits) == [True]

    def test_strong_n_pair_steps_compatible_on_multipoly(self):
        p = multipoly(MultipolySpec(n=100, k=2))
        out = newton_anderson_solve(
            p, with_overrides(SolverConfig(), r=0.7), safeguard=True, keep_history=True
        )
        report = diagnose_run(p, out, C=2.0)
        flagged = [
            s for s in report.steps
            if s.pair is not None and s.pair.kind is PairKind.N_pair and s.pair.strong
        ]
        assert flagged and all(s.compatible for s in flagged)


class TestRateEstimation:
    def test_exact_geometric(self):
        assert estimate_rate([2.0 ** -k for k in range(10)]) == pytest.approx(0.5)

    def test_zeros_rejected(self):
        with pytest.raises(InsufficientTail):
            estimate_rate([0.0, 0.0, 0.0, 0.0, 0.0])

    def test_too_short_rejected(self):
        with pytest.raises(InsufficientTail):
            estimate_rate([1.0, 0.5, 0.25])

    def test_newton_multipoly_rate_recovery(self):
        # the null component contracts by d/(d+1) per step
        p = multipoly(MultipolySpec(n=100, k=3))
        out = newton_solve(p, SolverConfig(), keep_history=True)
        norms = [np.linalg.norm(split_error(x, p).pn) for x in out.iterate_history]
        rho = estimate_rate([v for v in norms if v > 1e-12])
        assert rho == pytest.approx(2.0 / 3.0, abs=0.05)

    def test_root_order_inversion(self):
        assert estimate_root_order(0.5) == pytest.approx(1.0)
        assert estimate_root_order(2.0 / 3.0) == pytest.approx(2.0)

    def test_root_order_out_of_range(self):
        for rho in (0.0, 1.0, -0.5, 2.0):
            with pytest.raises(OutOfRange):
                estimate_root_order(rho)

    def test_high_order_recovery(self):
        p = multipoly(MultipolySpec(n=100, k=7))
        out = newton_solve(p, SolverConfig(), keep_history=True)
        norms = [np.linalg.norm(split_error(x, p).pn) for x in out.iterate_history]
        rho = estimate_rate([v for v in norms if v > 1e-12])
        assert estimate_root_order(rho) == pytest.approx(6.0, abs=0.5)


class TestDiagnoseRun:
    def test_report_shape_and_estimates(self):
        p = multipoly(MultipolySpec(n=100, k=2))
        out = newton_solve(p, SolverConfig(), keep_history=True)
        report = diagnose_run(p, out)
        assert len(report.steps) == out.iterations
        assert report.rate == pytest.approx(0.5, abs=0.05)
        assert report.root_order == pytest.approx(1.0, abs=0.5)
        assert report.steps[0].pair is None  # no previous iterate at k = 0

    def test_requires_history(self):
        p = multipoly(MultipolySpec(n=20, k=2))
        out = newton_solve(p, SolverConfig())
        with pytest.raises(MissingGroundTruth):
            diagnose_run(p, out)
