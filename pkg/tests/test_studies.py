from fractions import Fraction

import numpy as np
import pytest

from ordersafe.errors import ContractViolationError, DegenerateVarianceError
from ordersafe.geometry import Metric
from ordersafe.studies import (
    CS_TABLE5,
    CS_TABLE6,
    ContingencyTable2xK,
    MEAN_ANGLES_DEG,
    PowerScenario,
    build_stochastic_order,
    doubled_table,
    power_grid,
    run_power_scenario,
    silvapulle_case,
    simulation_means,
)
from ordersafe.testing import Conclusion, dt_type_a, dt_type_b, safe_test


class TestSimulationMeans:
    def test_ring_geometry(self):
        means = simulation_means()
        np.testing.assert_allclose(means["theta0"], [0.0, 0.0])
        for label, deg in MEAN_ANGLES_DEG.items():
            vec = means[label]
            assert np.linalg.norm(vec) == pytest.approx(0.75, abs=1e-12)
            angle = np.degrees(np.arctan2(vec[1], vec[0]))
            assert angle == pytest.approx(deg, abs=1e-10)

    def test_region_classification(self):
        """First three non-null means lie in the closed orthant, last three outside."""
        means = simulation_means()
        for label in ("theta1", "theta2", "theta3"):
            assert np.all(means[label] >= -1e-12)
        for label in ("theta4", "theta5", "theta6"):
            assert np.any(means[label] < 0)


class TestStochasticOrderConstruction:
    def test_pair_difference_estimate_from_exact_fractions(self):
        problem = build_stochastic_order(CS_TABLE5)
        expected = [
            float(Fraction(5, 17) - Fraction(3, 15)),
            float(Fraction(16, 17) - Fraction(11, 15)),
        ]
        np.testing.assert_allclose(problem.w_n, expected, atol=1e-12)
        np.testing.assert_allclose(problem.w_n, [0.094, 0.208], atol=5e-4)

    def test_reduced_covariance_matches_reference_entries(self):
        problem = build_stochastic_order(CS_TABLE5)
        v = problem.v_n
        assert v[0, 0] == pytest.approx(0.75, abs=0.005)
        assert v[0, 1] == pytest.approx(0.16, abs=0.005)
        assert v[1, 1] == pytest.approx(0.53, abs=0.005)
        # exact pooled form: scale * [[a(1-a), ab], [ab, b(1-b)]] with
        # a = 8/32, b = 5/32, scale = 32/17 + 32/15
        a, b = 0.25, 5.0 / 32.0
        scale = 32.0 / 17.0 + 32.0 / 15.0
        np.testing.assert_allclose(
            v, scale * np.array([[a * (1 - a), a * b], [a * b, b * (1 - b)]]),
            atol=1e-12,
        )

    def test_shared_margins_give_identical_covariance(self):
        v5 = build_stochastic_order(CS_TABLE5).v_n
        v6 = build_stochastic_order(CS_TABLE6).v_n
        np.testing.assert_allclose(v5, v6, atol=1e-12)

    def test_reversed_first_difference_in_second_table(self):
        problem = build_stochastic_order(CS_TABLE6)
        assert problem.w_n[0] == pytest.approx(-8.0 / 15.0, abs=1e-12)
        assert problem.w_n[0] < -0.5
        assert problem.w_n[1] > 0

    def test_block_diagonal_scaling(self):
        problem = build_stochastic_order(CS_TABLE5)
        sn = problem.sigma_n.sigma
        np.testing.assert_allclose(sn[:2, 2:], 0.0)
        np.testing.assert_allclose(sn[2:, :2], 0.0)
        np.testing.assert_allclose(sn[:2, :2] / (32.0 / 17.0), sn[2:, 2:] / (32.0 / 15.0))

    def test_degenerate_pooled_category_raises(self):
        table = ContingencyTable2xK(control=(0, 5, 5), treatment=(0, 3, 3))
        with pytest.raises(DegenerateVarianceError):
            build_stochastic_order(table)

    def test_general_k_accepts_four_categories(self):
        table = ContingencyTable2xK(control=(4, 3, 2, 1), treatment=(1, 2, 3, 4))
        problem = build_stochastic_order(table)
        assert problem.theta_hat.shape == (6,)
        assert problem.restriction.shape == (3, 6)
        # reduction still feeds the test pipeline
        t = dt_type_a(problem.statistic(), problem.subspace(), problem.cone())
        assert t >= 0.0


class TestDoubling:
    def test_counts_doubled(self):
        doubled = doubled_table(CS_TABLE5)
        assert doubled.control == (10, 22, 2)
        assert doubled.treatment == (6, 16, 8)

    def test_zero_table_fixed_point(self):
        table = ContingencyTable2xK(control=(0, 0), treatment=(0, 0))
        assert doubled_table(table).control == (0, 0)

    def test_invariants_of_the_construction(self):
        base = build_stochastic_order(CS_TABLE5)
        dbl = build_stochastic_order(doubled_table(CS_TABLE5))
        np.testing.assert_allclose(base.w_n, dbl.w_n, atol=1e-14)
        assert dbl.n == 2 * base.n
        # per-observation pooled covariance unchanged, so the n-scaled
        # reduction is identical while the statistic doubles
        np.testing.assert_allclose(base.v_n, dbl.v_n, atol=1e-12)
        t_base = dt_type_a(base.statistic(), base.subspace(), base.cone())
        t_dbl = dt_type_a(dbl.statistic(), dbl.subspace(), dbl.cone())
        assert t_dbl == pytest.approx(2 * t_base, abs=1e-9)


class TestCaseStudyPipelines:
    def test_table5_certificate_without_rejection(self):
        problem = build_stochastic_order(CS_TABLE5)
        out = safe_test(problem.statistic(), problem.subspace(), problem.cone(),
                        alpha=0.05, gamma=0.05)
        assert out.conclusion is Conclusion.DO_NOT_REJECT
        assert (out.d1, out.d2) == (1, 0)
        assert out.original.p_value == pytest.approx(0.128, abs=0.002)
        # the estimate satisfies the ordering exactly, so the auxiliary
        # statistic is zero and its p-value is total mass
        assert out.auxiliary.statistic == pytest.approx(0.0, abs=1e-12)
        assert out.auxiliary.p_value == pytest.approx(1.0)

    def test_table6_likely_wrong_direction(self):
        problem = build_stochastic_order(CS_TABLE6)
        out = safe_test(problem.statistic(), problem.subspace(), problem.cone(),
                        alpha=0.05, gamma=0.05)
        assert out.conclusion is Conclusion.LIKELY_TYPE_III
        assert (out.d1, out.d2) == (0, 1)
        assert out.original.statistic == pytest.approx(6.5537, abs=1e-3)
        assert out.auxiliary.statistic == pytest.approx(12.0889, abs=1e-3)
        assert out.original.p_value == pytest.approx(0.0162, abs=5e-4)
        assert out.auxiliary.p_value == pytest.approx(0.00075, abs=5e-5)

    def test_doubled_table5_safe_rejection(self):
        problem = build_stochastic_order(doubled_table(CS_TABLE5))
        out = safe_test(problem.statistic(), problem.subspace(), problem.cone(),
                        alpha=0.05, gamma=0.05)
        assert out.conclusion is Conclusion.SAFE_REJECT
        assert out.original.p_value == pytest.approx(0.031, abs=0.002)

    def test_silvapulle_fixture(self):
        stat, anchors = silvapulle_case()
        assert stat.n == 5
        np.testing.assert_allclose(stat.s_n, [-3.0, -2.0])
        assert anchors["t_n"] == 12.89

    def test_silvapulle_with_independent_covariance(self):
        """With no correlation the estimate falls in the polar cone."""
        from ordersafe.geometry import ConeSpec, LinearSubspace

        stat = silvapulle_case()[0]
        indep = Metric(np.eye(2))
        flat = type(stat)(s_n=stat.s_n, sigma_n=indep, n=stat.n)
        assert dt_type_a(flat, LinearSubspace.zero(2), ConeSpec.orthant(2)) == 0.0


class TestPowerHarness:
    def scenario(self, theta, reps=20_000, seed=99, gamma=0.1, n=20):
        return PowerScenario(
            theta=np.asarray(theta, dtype=float), sigma=Metric(np.eye(2)),
            n=n, alpha=0.05, gamma=gamma, replications=reps, seed=seed,
        )

    def test_null_cell_matches_attained_level(self):
        result = run_power_scenario(self.scenario([0.0, 0.0], reps=50_000))
        # the composite region at the plain critical value attains 0.0483
        assert result.power_dt == pytest.approx(0.05, abs=0.005)
        assert result.power_safe == pytest.approx(0.0483, abs=0.005)

    def test_reproducible_given_seed(self):
        a = run_power_scenario(self.scenario([0.3, -0.2], reps=30_000))
        b = run_power_scenario(self.scenario([0.3, -0.2], reps=30_000))
        assert (a.power_dt, a.power_safe) == (b.power_dt, b.power_safe)

    def test_worker_count_does_not_change_results(self):
        serial = run_power_scenario(self.scenario([0.2, 0.4], reps=40_000), workers=1)
        threaded = run_power_scenario(self.scenario([0.2, 0.4], reps=40_000), workers=4)
        assert (serial.power_dt, serial.power_safe) == (threaded.power_dt, threaded.power_safe)

    def test_single_replication_degenerate(self):
        result = run_power_scenario(self.scenario([0.0, 0.0], reps=1))
        assert result.power_dt in (0.0, 1.0)
        assert result.se == 0.0

    def test_wrong_direction_mean_suppressed(self):
        theta = 0.75 * np.array([np.cos(np.radians(-60)), np.sin(np.radians(-60))])
        result = run_power_scenario(self.scenario(theta, reps=50_000, n=50))
        assert result.power_dt == pytest.approx(0.724, abs=0.01)
        assert result.power_safe == pytest.approx(0.002, abs=0.004)

    def test_monotone_safety_pattern(self):
        """Outside the cone the plain test gains power with n while the
        composite loses it. The borderline -15 degree mean is excluded: its
        composite power rises before the certificate catches up (0.528,
        0.711, 0.635 in the reference table), so only the two means deeper
        outside the cone are genuinely monotone."""
        means = simulation_means()
        for label in ("theta4", "theta5", "theta6"):
            results = [
                run_power_scenario(self.scenario(means[label], reps=30_000, n=n, seed=5))
                for n in (10, 20, 50)
            ]
            dt = [r.power_dt for r in results]
            assert dt[0] < dt[1] < dt[2]
            if label != "theta4":
                safe = [r.power_safe for r in results]
                assert safe[0] > safe[1] > safe[2]

    def test_grid_rows_schema(self):
        rows = power_grid(replications=2_000, seed=1, gammas=(0.1,), ns=(10,),
                          mean_labels=("theta0", "theta1"))
        assert len(rows) == 2
        assert set(rows[0]) == {
            "mean_label", "gamma", "n", "power_dt", "power_safe",
            "se", "replications", "seed",
        }

    def test_invalid_scenarios_rejected(self):
        with pytest.raises(ContractViolationError):
            PowerScenario(theta=np.zeros(3), sigma=Metric(np.eye(2)), n=10,
                          alpha=0.05, gamma=0.1, replications=10, seed=0)
        with pytest.raises(ContractViolationError):
            self.scenario([0.0, 0.0], reps=0)
