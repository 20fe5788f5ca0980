import numpy as np
import pytest

from bayeseval.bootstrap import (
    ConvergenceDistribution,
    ResamplePlan,
    ResampleScheme,
    convergence_at_n,
    convergence_distributions,
    gold_table,
    resample,
    tau_curve,
    tau_curves,
    worst_case_trajectory,
)
from bayeseval.errors import AllTiedError, InputError, MethodUndefinedError
from bayeseval.methods import parse_method
from bayeseval.model import validate_matrix
from bayeseval.ranking import ScoredModel, kendall_tau_b, rank_without_ci
from bayeseval.simulate import reference_cohort, sample_trials


def small_cohort(n_models=4, m=6, n=12, seed=0):
    cohort = reference_cohort()[:: 11 // n_models][:n_models]
    return {
        c.model_id: sample_trials(c, n, seed=seed + i)
        for i, c in enumerate(cohort)
    }


def separated_cohort(m=4, n=10):
    """Three models whose ranking is identical at every prefix of any resample."""
    hi = validate_matrix(np.ones((m, n), dtype=int), 2)
    mid_cells = np.zeros((m, n), dtype=int)
    mid_cells[: m // 2] = 1
    mid = validate_matrix(mid_cells, 2)
    lo = validate_matrix(np.zeros((m, n), dtype=int), 2)
    return {"hi": hi, "mid": mid, "lo": lo}


class TestResample:
    def test_deterministic(self):
        mx = sample_trials(reference_cohort()[2], 15, seed=3)
        plan = ResamplePlan(ResampleScheme.ROW, replicates=10, seed=5)
        a = resample(mx, plan, 4)
        b = resample(mx, plan, 4)
        assert np.array_equal(a.cells, b.cells)
        assert not np.array_equal(a.cells, resample(mx, plan, 5).cells)
        assert not np.array_equal(a.cells, resample(mx, plan, 4, stream=1).cells)

    def test_column_scheme_copies_whole_columns(self):
        cells = np.arange(12).reshape(3, 4) % 2
        cells[0] = [0, 1, 0, 1]
        cells[1] = [1, 1, 0, 0]
        cells[2] = [0, 0, 1, 1]
        mx = validate_matrix(cells, 2)
        plan = ResamplePlan("column", replicates=1, seed=2)
        out = resample(mx, plan, 0)
        src = {tuple(col) for col in cells.T}
        assert all(tuple(col) in src for col in out.cells.T)

    def test_column_identical_columns_reproduce_prefix(self):
        cells = np.tile([[1], [0], [1]], (1, 6))
        mx = validate_matrix(cells, 2)
        out = resample(mx, ResamplePlan("column", 1, seed=9), 0)
        assert np.array_equal(out.cells, mx.cells)

    def test_row_constant_matrix_unchanged(self):
        mx = validate_matrix(np.ones((3, 5), dtype=int), 2)
        out = resample(mx, ResamplePlan("row", 1, seed=1), 0)
        assert np.array_equal(out.cells, mx.cells)

    def test_row_scheme_resamples_within_rows(self):
        cells = np.array([[0, 0, 1, 1], [1, 1, 1, 0]])
        mx = validate_matrix(cells, 2)
        out = resample(mx, ResamplePlan("row", 1, seed=4), 0)
        for row_out, row_src in zip(out.cells, cells):
            assert set(row_out).issubset(set(row_src))

    def test_budget_validation(self):
        mx = validate_matrix([[1, 0]], 2)
        with pytest.raises(InputError):
            resample(mx, ResamplePlan("row", 1, seed=0, n_max=5), 0)
        with pytest.raises(InputError):
            ResamplePlan("row", replicates=0)


class TestGold:
    def test_gold_is_full_budget_posterior_ranking(self):
        mats = small_cohort(n_models=3, n=10)
        from bayeseval.bayes import evaluate_performance

        scored = [
            ScoredModel(mid, evaluate_performance(mx).mu, 0.0)
            for mid, mx in mats.items()
        ]
        assert gold_table(mats).ranks() == rank_without_ci(scored).ranks()

    def test_tau_of_gold_method_on_source_data_is_one(self):
        mats = small_cohort(n_models=4, n=12)
        gold = gold_table(mats)
        method = parse_method("bayes")
        scores = [method.score(mx) for mx in mats.values()]
        ranking = rank_without_ci(
            [ScoredModel(mid, s) for mid, s in zip(mats, scores)]
        )
        ids = list(mats)
        tau = kendall_tau_b(gold.rank_vector(ids), ranking.rank_vector(ids))
        assert tau == 1.0

    def test_all_tied_gold_rejected(self):
        mx = validate_matrix([[1, 0], [0, 1]], 2)
        mats = {"a": mx, "b": mx}
        with pytest.raises(AllTiedError):
            tau_curve(mats, "bayes", ResamplePlan("row", 5, seed=0))


class TestTauCurves:
    def test_replicate_dual_route(self):
        # batched engine vs the public per-replicate path: resample(),
        # Method.score() on prefixes, kendall_tau_b vs gold
        mats = small_cohort(n_models=4, n=9, seed=11)
        plan = ResamplePlan("row", replicates=7, seed=21)
        methods = ["bayes", "pass@2", "naive^3", "gpass@2:1/2", "mgpass@2", "avg", "pass^2"]
        curves = tau_curves(mats, methods, plan)
        gold = gold_table(mats)
        ids = list(mats)
        gold_vec = gold.rank_vector(ids)
        for name in methods:
            method = parse_method(name)
            for n in range(max(1, method.min_trials), 10):
                taus = []
                for r in range(plan.replicates):
                    scored = []
                    for s, (mid, mx) in enumerate(mats.items()):
                        rx = resample(mx, plan, r, stream=s)
                        scored.append(ScoredModel(mid, method.score(rx.prefix(n))))
                    table = rank_without_ci(scored)
                    try:
                        taus.append(
                            kendall_tau_b(gold_vec, table.rank_vector(ids))
                        )
                    except AllTiedError:
                        pass
                point = curves[name].at(n)
                assert point.valid_replicates == len(taus)
                if taus:
                    assert abs(point.mean_tau - np.mean(taus)) < 1e-12

    def test_points_absent_below_min_trials(self):
        mats = small_cohort(n_models=3, n=8)
        curve = tau_curve(mats, "pass@4", ResamplePlan("column", 5, seed=2))
        assert curve.points[0].n == 4
        with pytest.raises(KeyError):
            curve.at(3)

    def test_method_undefined_beyond_budget(self):
        mats = small_cohort(n_models=3, n=8)
        with pytest.raises(MethodUndefinedError):
            tau_curve(mats, "pass@9", ResamplePlan("row", 5, seed=2))

    def test_deterministic_and_thread_invariant(self):
        mats = small_cohort(n_models=3, n=10, seed=5)
        plan = ResamplePlan("row", replicates=40, seed=33)
        a = tau_curves(mats, ["bayes", "pass@2"], plan)
        b = tau_curves(mats, ["bayes", "pass@2"], plan)
        c = tau_curves(mats, ["bayes", "pass@2"], plan, threads=4)
        assert a == b == c

    def test_separated_cohort_tau_is_one_everywhere(self):
        mats = separated_cohort()
        curves = tau_curves(mats, ["bayes", "avg"], ResamplePlan("row", 25, seed=0))
        for curve in curves.values():
            for p in curve.points:
                assert p.mean_tau == 1.0

    def test_schemes_statistically_close(self):
        mats = small_cohort(n_models=4, n=16, seed=19)
        pc = ResamplePlan("column", replicates=600, seed=3)
        pr = ResamplePlan("row", replicates=600, seed=3)
        col = tau_curve(mats, "bayes", pc)
        row = tau_curve(mats, "bayes", pr)
        for a, b in zip(col.points, row.points):
            gap = abs(a.mean_tau - b.mean_tau)
            band = 5 * np.hypot(a.stderr, b.stderr) + 1e-9
            assert gap <= band, (a.n, gap, band)


class TestConvergence:
    def test_total_separation_gives_point_mass_at_one(self):
        mats = separated_cohort()
        plan = ResamplePlan("row", replicates=50, seed=1)
        dist = convergence_at_n(mats, "bayes", plan)
        assert dist.counts[1] == 50
        assert dist.censored_count == 0
        assert dist.mean_converged == 1.0

    def test_mass_conservation_exact(self):
        mats = small_cohort(n_models=4, n=14, seed=2)
        for method in ("bayes", "pass@2"):
            dist = convergence_at_n(mats, method, ResamplePlan("row", 64, seed=7))
            assert int(dist.counts.sum()) + dist.censored_count == dist.replicates
            assert np.array_equal(dist.cdf, np.cumsum(dist.pmf))
            assert (np.diff(dist.cdf) >= 0).all()

    def test_replicate_dual_route(self):
        # histogram from the engine vs a scan over public per-replicate pieces
        mats = small_cohort(n_models=3, n=8, seed=4)
        plan = ResamplePlan("column", replicates=12, seed=13)
        method = parse_method("bayes")
        dist = convergence_at_n(mats, method, plan)
        gold = gold_table(mats)
        ids = list(mats)
        gold_ranks = gold.rank_vector(ids)
        expected = np.zeros(9, dtype=int)
        censored = 0
        for r in range(plan.replicates):
            resampled = [
                resample(mx, plan, r, stream=s) for s, mx in enumerate(mats.values())
            ]
            matches = []
            for n in range(1, 9):
                table = rank_without_ci(
                    [
                        ScoredModel(mid, method.score(rx.prefix(n)))
                        for mid, rx in zip(ids, resampled)
                    ]
                )
                matches.append(table.rank_vector(ids) == gold_ranks)
            if not matches[-1]:
                censored += 1
                continue
            n_star = 8
            while n_star > 1 and matches[n_star - 2]:
                n_star -= 1
            expected[n_star] += 1
        assert dist.counts[1:].tolist() == expected[1:].tolist()
        assert dist.censored_count == censored

    def test_multiple_methods_share_replicates(self):
        mats = small_cohort(n_models=3, n=10, seed=6)
        plan = ResamplePlan("row", replicates=30, seed=17)
        both = convergence_distributions(mats, ["bayes", "pass@2"], plan)
        solo = convergence_at_n(mats, "bayes", plan)
        assert both["bayes"].counts.tolist() == solo.counts.tolist()

    def test_report_shape(self):
        mats = separated_cohort()
        dist = convergence_at_n(mats, "bayes", ResamplePlan("row", 5, seed=0))
        rep = dist.to_report()
        assert rep["pmf"][0] == {"n": 1, "pmf": 1.0, "cdf": 1.0}
        assert rep["censored_mass"] == 0.0

    def test_ci_aware_flag(self):
        mats = small_cohort(n_models=3, n=8, seed=4)
        plan = ResamplePlan("column", replicates=8, seed=13)
        point = convergence_at_n(mats, "bayes", plan)
        # a tiny threshold reproduces point-ranking convergence; a huge one
        # ties everything so the (untied) gold is never matched
        near_point = convergence_at_n(mats, "bayes", plan, ci_z=1e-9)
        assert near_point.counts.tolist() == point.counts.tolist()
        assert near_point.censored_count == point.censored_count
        all_tied = convergence_at_n(mats, "bayes", plan, ci_z=1e9)
        assert all_tied.censored_count == plan.replicates

    def test_tau_points_flag_subset_onset(self):
        mats = small_cohort(n_models=3, n=8)
        curves = tau_curves(
            mats, ["pass@3", "naive^3", "bayes"], ResamplePlan("row", 6, seed=1)
        )
        pass3 = curves["pass@3"].points
        assert pass3[0].n == 3 and pass3[0].high_variance
        assert not any(p.high_variance for p in pass3[1:])
        assert not any(p.high_variance for p in curves["naive^3"].points)
        assert not any(p.high_variance for p in curves["bayes"].points)


class TestWorstCase:
    def test_trivially_separated_constant_trajectory(self):
        mats = separated_cohort()
        traj = worst_case_trajectory(mats, "bayes", ResamplePlan("row", 20, seed=2))
        assert traj.convergence_n == 1
        assert not traj.censored
        first = traj.tables[0].ranks()
        assert all(t.ranks() == first for t in traj.tables)

    def test_final_table_matches_gold_when_converged(self):
        mats = small_cohort(n_models=4, n=12, seed=8)
        plan = ResamplePlan("row", replicates=30, seed=5)
        traj = worst_case_trajectory(mats, "bayes", plan)
        if not traj.censored:
            gold = gold_table(mats)
            assert traj.tables[-1].ranks() == gold.ranks()

    def test_selected_replicate_is_argmax(self):
        mats = small_cohort(n_models=4, n=10, seed=3)
        plan = ResamplePlan("column", replicates=25, seed=11)
        method = parse_method("bayes")
        traj = worst_case_trajectory(mats, method, plan)
        gold = gold_table(mats)
        ids = list(mats)
        gold_ranks = gold.rank_vector(ids)

        def conv_key(r):
            resampled = [
                resample(mx, plan, r, stream=s) for s, mx in enumerate(mats.values())
            ]
            last_mismatch = 0
            for n in range(1, 11):
                table = rank_without_ci(
                    [
                        ScoredModel(mid, method.score(rx.prefix(n)))
                        for mid, rx in zip(ids, resampled)
                    ]
                )
                if table.rank_vector(ids) != gold_ranks:
                    last_mismatch = n
            if last_mismatch == 10:
                return 11
            return max(1, last_mismatch + 1)

        keys = [conv_key(r) for r in range(plan.replicates)]
        worst = max(keys)
        assert keys[traj.replicate_index] == worst
        assert traj.replicate_index == keys.index(worst)
