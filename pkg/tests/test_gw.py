import math
import warnings
from fractions import Fraction

import numpy as np
import pytest

from gwlagrange import gw
from gwlagrange.errors import (
    ApexPointError, ConvergenceError, DomainError, OffLatticeError, SlowConvergenceWarning,
    TailDominatesWarning, TailTooLargeError,
)
from gwlagrange.family import OffspringSpec, mean
from gwlagrange.lagrange import solve
from gwlagrange.rng import SplitMix64
from gwlagrange.trees import ALL, parse_predicate

from oracles import CATALAN, Q_EXP

ROOT1 = parse_predicate("root_outdegree=1")


class TestExtinctionSeries:
    def test_subcritical(self, exp_sol):
        v = gw.extinction_series(exp_sol, 0.5)
        assert v.value == pytest.approx(1.0, abs=1e-12) and v.tail_bound < 1e-12

    def test_supercritical(self, exp_sol):
        v = gw.extinction_series(exp_sol, 2.0)
        assert v.value == pytest.approx(Q_EXP[2.0], abs=1e-13)

    def test_geometric(self, geo_sol):
        assert gw.extinction_series(geo_sol, 0.75).value == pytest.approx(1 / 3, abs=1e-13)

    def test_warns_near_apex(self, exp_sol):
        with pytest.warns(SlowConvergenceWarning):
            v = gw.extinction_series(exp_sol, 1.01)
        assert abs(v.value - gw.extinction_inversion(exp_sol, 1.01)) <= v.tail_bound

    def test_domain(self, exp_sol):
        with pytest.raises(DomainError):
            gw.extinction_series(exp_sol, 0.0)


class TestFixedPoint:
    @pytest.mark.parametrize("t", sorted(Q_EXP))
    def test_exp(self, exp_spec, t):
        assert gw.extinction_fixed_point(exp_spec, t) == pytest.approx(Q_EXP[t], abs=1e-12)

    @pytest.mark.parametrize("spec, t", [(OffspringSpec.exp(), 0.9), (OffspringSpec.geometric(), 0.2),
                                         (OffspringSpec.polynomial([1, 1]), 5.0)])
    def test_subcritical(self, spec, t):
        assert gw.extinction_fixed_point(spec, t) == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("t", [1.2, 2.0, 4.0])
    def test_binary(self, t):
        # psi = 1 + z^2: p0 = 1/(1+t^2), p2 = t^2/(1+t^2), q = p0/p2
        q = gw.extinction_fixed_point(OffspringSpec.polynomial([1, 0, 1]), t)
        assert q == pytest.approx(1 / t ** 2, abs=1e-12)

    def test_stalls_at_criticality(self, exp_spec):
        with pytest.raises(ConvergenceError):
            gw.extinction_fixed_point(exp_spec, 1.0, max_iter=1000)

    def test_all_fixed_points(self, exp_spec):
        roots = gw.fixed_points(exp_spec, 2.0)
        assert len(roots) == 2
        assert roots[0] == pytest.approx(Q_EXP[2.0], abs=1e-12) and roots[1] == 1.0


class TestRouting:
    @pytest.mark.parametrize("t", [0.2, 0.7, 0.999, 1.0, 1.001, 1.3, 2.0, 3.0, 12.0, 40.0])
    def test_methods_agree(self, exp_sol, t):
        routed = gw.extinction(exp_sol, t).value
        assert routed == pytest.approx(gw.extinction_inversion(exp_sol, t), abs=1e-12)
        if abs(t - 1) > 0.05:
            assert routed == pytest.approx(gw.extinction_fixed_point(exp_sol.spec, t), abs=1e-12)

    def test_method_labels(self, exp_sol):
        assert gw.extinction(exp_sol, 2.0).method == "series"
        assert gw.extinction(exp_sol, 1.02).method == "branch-root"
        assert gw.extinction(exp_sol, 0.98).method == "inversion-identity"
        assert gw.extinction(exp_sol, 0.0).value == 1.0

    def test_geometric_closed_form(self, geo_sol):
        for t in np.linspace(0.51, 0.99, 13):
            assert gw.extinction(geo_sol, t).value == pytest.approx((1 - t) / t, abs=1e-12)

    def test_no_apex_is_one(self):
        sol = solve(OffspringSpec.polynomial([1, 1]), 64)
        assert gw.extinction(sol, 3.0).value == 1.0

    def test_near_apex_slope(self, exp_sol):
        # q(1 + h) = 1 - 2h + O(h^2)
        for h in (1e-10, 1e-8, 1e-6):
            q = gw.extinction(exp_sol, 1 + h).value
            assert (1 - q) / h == pytest.approx(2.0, rel=1e-4)


class TestDerivative:
    def test_below_apex(self, exp_sol):
        assert gw.q_derivative(exp_sol, 0.5) == 0.0

    def test_one_sided_at_apex(self, exp_sol):
        assert gw.q_derivative(exp_sol, exp_sol.tau, side="right") == pytest.approx(-2.0, abs=1e-12)
        assert gw.q_derivative(exp_sol, exp_sol.tau, side="left") == 0.0
        with pytest.raises(ApexPointError):
            gw.q_derivative(exp_sol, exp_sol.tau)

    @pytest.mark.parametrize("t", [1.5, 2.0, 3.0])
    def test_matches_finite_difference(self, exp_sol, t):
        h = 1e-5
        fd = (gw.extinction_fixed_point(exp_sol.spec, t + h)
              - gw.extinction_fixed_point(exp_sol.spec, t - h)) / (2 * h)
        assert gw.q_derivative(exp_sol, t) == pytest.approx(fd, abs=1e-6)

    def test_geometric_closed_form(self, geo_sol):
        # q = (1 - t)/t, q' = -1/t^2
        assert gw.q_derivative(geo_sol, 0.8) == pytest.approx(-1 / 0.64, rel=1e-10)


class TestProgeny:
    def test_borel_atoms(self, exp_sol):
        law = gw.progeny_law(exp_sol, 1.0, 10)
        assert law.probs[1] == pytest.approx(math.exp(-1), rel=1e-14)
        assert law.probs[2] == pytest.approx(math.exp(-2), rel=1e-14)

    def test_catalan_law(self, geo_sol):
        law = gw.progeny_law(geo_sol, 0.5, 12)
        for n in range(1, 13):
            assert law.probs[n] == pytest.approx(CATALAN[n - 1] * 0.5 ** (n - 1) / 2 ** n, rel=1e-12)
        full = gw.progeny_law(geo_sol, 0.5)
        assert full.q == 1.0 and 0 < full.tail_finite < 0.05
        assert full.probs.sum() + full.tail_finite == pytest.approx(1.0, abs=1e-12)

    def test_supercritical_mass_split(self, exp_sol):
        law = gw.progeny_law(exp_sol, 2.0)
        assert law.q == pytest.approx(Q_EXP[2.0], abs=1e-12)
        assert law.survival_mass == pytest.approx(1 - Q_EXP[2.0], abs=1e-12)
        assert law.tail_finite < 1e-12

    def test_t_zero(self, exp_sol):
        law = gw.progeny_law(exp_sol, 0.0, 5)
        assert law.probs[1] == 1 and law.q == 1

    def test_gt_coefficients(self, exp_sol):
        g = gw.gt_coeffs(exp_sol, 2.0)
        assert float(np.sum(g.coeffs)) == pytest.approx(Q_EXP[2.0], abs=1e-12)
        assert g[1] == pytest.approx(math.exp(-2.0), rel=1e-14)
        g0 = gw.gt_coeffs(exp_sol, 0.0, 4)
        assert list(g0.coeffs) == [0, 1, 0, 0, 0]

    def test_exact_sampler(self, exp_sol):
        law = gw.progeny_law(exp_sol, 2.0)
        draws = gw.sample_progeny_exact(law, SplitMix64(4), 200_000)
        frac_inf = float(np.mean(draws == gw.INFINITE))
        sigma = math.sqrt(law.survival_mass * law.q / 200_000)
        assert abs(frac_inf - law.survival_mass) < 4 * sigma
        assert float(np.mean(draws == 1)) == pytest.approx(law.probs[1], abs=0.005)

    def test_exact_sampler_refuses_heavy_tail(self, geo_sol):
        with pytest.raises(TailTooLargeError):
            gw.sample_progeny_exact(gw.progeny_law(geo_sol, 0.5), SplitMix64(0), 5)


class TestSampling:
    def test_offspring_mean(self, exp_spec):
        x = gw.sample_offspring(exp_spec, 1.0, SplitMix64(2024), 10 ** 6)
        assert abs(x.mean() - 1.0) < 3 * 1.0 / 1e3

    def test_degenerate_table(self, exp_spec):
        assert np.all(gw.sample_offspring(exp_spec, 0.0, SplitMix64(0), 100) == 0)

    def test_table_for_polynomial(self):
        tab = gw.OffspringTable.build(OffspringSpec.polynomial([1, 0, 1]), 1.0)
        np.testing.assert_allclose(tab.cdf, [0.5, 0.5, 1.0])

    def test_subcritical_all_extinct(self, exp_spec):
        b = gw.simulate_batch(exp_spec, 0.5, 10 ** 5, budget=10 ** 5, seed=9)
        assert b.extinct.all()
        assert b.size.mean() == pytest.approx(2.0, rel=0.02)   # E|T| = 1/(1 - m)

    def test_tree_matches_batch(self, exp_spec):
        b = gw.simulate_batch(exp_spec, 1.5, 50, budget=300, seed=77)
        for i in (0, 13, 49):
            one = gw.simulate_tree(exp_spec, 1.5, 300, seed=77, index=i)
            assert (one.status == "extinct") == b.extinct[i]
            assert one.size == b.size[i] and one.generations == b.generations[i]

    def test_rebuilt_tree(self, exp_spec):
        b = gw.simulate_batch(exp_spec, 1.0, 200, budget=1000, seed=1)
        for i in np.nonzero(b.extinct)[0][:20]:
            a = b.tree(int(i))
            assert a.size == b.size[i] and a.height + 1 == b.generations[i]

    def test_censored_size_is_zero(self, exp_spec):
        b = gw.simulate_batch(exp_spec, 3.0, 500, budget=10, seed=0)
        assert np.all(b.size[~b.extinct] == 0)
        assert np.all(b.size[b.extinct] <= 10)

    def test_workers_and_chunks_do_not_matter(self, exp_spec):
        a = gw.simulate_batch(exp_spec, 2.0, 3000, budget=500, seed=5)
        b = gw.simulate_batch(exp_spec, 2.0, 3000, budget=500, seed=5, workers=4, chunk=700)
        for x, y in ((a.status, b.status), (a.size, b.size), (a.generations, b.generations)):
            np.testing.assert_array_equal(x, y)

    def test_estimate_report(self, exp_sol):
        r = gw.estimate_extinction(exp_sol, 2.0, 20_000, budget=2000, seed=3)
        assert r.estimate.covers(Q_EXP[2.0], slack=r.censoring_bound)
        rec = r.as_record()
        for key in ("q_mc", "mc_ci", "q_reference", "censoring_bound"):
            assert key in rec

    def test_budget_validation(self, exp_spec):
        with pytest.raises(ValueError):
            gw.simulate_batch(exp_spec, 1.0, 10, budget=0)


class TestConditional:
    def test_all_is_one(self, geo_spec):
        assert gw.conditional_size_prob(ALL, geo_spec, 6) == 1

    def test_root_outdegree(self, geo_spec):
        assert gw.conditional_size_prob(ROOT1, geo_spec, 3) == Fraction(1, 2)
        assert gw.conditional_size_prob(ROOT1, geo_spec, 5) == Fraction(5, 14)

    def test_off_lattice(self):
        with pytest.raises(OffLatticeError):
            gw.conditional_size_prob(ALL, OffspringSpec.polynomial([1, 0, 1]), 4)

    def test_mc_matches_exact(self, geo_spec):
        est = gw.conditional_size_mc(ROOT1, geo_spec, 0.4, 5, 30_000, seed=8)
        assert est.trials > 500
        assert est.covers(5 / 14)

    def test_extinction_conditional_all(self, exp_spec, exp_sol):
        with pytest.warns(TailDominatesWarning):
            v = gw.conditional_extinction_prob(ALL, exp_spec, exp_sol, 0.3)
        assert abs(v.value - 1.0) <= v.tail_bound + 1e-12

    def test_extinction_conditional_vs_mc(self, exp_spec, exp_sol):
        pred = parse_predicate("height<=2")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            exact = gw.conditional_extinction_prob(pred, exp_spec, exp_sol, 0.5)
        mc = gw.conditional_extinction_mc(pred, exp_spec, 0.5, 20_000, seed=2)
        assert mc.covers(exact.value, slack=exact.tail_bound)


def test_mean_of_conjugate_below_one(exp_sol):
    # the conjugate parameter t q(t) of a supercritical t is subcritical
    for t in (1.1, 2.0, 5.0):
        assert mean(exp_sol.spec, t * gw.extinction(exp_sol, t).value) < 1
