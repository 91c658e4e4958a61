import io
import math

import numpy as np
import pytest

from gwlagrange.asym import BOUND_LABEL, an_ratio_check, lattice, profile, tail_bound, write_ratio_csv
from gwlagrange.errors import NoApexError
from gwlagrange.family import OffspringSpec
from gwlagrange.lagrange import g_eval, solve

from oracles import C_EXP, C_GEOMETRIC, RHO_EXP


def test_constants(exp_sol, geo_sol):
    assert profile(exp_sol.spec, exp_sol).C == pytest.approx(C_EXP, rel=1e-12)
    assert profile(geo_sol.spec, geo_sol).C == pytest.approx(C_GEOMETRIC, rel=1e-12)
    assert exp_sol.profile.K == 2 * exp_sol.profile.C


def test_no_apex():
    sol = solve(OffspringSpec.polynomial([1, 1]), 10)
    with pytest.raises(NoApexError):
        profile(sol.spec, sol)


def test_even_lattice():
    sol = solve(OffspringSpec.polynomial([1, 0, 1]), 101)
    prof = profile(sol.spec, sol)
    assert prof.Q == 2
    ns, r = an_ratio_check(sol, prof, 101)
    assert (ns % 2 == 1).all()
    assert np.all(sol.A[2::2] == 0)
    assert r[-1] == pytest.approx(1.0, abs=0.01)


def test_lattice_helper():
    assert list(lattice(10, 3)) == [1, 4, 7, 10]


def test_omm_ratio(exp_sol):
    ns, r = an_ratio_check(exp_sol, exp_sol.profile, 1000)
    assert abs(r[0] - 1) > 0.05
    assert np.all(np.abs(r[ns >= 200] - 1) < 0.01)


def test_omm_ratio_against_stirling(exp_sol):
    # A_n e^{-n} n^{3/2} sqrt(2 pi) straight from lgamma, independent of the solver
    n = 200
    direct = math.exp((n - 1) * math.log(n) - math.lgamma(n + 1) - n + 1.5 * math.log(n)) / C_EXP
    _, r = an_ratio_check(exp_sol, exp_sol.profile, n)
    assert r[-1] == pytest.approx(direct, rel=1e-10)


def test_ratio_csv(exp_sol):
    buf = io.StringIO()
    write_ratio_csv(exp_sol, exp_sol.profile, 5, buf)
    assert buf.getvalue().splitlines()[0] == "n,A_n_rho_n_n32,ratio"


class TestTailBound:
    def test_zero(self, exp_sol):
        assert tail_bound(exp_sol.profile, 0.0, 64) == 0.0

    def test_geometric_regime(self, exp_sol):
        assert tail_bound(exp_sol.profile, RHO_EXP / 2, 64) < 1e-12

    def test_covers_direct_summation(self, exp_sol):
        x = 0.9 * RHO_EXP
        N = 64
        direct = float(np.sum(exp_sol.A_rho_n[N + 1:] * 0.9 ** np.arange(N + 1, exp_sol.N + 1)))
        assert direct <= tail_bound(exp_sol.profile, x, N)

    def test_covers_gap_at_radius(self, exp_sol):
        gap = 1.0 - g_eval(exp_sol, RHO_EXP).value
        assert 0 < gap <= tail_bound(exp_sol.profile, RHO_EXP, exp_sol.N)

    def test_covers_gap_at_radius_large_n(self, exp_sol):
        # A_n rho^n = n^{n-1} e^{-n} / n! summed in closed form up to N = 10^4
        N = 10 ** 4
        n = np.arange(1, N + 1)
        logs = (n - 1) * np.log(n) - n - np.array([math.lgamma(k + 1) for k in n])
        gap = 1.0 - math.fsum(np.exp(logs))
        assert 0 < gap <= tail_bound(exp_sol.profile, RHO_EXP, N)

    def test_label(self):
        assert BOUND_LABEL == "empirical-majorant"
