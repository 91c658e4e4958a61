"""The parametric Galton-Watson tree ``T_t`` with offspring law ``Y_t``.

Extinction probability is available by three analytic routes:

* :func:`extinction_series` - the coefficient formula
  ``q(t) = sum_n A_n t^{n-1} / psi(t)^n = g(t/psi(t)) / t`` with a tail bound;
* :func:`extinction_fixed_point` - iteration of ``psi_t(z) = psi(tz)/psi(t)``
  from 0;
* :func:`extinction_inversion` - ``g`` evaluated on ``[0, rho]`` as the
  inverse of the increasing branch of ``y / psi(y)`` on ``[0, tau]``.

:func:`extinction` picks one of them; Monte Carlo estimates come from the
simulators at the bottom of the module.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from . import kernels
from .errors import (
    ApexPointError, ConvergenceError, OffLatticeError, SlowConvergenceWarning,
    TailDominatesWarning, TailTooLargeError,
)
from .family import OffspringSpec, mean
from .lagrange import Bounded, LagrangeSolution
from .series import FLOAT, PowerSeries
from .trees import (
    ALL, MAX_N, SubclassPredicate, enumerate_trees, from_bfs_degrees, sum_weights, weight,
)

NEAR_APEX = 0.05          # relative window around tau treated as near-critical
SERIES_TOL = 1e-12        # series used by extinction() only when its tail is below this
FIXED_POINT_TOL = 1e-14
FIXED_POINT_MAX_ITER = 10 ** 6
TABLE_TAIL = 1e-12
DEFAULT_BUDGET = 10 ** 4
INFINITE = -1             # marker for an infinite total progeny draw
EXTINCT, CENSORED = kernels.EXTINCT, kernels.CENSORED


def _near_apex(sol: LagrangeSolution, t: float) -> bool:
    return sol.tau is not None and abs(t - sol.tau) < NEAR_APEX * sol.tau


def _log_x(spec: OffspringSpec, t: float) -> float:
    return math.log(t) - spec.log_psi(t)


# ---------------------------------------------------------------------------
# extinction probability
# ---------------------------------------------------------------------------

def extinction_series(sol: LagrangeSolution, t: float) -> Bounded:
    """Truncated coefficient formula; ``tail_bound`` majorises the neglected terms."""
    spec = sol.spec
    spec.check_t(t, allow_zero=False)
    if _near_apex(sol, t):
        warnings.warn(f"t={t} is within {NEAR_APEX:.0%} of the apex {sol.tau:.6g}; the series "
                      "tail decays only like n^-3/2 there", SlowConvergenceWarning, stacklevel=2)
    log_x = _log_x(spec, t)
    value = float(np.sum(np.exp(sol.log_terms(log_x) - math.log(t))))
    x = min(math.exp(log_x), sol.rho)
    return Bounded(value, sol.tail_bound(x) / t)


def extinction_fixed_point(spec: OffspringSpec, t: float, tol: float = FIXED_POINT_TOL,
                           max_iter: int = FIXED_POINT_MAX_ITER) -> float:
    """Smallest fixed point of ``psi_t`` by monotone iteration from ``q_0 = 0``."""
    spec.check_t(t)
    if t == 0:
        return 1.0
    pgf = spec.pgf
    q = 0.0
    for _ in range(max_iter):
        nxt = pgf(t, q)
        if abs(nxt - q) <= tol:
            return nxt
        q = nxt
    raise ConvergenceError(f"fixed-point iteration at t={t} exceeded {max_iter} steps "
                           f"(|step| = {abs(nxt - q):.2e}); t is probably near critical")


def _branch_root(spec: OffspringSpec, log_x: float, tau: float) -> float:
    """``log y`` for the unique ``y`` in ``(0, tau)`` with ``y / psi(y) = x``.

    Works in ``u = log y`` where ``H(u) = u - log psi(e^u)`` has slope ``1 - m(e^u) > 0``.
    """
    b0 = float(spec.coefficient(0))
    lo = log_x + math.log(b0)
    hi = min(math.log(tau), log_x + spec.log_psi(tau))

    def H(u):
        return u - spec.log_psi(math.exp(u)) - log_x

    if H(hi) <= 0:
        return hi
    u = 0.5 * (lo + hi)
    for _ in range(200):
        h = H(u)
        if h == 0:
            return u
        if h > 0:
            hi = u
        else:
            lo = u
        slope = 1.0 - mean(spec, math.exp(u))
        nxt = u - h / slope if slope > 0 else 0.5 * (lo + hi)
        if not lo <= nxt <= hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - u) <= 1e-15 * max(1.0, abs(u)):
            return nxt
        u = nxt
    return u


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)


def _polish_near_apex(spec: OffspringSpec, u0: float, v: float, tau: float) -> float:
    """Refine ``u = log(t q)`` when ``t`` is just above the apex.

    ``u - log psi(e^u) = v - log psi(e^v)`` is flat at the apex, so solving it
    directly loses half the digits.  Dividing by ``u - v`` gives
    ``1 = int_0^1 m(e^{v + s(u - v)}) ds``, which is well conditioned; the
    average of ``m`` is taken by Gauss-Legendre quadrature.
    """
    s = 0.5 * (_GL_NODES + 1.0)
    w = 0.5 * _GL_WEIGHTS

    def G(u):
        return 1.0 - sum(wi * mean(spec, math.exp(v + si * (u - v))) for si, wi in zip(s, w))

    hi = math.log(tau)
    # the root sits roughly at the mirror image of v in log(tau)
    gap = max(v - hi, 1e-300)
    lo = min(u0, hi - 2 * gap)
    for _ in range(60):
        if G(lo) > 0:
            break
        lo = hi - 2 * (hi - lo)
    if G(lo) <= 0 or G(hi) >= 0:
        return u0
    return brentq(G, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps)


def extinction_inversion(sol: LagrangeSolution, t: float) -> float:
    """``g(t/psi(t)) / t`` with ``g`` taken as the inverse of ``y / psi(y)`` on ``[0, tau]``.

    For ``t <= tau`` (or without an apex) ``t`` itself is the preimage, so ``q = 1``;
    beyond the apex the conjugate point ``t q(t) < tau`` is found by a root solve.
    """
    spec = sol.spec
    spec.check_t(t)
    if t == 0 or sol.tau is None or t <= sol.tau:
        return 1.0
    u = _branch_root(spec, _log_x(spec, t), sol.tau)
    if t < sol.tau * (1 + NEAR_APEX):
        u = _polish_near_apex(spec, u, math.log(t), sol.tau)
    return math.exp(u - math.log(t))


@dataclass(frozen=True)
class Extinction:
    value: float
    method: str
    tail_bound: float = 0.0


def extinction(sol: LagrangeSolution, t: float, tol: float = SERIES_TOL) -> Extinction:
    """``q(t)`` with the method used.

    Up to the apex (and everywhere without one) ``q = 1`` exactly by the
    inversion identity.  Beyond it the coefficient series is used when its tail
    bound is below ``tol``, otherwise the branch root.
    """
    spec = sol.spec
    spec.check_t(t)
    if t == 0:
        return Extinction(1.0, "degenerate")
    if sol.tau is None or t <= sol.tau:
        return Extinction(1.0, "inversion-identity")
    if not _near_apex(sol, t):
        s = extinction_series(sol, t)
        if s.tail_bound <= tol:
            return Extinction(min(s.value, 1.0), "series", s.tail_bound)
    return Extinction(extinction_inversion(sol, t), "branch-root")


def fixed_points(spec: OffspringSpec, t: float, grid: int = 2000) -> list[float]:
    """All roots of ``psi_t(z) = z`` on ``[0, 1]`` found by sign-change bracketing."""
    zs = np.linspace(0.0, 1.0, grid + 1)
    f = np.array([spec.pgf(t, z) - z for z in zs])
    roots = []
    for a, b, fa, fb in zip(zs[:-1], zs[1:], f[:-1], f[1:]):
        if fa == 0:
            roots.append(float(a))
        elif fa * fb < 0:
            roots.append(brentq(lambda z: spec.pgf(t, z) - z, a, b, xtol=1e-15))
    if f[-1] == 0 or abs(f[-1]) < 1e-15:
        roots.append(1.0)
    return sorted(set(roots))


def q_derivative(sol: LagrangeSolution, t: float, side: str | None = None) -> float:
    """``q'(t) = (q/t) * ((1 - m(t)) / (1 - m(t q)) - 1)`` away from the apex.

    At ``t = tau`` the derivative jumps; pass ``side="left"`` (0) or
    ``side="right"`` (``-2/tau``) to ask for a one-sided limit.
    """
    spec = sol.spec
    spec.check_t(t, allow_zero=False)
    tau = sol.tau
    if tau is None:
        return 0.0
    if abs(t - tau) <= 1e-12 * tau:
        if side == "left":
            return 0.0
        if side == "right":
            return -2.0 / tau
        raise ApexPointError(f"q is not differentiable at the apex t={tau}")
    if t < tau:
        return 0.0
    q = extinction(sol, t).value
    return q / t * ((1.0 - mean(spec, t)) / (1.0 - mean(spec, t * q)) - 1.0)


# ---------------------------------------------------------------------------
# total progeny
# ---------------------------------------------------------------------------

@dataclass
class ProgenyLaw:
    t: float
    probs: np.ndarray            # probs[n] = P(|T_t| = n), probs[0] = 0
    q: float
    survival_mass: float
    tail_finite: float
    q_method: str = "fixed-point"

    @property
    def N(self) -> int:
        return len(self.probs) - 1


def _progeny_probs(sol: LagrangeSolution, t: float, N: int) -> np.ndarray:
    if N > sol.N:
        raise ValueError(f"N={N} exceeds the Lagrange truncation {sol.N}")
    if t == 0:
        out = np.zeros(N + 1)
        out[1] = 1.0
        return out
    spec = sol.spec
    n = np.arange(N + 1)
    with np.errstate(invalid="ignore"):
        logp = sol.log_A[: N + 1] + (n - 1) * math.log(t) - n * spec.log_psi(t)
    out = np.exp(np.nan_to_num(logp, nan=-math.inf))
    out[0] = 0.0
    return out


def progeny_law(sol: LagrangeSolution, t: float, N: int | None = None) -> ProgenyLaw:
    """``P(|T_t| = n) = A_n t^{n-1} / psi(t)^n`` for ``n <= N`` plus the survival atom."""
    sol.spec.check_t(t)
    N = sol.N if N is None else N
    probs = _progeny_probs(sol, t, N)
    try:
        q, how = extinction_fixed_point(sol.spec, t), "fixed-point"
    except ConvergenceError:
        e = extinction(sol, t)
        q, how = e.value, e.method
    tail = q - float(probs.sum())
    if tail < -1e-12:
        warnings.warn(f"progeny probabilities exceed q(t) by {-tail:.2e}", RuntimeWarning, stacklevel=2)
    return ProgenyLaw(float(t), probs, q, 1.0 - q, max(tail, 0.0), how)


def gt_coeffs(sol: LagrangeSolution, t: float, N: int | None = None) -> PowerSeries:
    """Coefficients of ``g_t(z) = g(t z / psi(t)) / t``, the generating function of the progeny."""
    N = sol.N if N is None else N
    spec = sol.spec
    spec.check_t(t)
    if t == 0:
        c = np.zeros(N + 1)
        c[1] = 1.0
        return PowerSeries(c, FLOAT)
    x = math.exp(_log_x(spec, t))
    return PowerSeries(_progeny_probs(sol, t, N), FLOAT, radius=sol.rho / x)


def write_progeny_csv(law: ProgenyLaw, fh):
    import csv
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["n", "prob"])
    for n in range(1, law.N + 1):
        w.writerow([n, f"{law.probs[n]:.12g}"])


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OffspringTable:
    """Inverse-CDF table for ``Y_t``; mass beyond the table (< 1e-12) sits in the last bucket."""

    t: float
    cdf: np.ndarray

    @classmethod
    def build(cls, spec: OffspringSpec, t: float, tail: float = TABLE_TAIL) -> "OffspringTable":
        spec.check_t(t)
        if t == 0:
            return cls(0.0, np.array([1.0]))
        log_t, log_psi = math.log(t), spec.log_psi(t)
        limit = None if spec.is_preset else len(spec.coeffs) - 1
        K = 64 if limit is None else limit
        while True:
            with np.errstate(invalid="ignore"):
                mass = np.exp(spec.log_coefficients(K) + np.arange(K + 1) * log_t - log_psi)
            mass = np.nan_to_num(mass, nan=0.0)
            if limit is not None or 1.0 - mass.sum() < tail or K >= 1 << 20:
                break
            K *= 2
        last = int(np.nonzero(mass)[0][-1])
        cdf = np.cumsum(mass[: last + 1])
        cdf[-1] = 1.0
        return cls(float(t), cdf)

    def draw(self, u):
        k = np.searchsorted(self.cdf, u, side="right")
        return int(k) if np.ndim(k) == 0 else k.astype(np.int64)


def sample_offspring(spec: OffspringSpec, t: float, rng, size=None):
    """Draw ``Y_t`` by inverse CDF from ``rng.random``."""
    return OffspringTable.build(spec, t).draw(rng.random(size))


@dataclass(frozen=True)
class SimOutcome:
    status: str              # "extinct" or "censored"
    size: int                # node count when extinct, 0 when censored
    generations: int
    seed: int
    index: int = 0


@dataclass
class SimBatch:
    t: float
    seed: int
    budget: int
    status: np.ndarray
    size: np.ndarray
    generations: np.ndarray
    table: OffspringTable = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.status)

    @property
    def extinct(self) -> np.ndarray:
        return self.status == EXTINCT

    def key(self, index: int) -> int:
        return int(kernels.tree_keys(self.seed, index, 1)[0])

    def tree(self, index: int):
        """Rebuild tree ``index`` (must be extinct) from its random stream."""
        if self.status[index] != EXTINCT:
            raise ValueError(f"tree {index} was censored")
        degrees = kernels.bfs_offspring(self.table.cdf, self.key(index), int(self.size[index]))
        return from_bfs_degrees(degrees.tolist())


def simulate_tree(spec: OffspringSpec, t: float, node_budget: int, seed: int, index: int = 0,
                  table: OffspringTable | None = None) -> SimOutcome:
    if node_budget < 1:
        raise ValueError("node_budget must be >= 1")
    table = table or OffspringTable.build(spec, t)
    status, size, gens = kernels.simulate(table.cdf, kernels.tree_keys(seed, index, 1), node_budget)
    return SimOutcome("extinct" if status[0] == EXTINCT else "censored", int(size[0]), int(gens[0]),
                      int(seed) % (1 << 64), index)


def simulate_batch(spec: OffspringSpec, t: float, n_trees: int, budget: int = DEFAULT_BUDGET,
                   seed: int = 0, workers: int = 1, chunk: int = 4096,
                   use_numba: bool | None = None) -> SimBatch:
    """Simulate trees ``0..n_trees-1`` of the stream ``seed``.

    Outcomes depend only on ``(seed, index)``, so chunking and the number of
    worker threads never change the result.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    table = OffspringTable.build(spec, t)
    status = np.empty(n_trees, dtype=np.int64)
    size = np.empty(n_trees, dtype=np.int64)
    gens = np.empty(n_trees, dtype=np.int64)
    starts = list(range(0, n_trees, chunk))

    def run(start):
        count = min(chunk, n_trees - start)
        keys = kernels.tree_keys(seed, start, count)
        st, sz, gn = kernels.simulate(table.cdf, keys, budget, use_numba)
        status[start:start + count] = st
        size[start:start + count] = sz
        gens[start:start + count] = gn

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, starts))
    else:
        for s in starts:
            run(s)
    return SimBatch(float(t), int(seed) % (1 << 64), int(budget), status, size, gens, table)


@dataclass(frozen=True)
class BinomialEstimate:
    successes: int
    trials: int

    @property
    def point(self) -> float:
        return self.successes / self.trials if self.trials else math.nan

    @property
    def sigma(self) -> float:
        p = self.point
        return math.sqrt(p * (1 - p) / self.trials) if self.trials else math.nan

    @property
    def interval(self) -> tuple[float, float]:
        return self.point - 3 * self.sigma, self.point + 3 * self.sigma

    def covers(self, value: float, slack: float = 0.0) -> bool:
        lo, hi = self.interval
        return lo - slack <= value <= hi + slack


@dataclass(frozen=True)
class MCExtinction:
    t: float
    estimate: BinomialEstimate
    reference: float
    reference_method: str
    censoring_bound: float
    censored: int

    def as_record(self) -> dict:
        lo, hi = self.estimate.interval
        return {
            "t": self.t,
            "q_mc": self.estimate.point,
            "mc_sigma": self.estimate.sigma,
            "mc_ci": [lo, hi],
            "q_reference": self.reference,
            "reference_method": self.reference_method,
            "censoring_bound": self.censoring_bound,
            "trees": self.estimate.trials,
            "censored": self.censored,
        }


def censoring_bound(sol: LagrangeSolution, t: float, budget: int) -> float:
    """Upper bound on ``P(extinct and size > budget)`` from the truncated progeny law."""
    N = min(sol.N, budget)
    law = progeny_law(sol, t, N)
    return max(law.q - float(law.probs.sum()), 0.0)


def estimate_extinction(sol: LagrangeSolution, t: float, n_trees: int, budget: int = DEFAULT_BUDGET,
                        seed: int = 0, workers: int = 1) -> MCExtinction:
    batch = simulate_batch(sol.spec, t, n_trees, budget, seed, workers)
    k = int(batch.extinct.sum())
    ref = extinction(sol, t)
    return MCExtinction(float(t), BinomialEstimate(k, n_trees), ref.value, ref.method,
                        censoring_bound(sol, t, budget), n_trees - k)


def sample_progeny_exact(law: ProgenyLaw, rng, size=None, max_tail: float = 1e-9):
    """Draw ``|T_t|`` from its law; ``INFINITE`` (-1) stands for survival."""
    if law.tail_finite >= max_tail:
        raise TailTooLargeError(f"finite tail beyond N={law.N} is {law.tail_finite:.2e}; "
                                "rebuild the law with a larger N")
    cdf = np.concatenate([np.cumsum(law.probs[1:]), [1.0]])
    cdf[-1] = 1.0
    k = np.searchsorted(cdf, rng.random(size), side="right")
    out = np.where(k == law.N, INFINITE, k + 1)
    return int(out) if np.ndim(out) == 0 else out.astype(np.int64)


# ---------------------------------------------------------------------------
# conditional laws
# ---------------------------------------------------------------------------

def _check_lattice(spec: OffspringSpec, n: int):
    if (n - 1) % spec.Q:
        raise OffLatticeError(f"A_{n} = 0: n is not 1 mod Q={spec.Q}")


def conditional_size_prob(pred: SubclassPredicate, spec: OffspringSpec, n: int) -> Fraction:
    """``P(T_t in R | |T_t| = n) = R_n / A_n``, the same for every ``t``."""
    _check_lattice(spec, n)
    total = sum_weights(n, spec, ALL)
    if total == 0:
        raise OffLatticeError(f"A_{n} = 0 for {spec.name}")
    return sum_weights(n, spec, pred) / total


def conditional_size_mc(pred: SubclassPredicate, spec: OffspringSpec, t: float, n: int,
                        n_trees: int, seed: int = 0, workers: int = 1) -> BinomialEstimate:
    """Frequency of ``pred`` among simulated trees of size exactly ``n``."""
    batch = simulate_batch(spec, t, n_trees, budget=n, seed=seed, workers=workers)
    idx = np.nonzero(batch.extinct & (batch.size == n))[0]
    hits = sum(1 for i in idx if pred(batch.tree(int(i))))
    return BinomialEstimate(hits, len(idx))


def conditional_extinction_prob(pred: SubclassPredicate, spec: OffspringSpec,
                                sol: LagrangeSolution, t: float, N: int = MAX_N,
                                precision: float = 1e-6) -> Bounded:
    """``P(T_t in R | extinction)`` from ``R_n`` for ``n <= min(N, 12)``.

    The neglected sizes contribute at most ``(q - sum_{n<=N} P(|T_t|=n)) / q``.
    """
    spec.check_t(t, allow_zero=False)
    nmax = min(N, MAX_N, sol.N)
    probs = _progeny_probs(sol, t, nmax)
    q = extinction(sol, t).value
    partial = 0.0
    for n in range(1, nmax + 1):
        if probs[n] == 0.0:
            continue
        R = A = Fraction(0)
        for a in enumerate_trees(n):
            w = weight(a, spec)
            A += w
            if w and pred(a):
                R += w
        partial += float(R / A) * probs[n]
    bound = max(q - float(probs.sum()), 0.0) / q
    if bound > precision:
        warnings.warn(f"sizes beyond n={nmax} carry up to {bound:.2e} of the conditional mass",
                      TailDominatesWarning, stacklevel=2)
    return Bounded(partial / q, bound)


def conditional_extinction_mc(pred: SubclassPredicate, spec: OffspringSpec, t: float, n_trees: int,
                              budget: int = 200, seed: int = 0, workers: int = 1) -> BinomialEstimate:
    """Frequency of ``pred`` among simulated trees that died out within ``budget`` nodes."""
    batch = simulate_batch(spec, t, n_trees, budget=budget, seed=seed, workers=workers)
    idx = np.nonzero(batch.extinct)[0]
    hits = sum(1 for i in idx if pred(batch.tree(int(i))))
    return BinomialEstimate(hits, len(idx))
