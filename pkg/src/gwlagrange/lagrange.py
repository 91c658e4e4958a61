"""Coefficients of the solution ``g`` of Lagrange's equation ``g(z) = z psi(g(z))``.

The primary path is the inversion formula ``A_n = coeff_{n-1}[psi^n] / n``
with incremental powers.  In the exact backend the powers are taken of
``psi`` itself.  In the float backend ``A_n`` grows like ``rho^{-n}`` and would
overflow, so the powers are taken of the probability generating function
``p(z) = psi(s z) / psi(s)`` at a scale ``s`` (the apex when there is one)::

    A_n s^(n-1) / psi(s)^n = coeff_{n-1}[p^n] / n      (all terms <= 1)

and ``log A_n`` is recovered from it.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from . import asym, kernels
from .errors import ConvergenceError, DomainError
from .family import Classification, OffspringSpec, _probe_points, classify
from .series import (
    DEFAULT_N, EXACT, FLOAT, PowerSeries, compose, derivative, monomial, mul, power, reciprocal,
)

RESIDUAL_TOL = 1e-10


class Bounded(NamedTuple):
    value: float
    tail_bound: float


def _log_fraction(x: Fraction) -> float:
    if x == 0:
        return -math.inf
    return math.log(x.numerator) - math.log(x.denominator)


@dataclass(frozen=True, eq=False)
class LagrangeSolution:
    spec: OffspringSpec
    N: int
    backend: str
    log_A: np.ndarray
    scale: float
    scaled: np.ndarray
    rho: float
    tau: float | None
    Q: int
    classification: Classification
    exact_A: tuple | None = field(default=None, repr=False)

    @property
    def A(self):
        """Exact ``Fraction`` tuple in the exact backend, float array otherwise (``inf`` on overflow)."""
        if self.exact_A is not None:
            return self.exact_A
        with np.errstate(over="ignore"):
            return np.exp(self.log_A)

    @property
    def A_rho_n(self) -> np.ndarray:
        n = np.arange(self.N + 1)
        with np.errstate(invalid="ignore"):
            out = np.exp(self.log_A + n * math.log(self.rho))
        out[0] = 0.0
        return out

    def log_terms(self, log_x: float) -> np.ndarray:
        """``log(A_n x^n)`` for ``n = 0..N`` (``-inf`` where ``A_n = 0``)."""
        n = np.arange(self.N + 1)
        with np.errstate(invalid="ignore"):
            out = self.log_A + n * log_x
        out[0] = -math.inf
        return np.nan_to_num(out, nan=-math.inf)

    @property
    def profile(self) -> asym.AsymptoticProfile | None:
        if self.tau is None:
            return None
        return asym.profile(self.spec, self)

    def tail_bound(self, x: float) -> float:
        """Majorant of ``sum_{n>N} A_n x^n``.

        With an apex this is :func:`asym.tail_bound`.  Otherwise the last
        computed ``A_N rho^N`` is assumed to dominate the later ones (same
        empirical label).
        """
        if x <= 0:
            return 0.0
        prof = self.profile
        if prof is not None:
            return asym.tail_bound(prof, x, self.N)
        r = min(x / self.rho, 1.0)
        if r >= 1.0:
            return math.inf
        last = float(np.max(self.A_rho_n[max(1, self.N - self.Q + 1):]))
        return last * math.exp((self.N + 1) * math.log(r)) / (1.0 - r)


def _reference_scale(spec: OffspringSpec, cls: Classification) -> float:
    if cls.tau is not None:
        return cls.tau
    return 1.0 if math.isinf(spec.radius) else 0.5 * spec.radius


def radius(spec: OffspringSpec, cls: Classification | None = None) -> float:
    """Radius of convergence ``R_g = sup t / psi(t)``; ``tau / psi(tau)`` with an apex."""
    cls = cls or classify(spec)
    if cls.tau is not None:
        return cls.tau / spec.psi(cls.tau)
    # no apex: t/psi(t) increases on (0, R), take the limit along the probes
    vals = [t / spec.psi(t) for t in _probe_points(spec)]
    if abs(vals[-1] - vals[-2]) > 1e-9 * vals[-1]:
        raise ConvergenceError(f"sup t/psi(t) probe for {spec.name} has not converged")
    return vals[-1]


def _lagrange_exact(spec: OffspringSpec, N: int) -> list[Fraction]:
    b = PowerSeries(spec.coefficients(N - 1, exact=True), EXACT)
    pw = PowerSeries([1] + [0] * (N - 1), EXACT)
    A = [Fraction(0)]
    for n in range(1, N + 1):
        pw = mul(pw, b)
        A.append(pw[n - 1] / n)
    return A


def _pgf_coeffs(spec: OffspringSpec, s: float, N: int) -> np.ndarray:
    logb = spec.log_coefficients(N - 1)
    with np.errstate(invalid="ignore"):
        p = np.exp(logb + np.arange(N) * math.log(s) - spec.log_psi(s))
    return np.nan_to_num(p, nan=0.0)


def solve(spec: OffspringSpec, N: int = DEFAULT_N, backend: str = FLOAT, Q: int | None = None,
          check: bool = True) -> LagrangeSolution:
    """Lagrange coefficients ``A_0..A_N`` plus radius, apex and lattice period."""
    if N < 1:
        raise ValueError("N must be >= 1")
    cls = classify(spec)
    rho = radius(spec, cls)
    s = _reference_scale(spec, cls)
    log_s, log_psi_s = math.log(s), spec.log_psi(s)
    n = np.arange(N + 1)
    exact_A = None
    if backend == EXACT:
        A = _lagrange_exact(spec, N)
        if check:
            _check_exact(spec, A)
        exact_A = tuple(A)
        log_A = np.array([_log_fraction(a) for a in A])
        with np.errstate(invalid="ignore"):
            scaled = np.exp(log_A + (n - 1) * log_s - n * log_psi_s)
        scaled[0] = 0.0
    elif backend == FLOAT:
        p = _pgf_coeffs(spec, s, N)
        scaled = kernels.lagrange_scaled(p, N)
        if check:
            _check_float(p, scaled)
        with np.errstate(divide="ignore"):
            log_A = np.log(scaled) - (n - 1) * log_s + n * log_psi_s
        log_A[0] = -math.inf
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return LagrangeSolution(spec, N, backend, log_A, s, scaled, rho, cls.tau,
                            Q if Q is not None else spec.Q, cls, exact_A)


def _check_exact(spec: OffspringSpec, A: list[Fraction]):
    N = len(A) - 1
    g = PowerSeries(A, EXACT)
    psi = spec.series(N, exact=True)
    rhs = [Fraction(0)] + list(compose(psi, g).coeffs[:N])
    bad = [k for k in range(N + 1) if rhs[k] != A[k]]
    if bad:
        raise ConvergenceError(f"g - z psi(g) nonzero at orders {bad[:5]}")


def _check_float(p: np.ndarray, scaled: np.ndarray):
    N = len(scaled) - 1
    rhs = kernels.compose(p, scaled[:N], N)
    resid = float(np.max(np.abs(scaled[1:] - rhs))) if N else 0.0
    if resid > RESIDUAL_TOL:
        raise ConvergenceError(f"scaled Lagrange residual {resid:.3e} exceeds {RESIDUAL_TOL}")


def defining_residual(sol: LagrangeSolution) -> PowerSeries:
    """Coefficients of ``g(z) - z psi(g(z))`` up to order ``N`` (same backend as ``sol``)."""
    N = sol.N
    if sol.exact_A is not None:
        g = PowerSeries(sol.exact_A, EXACT)
        rhs = [Fraction(0)] + list(compose(sol.spec.series(N, exact=True), g).coeffs[:N])
        return PowerSeries([a - b for a, b in zip(sol.exact_A, rhs)], EXACT)
    p = _pgf_coeffs(sol.spec, sol.scale, N)
    rhs = np.concatenate([[0.0], kernels.compose(p, sol.scaled[:N], N)])
    return PowerSeries(sol.scaled - rhs, FLOAT)


def newton_solve(spec: OffspringSpec, N: int, backend: str = EXACT) -> PowerSeries:
    """Cross-check path: Newton iteration on ``F(g) = g - z psi(g)`` in series arithmetic."""
    psi = spec.series(N, exact=backend == EXACT)
    dpsi = PowerSeries(list(derivative(psi).coeffs) + [0], psi.backend)
    z = monomial(1, N, psi.backend)
    one = monomial(0, N, psi.backend)
    g = z * psi[0]
    for _ in range(max(1, N).bit_length() + 2):
        F = g - mul(z, compose(psi, g))
        J = one - mul(z, compose(dpsi, g))
        step = mul(F, reciprocal(J))
        g = g - step
        if all(c == 0 for c in step.coeffs):
            break
    return g


def h_form_coeff(spec: OffspringSpec, H: PowerSeries, n: int):
    """``coeff_n[H(g(z))] = coeff_{n-1}[H'(z) psi(z)^n] / n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    exact = H.exact
    psi = spec.series(n - 1, exact=exact)
    dH = derivative(H.truncate(max(H.truncation_order, n)))
    prod = mul(dH.truncate(n - 1), power(psi, n))
    return prod[n - 1] / n


def g_eval(sol: LagrangeSolution, x: float) -> Bounded:
    """Partial sum ``sum_{n<=N} A_n x^n`` for ``0 <= x <= rho`` with its tail majorant."""
    if x < 0 or x > sol.rho * (1 + 1e-12):
        raise DomainError(f"x={x} outside [0, rho={sol.rho}]")
    if x == 0:
        return Bounded(0.0, 0.0)
    x = min(x, sol.rho)
    value = float(np.sum(np.exp(sol.log_terms(math.log(x)))))
    return Bounded(value, sol.tail_bound(x))


def write_coefficients_csv(sol: LagrangeSolution, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["n", "A_n", "log_A_n", "A_n_rho_n"])
    A = sol.A
    scaled = sol.A_rho_n
    for k in range(1, sol.N + 1):
        try:
            a = float(A[k])
        except OverflowError:
            a = math.inf
        w.writerow([k, f"{a:.12g}", f"{sol.log_A[k]:.12g}", f"{scaled[k]:.12g}"])
