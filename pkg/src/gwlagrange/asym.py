"""Otter-Meir-Moon asymptotics of the Lagrange coefficients and tail majorants.

For an offspring series with an apex ``tau`` the coefficients satisfy
``A_n rho^n ~ C n^{-3/2}`` on the lattice ``n = 1 (mod Q)`` with
``C = Q tau / (sqrt(2 pi) sigma(tau))``.  :func:`tail_bound` turns that into an
*empirical majorant* of ``sum_{n > N} A_n x^n``: the constant is inflated by a
fixed calibration factor of 2, which is checked numerically rather than proved.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import NoApexError
from .family import OffspringSpec, variance

CALIBRATION = 2.0
BOUND_LABEL = "empirical-majorant"


@dataclass(frozen=True)
class AsymptoticProfile:
    C: float
    tau: float
    sigma_tau: float
    Q: int
    rho: float

    @property
    def K(self) -> float:
        return CALIBRATION * self.C


def profile(spec: OffspringSpec, sol) -> AsymptoticProfile:
    if sol.tau is None:
        raise NoApexError(f"{spec.name} has no apex; Otter-Meir-Moon constants undefined")
    sigma = math.sqrt(variance(spec, sol.tau))
    C = sol.Q * sol.tau / (math.sqrt(2 * math.pi) * sigma)
    return AsymptoticProfile(C, sol.tau, sigma, sol.Q, sol.rho)


def lattice(n_max: int, Q: int) -> np.ndarray:
    return np.arange(1, n_max + 1, Q)


def an_ratio_check(sol, prof: AsymptoticProfile, n_max: int):
    """Ratios ``A_n rho^n n^{3/2} / C`` on the lattice ``n = 1 (mod Q)``, ``n <= n_max``.

    Returns ``(ns, ratios)``; off-lattice indices are skipped (their ``A_n`` vanish).
    """
    if n_max > sol.N:
        raise ValueError(f"n_max={n_max} exceeds the solution truncation {sol.N}")
    ns = lattice(n_max, prof.Q)
    scaled = sol.A_rho_n[ns]
    return ns, scaled * ns ** 1.5 / prof.C


def tail_bound(prof: AsymptoticProfile, x: float, N: int) -> float:
    """Majorant of ``sum_{n>N} A_n x^n`` for ``0 <= x <= rho``."""
    if x <= 0:
        return 0.0
    r = min(x / prof.rho, 1.0)
    boundary = 2.0 * prof.K / math.sqrt(N)
    if r >= 1.0:
        return boundary
    log_geo = (N + 1) * math.log(r) - math.log1p(-r) - 1.5 * math.log(N)
    geometric = prof.K * math.exp(log_geo)
    return min(geometric, boundary)


def write_ratio_csv(sol, prof: AsymptoticProfile, n_max: int, fh):
    ns, ratios = an_ratio_check(sol, prof, n_max)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["n", "A_n_rho_n_n32", "ratio"])
    for n, r in zip(ns, ratios):
        w.writerow([int(n), f"{r * prof.C:.12g}", f"{r:.12g}"])
