"""Offspring series and their Khinchin-family statistics.

An :class:`OffspringSpec` describes a power series ``psi`` with nonnegative
coefficients ``b_n`` and ``b_0 > 0``.  For ``0 <= t < R`` the Khinchin family
of ``psi`` is the law ``P(Y_t = n) = b_n t^n / psi(t)``; its mean is
``m(t) = t psi'(t) / psi(t)`` and its variance ``sigma^2(t) = t m'(t)``.
When the mean eventually exceeds 1 there is a unique apex ``tau`` with
``m(tau) = 1``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, reduce
from typing import Iterable

import numpy as np

from . import kernels
from .errors import ConvergenceError, DomainError, NoApexError
from .series import DEFAULT_N, EXACT, FLOAT, PowerSeries, to_fraction

PRESET_EXP = "preset-exp"
PRESET_GEOMETRIC = "preset-geometric"
POLYNOMIAL = "polynomial"
EXPLICIT = "explicit-coeffs"
KINDS = (PRESET_EXP, PRESET_GEOMETRIC, POLYNOMIAL, EXPLICIT)

APEX_TOL = 1e-12
PROBE_STEPS = 40


def _radius_to_json(r: float):
    return "inf" if math.isinf(r) else r


def _radius_from_json(r) -> float:
    if isinstance(r, str):
        return math.inf if r.strip().lower() in ("inf", "infinity") else float(r)
    return float(r)


@dataclass(frozen=True)
class OffspringSpec:
    """The offspring series ``psi``; presets carry closed forms, others coefficients."""

    kind: str
    coeffs: tuple = ()
    radius: float = math.inf
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "coeffs", tuple(to_fraction(c) for c in self.coeffs))
        object.__setattr__(self, "radius", float(self.radius))
        if self.kind == PRESET_EXP:
            object.__setattr__(self, "radius", math.inf)
        elif self.kind == PRESET_GEOMETRIC:
            object.__setattr__(self, "radius", 1.0)
        elif self.kind == POLYNOMIAL:
            object.__setattr__(self, "radius", math.inf)
        if not self.name:
            object.__setattr__(self, "name", self._default_name())
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.kind in (POLYNOMIAL, EXPLICIT):
            c = self.coeffs
            if not c or any(x < 0 for x in c):
                raise ValueError("coefficients must be nonnegative")
            if c[0] <= 0:
                raise ValueError("constant coefficient b_0 must be positive")
            if not any(x > 0 for x in c[1:]):
                raise ValueError("series must be non-constant")

    # -- constructors -----------------------------------------------------
    @classmethod
    def exp(cls) -> "OffspringSpec":
        return cls(PRESET_EXP)

    @classmethod
    def geometric(cls) -> "OffspringSpec":
        return cls(PRESET_GEOMETRIC)

    @classmethod
    def polynomial(cls, coeffs: Iterable, name: str = "") -> "OffspringSpec":
        return cls(POLYNOMIAL, tuple(coeffs), math.inf, name)

    @classmethod
    def explicit(cls, coeffs: Iterable, radius: float, name: str = "") -> "OffspringSpec":
        return cls(EXPLICIT, tuple(coeffs), radius, name)

    def _default_name(self) -> str:
        if self.kind == PRESET_EXP:
            return "exp(z)"
        if self.kind == PRESET_GEOMETRIC:
            return "1/(1-z)"
        terms = []
        for n, c in enumerate(self.coeffs):
            if not c:
                continue
            mono = "" if n == 0 else ("z" if n == 1 else f"z^{n}")
            coef = "" if (c == 1 and n) else str(c)
            terms.append(coef + ("*" if coef and mono else "") + mono)
        return " + ".join(terms)

    # -- serialisation ----------------------------------------------------
    def to_dict(self) -> dict:
        d = {"kind": self.kind, "radius": _radius_to_json(self.radius), "name": self.name}
        if self.kind in (POLYNOMIAL, EXPLICIT):
            d["coeffs"] = [str(c) for c in self.coeffs]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "OffspringSpec":
        return cls(d["kind"], tuple(d.get("coeffs", ())), _radius_from_json(d.get("radius", "inf")),
                   d.get("name", ""))

    @classmethod
    def from_json(cls, text: str) -> "OffspringSpec":
        return cls.from_dict(json.loads(text))

    # -- coefficients -----------------------------------------------------
    @property
    def is_preset(self) -> bool:
        return self.kind in (PRESET_EXP, PRESET_GEOMETRIC)

    @property
    def degree(self) -> int | None:
        if self.is_preset:
            return None
        return max(n for n, c in enumerate(self.coeffs) if c > 0)

    def coefficient(self, n: int) -> Fraction:
        if n < 0:
            raise IndexError(n)
        if self.kind == PRESET_EXP:
            return Fraction(1, math.factorial(n))
        if self.kind == PRESET_GEOMETRIC:
            return Fraction(1)
        return self.coeffs[n] if n < len(self.coeffs) else Fraction(0)

    def coefficients(self, N: int, exact: bool = False) -> list | np.ndarray:
        """``b_0..b_N``; explicit coefficient lists are padded with zeros."""
        if exact:
            return [self.coefficient(n) for n in range(N + 1)]
        if self.kind == PRESET_EXP:
            n = np.arange(N + 1)
            return np.exp(-np.array([math.lgamma(k + 1) for k in n]))
        if self.kind == PRESET_GEOMETRIC:
            return np.ones(N + 1)
        out = np.zeros(N + 1)
        m = min(N + 1, len(self.coeffs))
        out[:m] = [float(c) for c in self.coeffs[:m]]
        return out

    def log_coefficients(self, N: int) -> np.ndarray:
        """``log b_n`` (``-inf`` where ``b_n = 0``), computed without overflow."""
        if self.kind == PRESET_EXP:
            return -np.array([math.lgamma(k + 1) for k in range(N + 1)])
        if self.kind == PRESET_GEOMETRIC:
            return np.zeros(N + 1)
        with np.errstate(divide="ignore"):
            return np.log(self.coefficients(N))

    def series(self, N: int = DEFAULT_N, exact: bool = False) -> PowerSeries:
        return PowerSeries(self.coefficients(N, exact), EXACT if exact else FLOAT, self.radius)

    @property
    def Q(self) -> int:
        """gcd of the support ``{n >= 1 : b_n > 0}`` (presets: 1)."""
        if self.is_preset:
            return 1
        return reduce(math.gcd, (n for n, c in enumerate(self.coeffs) if n >= 1 and c > 0))

    # -- analytic evaluation ---------------------------------------------
    @cached_property
    def _poly(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        c = np.array([float(x) for x in self.coeffs])
        d1 = c[1:] * np.arange(1, len(c))
        d2 = d1[1:] * np.arange(1, len(d1)) if len(d1) > 1 else np.zeros(1)
        return c, (d1 if len(d1) else np.zeros(1)), d2

    def check_t(self, t: float, allow_zero: bool = True):
        if not (t > 0 or (allow_zero and t == 0)) or t >= self.radius:
            lo = "[0" if allow_zero else "(0"
            raise DomainError(f"t={t} outside {lo}, {self.radius}) for {self.name}")

    def psi(self, t: float) -> float:
        self.check_t(t)
        if self.kind == PRESET_EXP:
            return math.exp(t)
        if self.kind == PRESET_GEOMETRIC:
            return 1.0 / (1.0 - t)
        return kernels.horner(self._poly[0], t)

    def log_psi(self, t: float) -> float:
        if self.kind == PRESET_EXP:
            self.check_t(t)
            return float(t)
        if self.kind == PRESET_GEOMETRIC:
            self.check_t(t)
            return -math.log1p(-t)
        return math.log(self.psi(t))

    def dpsi(self, t: float) -> float:
        self.check_t(t)
        if self.kind == PRESET_EXP:
            return math.exp(t)
        if self.kind == PRESET_GEOMETRIC:
            return 1.0 / (1.0 - t) ** 2
        return kernels.horner(self._poly[1], t)

    def d2psi(self, t: float) -> float:
        self.check_t(t)
        if self.kind == PRESET_EXP:
            return math.exp(t)
        if self.kind == PRESET_GEOMETRIC:
            return 2.0 / (1.0 - t) ** 3
        return kernels.horner(self._poly[2], t)

    def pgf(self, t: float, z: float) -> float:
        """``psi_t(z) = psi(t z) / psi(t)``, the offspring generating function of ``Y_t``."""
        if self.kind == PRESET_EXP:
            return math.exp(t * (z - 1.0))
        if self.kind == PRESET_GEOMETRIC:
            return (1.0 - t) / (1.0 - t * z)
        return self.psi(t * z) / self.psi(t)


@dataclass
class FamilyPoint:
    t: float
    mass: np.ndarray
    mean: float
    variance: float
    tail_mass: float


@dataclass(frozen=True)
class Classification:
    k_star: bool
    M: float
    tau: float | None = None
    probes: tuple = field(default=(), repr=False)

    @property
    def label(self) -> str:
        return "K_star" if self.k_star else "K_plain"


def mass_function(spec: OffspringSpec, t: float, n_max: int) -> FamilyPoint:
    spec.check_t(t)
    if t == 0:
        mass = np.zeros(n_max + 1)
        mass[0] = 1.0
        return FamilyPoint(0.0, mass, 0.0, 0.0, 0.0)
    logb = spec.log_coefficients(n_max)
    with np.errstate(invalid="ignore"):
        mass = np.exp(logb + np.arange(n_max + 1) * math.log(t) - spec.log_psi(t))
    mass = np.nan_to_num(mass, nan=0.0)
    tail = max(0.0, 1.0 - float(mass.sum()))
    return FamilyPoint(float(t), mass, mean(spec, t), variance(spec, t), tail)


def mean(spec: OffspringSpec, t: float) -> float:
    spec.check_t(t)
    if t == 0:
        return 0.0
    if spec.kind == PRESET_EXP:
        return float(t)
    if spec.kind == PRESET_GEOMETRIC:
        return t / (1.0 - t)
    return t * spec.dpsi(t) / spec.psi(t)


def variance(spec: OffspringSpec, t: float) -> float:
    """``t m'(t) = m + t^2 psi''/psi - m^2`` evaluated from the analytic derivatives."""
    spec.check_t(t)
    if t == 0:
        return 0.0
    if spec.kind == PRESET_EXP:
        return float(t)
    if spec.kind == PRESET_GEOMETRIC:
        return t / (1.0 - t) ** 2
    m = mean(spec, t)
    return m + t * t * spec.d2psi(t) / spec.psi(t) - m * m


def _probe_points(spec: OffspringSpec):
    if math.isinf(spec.radius):
        return [2.0 ** k for k in range(0, PROBE_STEPS + 1)]
    return [spec.radius * (1.0 - 2.0 ** -k) for k in range(1, PROBE_STEPS + 1)]


def classify(spec: OffspringSpec) -> Classification:
    """Decide whether the limiting mean ``M`` exceeds 1 and, if so, locate the apex."""
    if spec.is_preset:
        M = math.inf
    elif math.isinf(spec.radius):
        # entire with finitely many terms: tψ'/ψ tends to the degree
        M = float(spec.degree)
    else:
        probes = []
        for t in _probe_points(spec):
            m = mean(spec, t)
            probes.append((t, m))
            if m > 1.0:
                break
        M = probes[-1][1]
        if M <= 1.0:
            if abs(probes[-1][1] - probes[-2][1]) > 1e-6:
                raise ConvergenceError(f"mean limit probe for {spec.name} has not converged")
            return Classification(False, M, None, tuple(probes))
        return Classification(True, M, solve_apex(spec), tuple(probes))
    if M <= 1.0:
        return Classification(False, M)
    return Classification(True, M, solve_apex(spec))


def solve_apex(spec: OffspringSpec, tol: float = APEX_TOL) -> float:
    """Root of ``m(t) = 1``: geometric bracketing, bisection, then safeguarded Newton."""
    lo, hi = 0.0, None
    for t in _probe_points(spec):
        if mean(spec, t) > 1.0:
            hi = t
            break
        lo = t
    if hi is None:
        raise NoApexError(f"mean of {spec.name} never exceeds 1 within the probe budget")

    def f(t):
        return mean(spec, t) - 1.0

    while hi - lo > 1e-3 * hi:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    t = 0.5 * (lo + hi)
    for _ in range(100):
        ft = f(t)
        if ft == 0:
            return t
        if ft > 0:
            hi = t
        else:
            lo = t
        step = ft * t / variance(spec, t)  # m'(t) = sigma^2(t) / t
        if abs(ft) <= tol and abs(step) <= 1e-15 * t:
            return t
        nxt = t - step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if nxt == t or hi - lo <= 4 * np.finfo(float).eps * hi:
            break
        t = nxt
    if abs(f(t)) <= 10 * tol:
        return t
    raise ConvergenceError(f"apex solver for {spec.name} stalled at t={t}, m-1={f(t):.3e}")
