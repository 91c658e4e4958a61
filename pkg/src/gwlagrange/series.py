"""Truncated power series with a float64 or exact-rational backend.

A :class:`PowerSeries` holds the coefficients ``c[0..N]`` of a truncation of
order ``N``.  The float backend stores a read-only ``numpy`` array and routes
convolutions through :mod:`gwlagrange.kernels`; the exact backend stores a
tuple of :class:`fractions.Fraction` and is meant for the small-``N`` oracle
paths where identities must hold with equality.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import kernels
from .errors import BackendMismatchError, DomainError

FLOAT = "float"
EXACT = "exact"
DEFAULT_N = 256


def to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    return Fraction(x)


@dataclass(frozen=True, eq=False)
class PowerSeries:
    coeffs: tuple | np.ndarray
    backend: str = FLOAT
    radius: float = math.inf

    def __post_init__(self):
        if self.backend == FLOAT:
            arr = np.array(self.coeffs, dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, "coeffs", arr)
        elif self.backend == EXACT:
            object.__setattr__(self, "coeffs", tuple(to_fraction(c) for c in self.coeffs))
        else:
            raise ValueError(f"unknown backend {self.backend!r}")
        if len(self.coeffs) == 0:
            raise ValueError("a power series needs at least one coefficient")

    @property
    def truncation_order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def exact(self) -> bool:
        return self.backend == EXACT

    def __len__(self):
        return len(self.coeffs)

    def __getitem__(self, n):
        if isinstance(n, slice):
            return self.coeffs[n]
        if n < 0:
            raise IndexError(n)
        if n >= len(self.coeffs):
            return Fraction(0) if self.exact else 0.0
        return self.coeffs[n]

    @property
    def nonnegative(self) -> bool:
        return all(c >= 0 for c in self.coeffs)

    def is_class_k(self) -> bool:
        """Nonnegative, positive constant term, and not constant."""
        c = self.coeffs
        return self.nonnegative and c[0] > 0 and any(x > 0 for x in c[1:])

    def truncate(self, N: int) -> "PowerSeries":
        c = list(self.coeffs[: N + 1])
        zero = Fraction(0) if self.exact else 0.0
        c += [zero] * (N + 1 - len(c))
        return PowerSeries(c, self.backend, self.radius)

    def to_float(self) -> "PowerSeries":
        if not self.exact:
            return self
        return PowerSeries([float(c) for c in self.coeffs], FLOAT, self.radius)

    def to_exact(self) -> "PowerSeries":
        if self.exact:
            return self
        return PowerSeries([Fraction(float(c)) for c in self.coeffs], EXACT, self.radius)

    def equals(self, other: "PowerSeries") -> bool:
        if len(self) != len(other):
            return False
        return all(a == b for a, b in zip(self.coeffs, other.coeffs))

    def __call__(self, t):
        return evaluate(self, t)

    def __mul__(self, other):
        if isinstance(other, PowerSeries):
            return mul(self, other)
        return PowerSeries([c * other for c in self.coeffs], self.backend, self.radius)

    __rmul__ = __mul__

    def __add__(self, other: "PowerSeries"):
        _check_backends(self, other)
        n = min(len(self), len(other))
        return PowerSeries([self.coeffs[i] + other.coeffs[i] for i in range(n)], self.backend,
                           min(self.radius, other.radius))

    def __sub__(self, other: "PowerSeries"):
        return self + other * -1

    def __pow__(self, n: int):
        return power(self, n)

    def __repr__(self):
        head = ", ".join(str(c) for c in list(self.coeffs[:6]))
        more = ", ..." if len(self) > 6 else ""
        return f"PowerSeries([{head}{more}], N={self.truncation_order}, backend={self.backend})"


def _check_backends(a: PowerSeries, b: PowerSeries):
    if a.backend != b.backend:
        raise BackendMismatchError(f"cannot combine {a.backend} and {b.backend} series")


def constant(value, N: int, backend: str = FLOAT) -> PowerSeries:
    zero = Fraction(0) if backend == EXACT else 0.0
    return PowerSeries([value] + [zero] * N, backend)


def monomial(k: int, N: int, backend: str = FLOAT) -> PowerSeries:
    c = [0] * (N + 1)
    if k <= N:
        c[k] = 1
    return PowerSeries(c, backend)


def evaluate(s: PowerSeries, t):
    """Horner evaluation of the truncation at ``0 <= t < radius``."""
    if t < 0 or t >= s.radius:
        raise DomainError(f"t={t} outside [0, {s.radius})")
    if s.exact:
        acc = Fraction(0) if isinstance(t, (int, Fraction)) else 0.0
        for c in reversed(s.coeffs):
            acc = acc * t + c
        return acc
    return kernels.horner(s.coeffs, float(t))


def _mul_exact(a: Sequence[Fraction], b: Sequence[Fraction], n: int) -> list[Fraction]:
    out = [Fraction(0)] * n
    for i, ai in enumerate(a[:n]):
        if ai == 0:
            continue
        for k in range(min(len(b), n - i)):
            bk = b[k]
            if bk:
                out[i + k] += ai * bk
    return out


def mul(a: PowerSeries, b: PowerSeries) -> PowerSeries:
    """Cauchy product truncated at ``min(N_a, N_b)``."""
    _check_backends(a, b)
    n = min(len(a), len(b))
    radius = min(a.radius, b.radius)
    if a.exact:
        return PowerSeries(_mul_exact(a.coeffs, b.coeffs, n), EXACT, radius)
    return PowerSeries(kernels.conv_trunc(a.coeffs, b.coeffs, n), FLOAT, radius)


def power(s: PowerSeries, n: int) -> PowerSeries:
    """``s**n`` by repeated squaring; ``power(s, 0)`` is the constant 1."""
    if n < 0:
        raise ValueError("negative powers are not supported")
    result = constant(1, s.truncation_order, s.backend)
    base = s
    while n:
        if n & 1:
            result = mul(result, base)
        n >>= 1
        if n:
            base = mul(base, base)
    return PowerSeries(result.coeffs, s.backend, s.radius)


def derivative(s: PowerSeries) -> PowerSeries:
    if s.truncation_order < 1:
        raise ValueError("derivative needs truncation order >= 1")
    c = [(n + 1) * s.coeffs[n + 1] for n in range(s.truncation_order)]
    return PowerSeries(c, s.backend, s.radius)


def compose(outer: PowerSeries, inner: PowerSeries) -> PowerSeries:
    """``outer(inner(z))`` truncated at ``min(N_outer, N_inner)``; needs ``inner[0] = 0``."""
    _check_backends(outer, inner)
    if inner[0] != 0:
        raise ValueError("composition needs an inner series without constant term")
    n = min(len(outer), len(inner))
    if outer.exact:
        acc = [Fraction(0)] * n
        for j in range(n - 1, -1, -1):
            acc = _mul_exact(acc, inner.coeffs, n)
            acc[0] += outer.coeffs[j]
        return PowerSeries(acc, EXACT)
    return PowerSeries(kernels.compose(outer.coeffs, inner.coeffs, n), FLOAT)


def reciprocal(s: PowerSeries) -> PowerSeries:
    """``1/s`` for a series with nonzero constant term (used by the Newton cross-check)."""
    if s[0] == 0:
        raise ZeroDivisionError("reciprocal of a series with zero constant term")
    n = len(s)
    out = [None] * n
    inv0 = 1 / s[0] if s.exact else 1.0 / float(s[0])
    out[0] = inv0
    for k in range(1, n):
        acc = 0
        for i in range(1, k + 1):
            acc += s.coeffs[i] * out[k - i]
        out[k] = -acc * inv0
    return PowerSeries(out, s.backend)
