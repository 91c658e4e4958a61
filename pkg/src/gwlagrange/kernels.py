"""Numeric hot loops, each in a numba flavour and a pure-numpy flavour.

The public names at the bottom of the module dispatch on
:data:`gwlagrange._accel.USE_NUMBA`.  Both flavours return identical values:
the convolution kernels up to floating-point summation order, the random
kernels bit for bit (they share a counter-based generator, so the order in
which draws are made does not matter).

Random numbers come from a two-level SplitMix64 scheme.  ``raw(key, j)`` is
the ``j+1``-th output of a SplitMix64 stream whose state starts at ``key``.
Tree ``i`` of a batch seeded with ``seed`` gets ``key_i = raw(seed, i)`` and
node ``j`` of that tree (breadth-first order) uses the uniform built from
``raw(key_i, j)``.
"""
from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

CENSORED = 1
EXTINCT = 0


def as_seed(seed: int) -> np.uint64:
    return np.uint64(int(seed) % (1 << 64))


# ---------------------------------------------------------------------------
# SplitMix64
# ---------------------------------------------------------------------------

@njit(nogil=True, cache=True)
def _mix_nb(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(nogil=True, cache=True)
def _uniform_nb(key, j):
    x = key + np.uint64(j + 1) * GOLDEN
    return np.float64(_mix_nb(x) >> _S11) * _INV53


def _mix_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def raw_stream(key, j) -> np.ndarray:
    """Raw 64-bit SplitMix64 outputs ``raw(key, j)`` (vectorised, wraps mod 2**64)."""
    key = np.asarray(key, dtype=np.uint64)
    j = np.asarray(j, dtype=np.int64).astype(np.uint64)
    return _mix_np(key + (j + np.uint64(1)) * GOLDEN)


def uniforms(key, j) -> np.ndarray:
    """Uniforms on [0, 1) with 53 random bits, same values as the compiled path."""
    return (raw_stream(key, j) >> _S11).astype(np.float64) * _INV53


def tree_keys(seed: int, start: int, count: int) -> np.ndarray:
    return raw_stream(as_seed(seed), np.arange(start, start + count, dtype=np.int64))


# ---------------------------------------------------------------------------
# truncated convolution, Horner, Lagrange powers
# ---------------------------------------------------------------------------

@njit(nogil=True, cache=True)
def _conv_trunc_nb(a, b, n):
    out = np.zeros(n)
    la = min(a.shape[0], n)
    lb = b.shape[0]
    for i in range(la):
        ai = a[i]
        if ai == 0.0:
            continue
        top = min(lb, n - i)
        for k in range(top):
            out[i + k] += ai * b[k]
    return out


def _conv_trunc_np(a, b, n):
    out = np.zeros(n)
    full = np.convolve(a[:n], b[:n])[:n]
    out[: full.shape[0]] = full
    return out


@njit(nogil=True, cache=True)
def _horner_nb(c, t):
    acc = 0.0
    for i in range(c.shape[0] - 1, -1, -1):
        acc = acc * t + c[i]
    return acc


def _horner_np(c, t):
    return float(np.polynomial.polynomial.polyval(t, c))


@njit(nogil=True, cache=True)
def _lagrange_scaled_nb(p, N):
    # c[n] = coeff_{n-1}[p^n] / n, powers kept to length N
    c = np.zeros(N + 1)
    pw = np.zeros(N)
    pw[0] = 1.0
    for n in range(1, N + 1):
        pw = _conv_trunc_nb(pw, p, N)
        c[n] = pw[n - 1] / n
    return c


def _lagrange_scaled_np(p, N):
    c = np.zeros(N + 1)
    pw = np.zeros(N)
    pw[0] = 1.0
    for n in range(1, N + 1):
        pw = _conv_trunc_np(pw, p, N)
        c[n] = pw[n - 1] / n
    return c


@njit(nogil=True, cache=True)
def _compose_nb(outer, inner, n):
    # Horner in series arithmetic; inner[0] is expected to be 0
    acc = np.zeros(n)
    for j in range(min(outer.shape[0], n) - 1, -1, -1):
        acc = _conv_trunc_nb(acc, inner, n)
        acc[0] += outer[j]
    return acc


def _compose_np(outer, inner, n):
    acc = np.zeros(n)
    for j in range(min(outer.shape[0], n) - 1, -1, -1):
        acc = _conv_trunc_np(acc, inner, n)
        acc[0] += outer[j]
    return acc


# ---------------------------------------------------------------------------
# Galton-Watson tree simulation with a node budget
# ---------------------------------------------------------------------------

@njit(nogil=True, cache=True)
def _draw_nb(cdf, u):
    k = 0
    last = cdf.shape[0] - 1
    while k < last and u >= cdf[k]:
        k += 1
    return k


@njit(nogil=True, cache=True)
def _simulate_nb(cdf, keys, budget, status, size, gens):
    for i in range(keys.shape[0]):
        key = keys[i]
        created = 1
        expanded = 0
        boundary = 0
        levels = 0
        st = EXTINCT
        while expanded < created:
            if expanded == boundary:
                levels += 1
                boundary = created
            created += _draw_nb(cdf, _uniform_nb(key, expanded))
            expanded += 1
            if created > budget:
                st = CENSORED
                break
        status[i] = st
        size[i] = created if st == EXTINCT else 0
        gens[i] = levels


def _simulate_np(cdf, keys, budget, status, size, gens):
    # level-synchronous; outcome per tree matches the sequential kernel
    m = keys.shape[0]
    created = np.ones(m, dtype=np.int64)
    expanded = np.zeros(m, dtype=np.int64)
    levels = np.zeros(m, dtype=np.int64)
    active = np.arange(m)
    status[:] = EXTINCT
    size[:] = 0
    while active.size:
        lo = expanded[active]
        hi = created[active]
        z = hi - lo
        levels[active] += 1
        starts = np.cumsum(z) - z
        seg = np.repeat(np.arange(active.size), z)
        j = lo[seg] + (np.arange(int(z.sum()), dtype=np.int64) - starts[seg])
        u = uniforms(keys[active][seg], j)
        y = np.searchsorted(cdf, u, side="right")
        created[active] = hi + np.add.reduceat(y, starts)
        expanded[active] = hi
        now = created[active]
        cens = now > budget
        ext = ~cens & (now == hi)
        status[active[cens]] = CENSORED
        size[active[ext]] = now[ext]
        active = active[~cens & ~ext]
    gens[:] = levels


@njit(nogil=True, cache=True)
def _bfs_offspring_nb(cdf, key, n):
    out = np.empty(n, dtype=np.int64)
    for j in range(n):
        out[j] = _draw_nb(cdf, _uniform_nb(key, j))
    return out


def _bfs_offspring_np(cdf, key, n):
    u = uniforms(np.full(n, key, dtype=np.uint64), np.arange(n))
    return np.searchsorted(cdf, u, side="right").astype(np.int64)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def conv_trunc(a, b, n: int) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    return _conv_trunc_nb(a, b, n) if USE_NUMBA else _conv_trunc_np(a, b, n)


def horner(c, t: float) -> float:
    c = np.ascontiguousarray(c, dtype=np.float64)
    return float(_horner_nb(c, float(t))) if USE_NUMBA else _horner_np(c, t)


def lagrange_scaled(p, N: int) -> np.ndarray:
    """``c[n] = coeff_{n-1}[p(z)^n] / n`` for ``1 <= n <= N`` (``c[0] = 0``)."""
    p = np.zeros(N) if len(p) == 0 else np.ascontiguousarray(p[:N], dtype=np.float64)
    return _lagrange_scaled_nb(p, N) if USE_NUMBA else _lagrange_scaled_np(p, N)


def compose(outer, inner, n: int) -> np.ndarray:
    outer = np.ascontiguousarray(outer, dtype=np.float64)
    inner = np.ascontiguousarray(inner, dtype=np.float64)
    return _compose_nb(outer, inner, n) if USE_NUMBA else _compose_np(outer, inner, n)


def simulate(cdf, keys, budget: int, use_numba: bool | None = None):
    """Simulate one tree per key; returns ``(status, size, generations)`` arrays."""
    cdf = np.ascontiguousarray(cdf, dtype=np.float64)
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    m = keys.shape[0]
    status = np.empty(m, dtype=np.int64)
    size = np.empty(m, dtype=np.int64)
    gens = np.empty(m, dtype=np.int64)
    fast = USE_NUMBA if use_numba is None else use_numba
    (_simulate_nb if fast else _simulate_np)(cdf, keys, int(budget), status, size, gens)
    return status, size, gens


def bfs_offspring(cdf, key, n: int, use_numba: bool | None = None) -> np.ndarray:
    cdf = np.ascontiguousarray(cdf, dtype=np.float64)
    fast = USE_NUMBA if use_numba is None else use_numba
    fn = _bfs_offspring_nb if fast else _bfs_offspring_np
    return fn(cdf, np.uint64(key), int(n))
