"""Rooted plane trees: exhaustive enumeration and weights.

This is the exact combinatorial oracle.  A tree of size ``n`` with ``k_j``
nodes of outdegree ``j`` has weight ``prod_j b_j^{k_j}``; summing weights over
all ``Catalan(n-1)`` plane trees of size ``n`` must reproduce the Lagrange
coefficient ``A_n``.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterator, Sequence

from .errors import SizeCapError
from .family import OffspringSpec

MAX_N = 12


@dataclass(frozen=True)
class PlaneTree:
    children: tuple["PlaneTree", ...] = ()

    @property
    def size(self) -> int:
        return 1 + sum(c.size for c in self.children)

    @property
    def outdegree(self) -> int:
        return len(self.children)

    @property
    def height(self) -> int:
        return 0 if not self.children else 1 + max(c.height for c in self.children)

    def nodes(self) -> Iterator["PlaneTree"]:
        """Preorder traversal."""
        yield self
        for c in self.children:
            yield from c.nodes()

    def profile(self) -> Counter:
        """Outdegree profile ``j -> k_j(a)``."""
        return Counter(node.outdegree for node in self.nodes())

    def bfs_degrees(self) -> list[int]:
        out, level = [], [self]
        while level:
            out.extend(node.outdegree for node in level)
            level = [c for node in level for c in node.children]
        return out

    def to_parens(self) -> str:
        return "(" + "".join(c.to_parens() for c in self.children) + ")"

    def __str__(self):
        return self.to_parens()


LEAF = PlaneTree()


def from_parens(text: str) -> PlaneTree:
    stack: list[list[PlaneTree]] = []
    root = None
    for ch in text.strip():
        if ch == "(":
            stack.append([])
        elif ch == ")":
            if not stack:
                raise ValueError(f"unbalanced parentheses in {text!r}")
            node = PlaneTree(tuple(stack.pop()))
            if stack:
                stack[-1].append(node)
            elif root is None:
                root = node
            else:
                raise ValueError(f"more than one tree in {text!r}")
        else:
            raise ValueError(f"unexpected character {ch!r}")
    if root is None or stack:
        raise ValueError(f"unbalanced parentheses in {text!r}")
    return root


def from_bfs_degrees(degrees: Sequence[int]) -> PlaneTree:
    """Rebuild a finite tree from its breadth-first outdegree sequence."""
    n = len(degrees)
    if n == 0 or sum(degrees) != n - 1:
        raise ValueError("degree sequence does not describe a finite tree")
    child_ranges, nxt = [], 1
    for d in degrees:
        child_ranges.append(range(nxt, nxt + d))
        nxt += d
    built: list[PlaneTree | None] = [None] * n
    for i in range(n - 1, -1, -1):
        built[i] = PlaneTree(tuple(built[j] for j in child_ranges[i]))
    return built[0]


def _compositions(m: int) -> Iterator[tuple[int, ...]]:
    # lexicographic order: (1, 1) before (2,)
    if m == 0:
        yield ()
        return
    for first in range(1, m + 1):
        for rest in _compositions(m - first):
            yield (first,) + rest


@lru_cache(maxsize=None)
def _all_trees(n: int) -> tuple[PlaneTree, ...]:
    out = []
    for comp in _compositions(n - 1):
        for kids in itertools.product(*(_all_trees(k) for k in comp)):
            out.append(PlaneTree(tuple(kids)))
    return tuple(out)


def enumerate_trees(n: int) -> Iterator[PlaneTree]:
    """Every rooted plane tree with ``n`` nodes, once, in deterministic order."""
    if not 1 <= n <= MAX_N:
        raise SizeCapError(f"enumeration supports 1 <= n <= {MAX_N}, got {n}")
    return iter(_all_trees(n))


def catalan(k: int) -> int:
    return math.comb(2 * k, k) // (k + 1)


def weight(a: PlaneTree, spec: OffspringSpec) -> Fraction:
    w = Fraction(1)
    for j, k in a.profile().items():
        w *= spec.coefficient(j) ** k
    return w


def tree_probability(a: PlaneTree, spec: OffspringSpec, t: float) -> float:
    """``P(T_t = a) = omega(a) t^{n-1} / psi(t)^n``."""
    spec.check_t(t, allow_zero=False)
    w = weight(a, spec)
    if w == 0:
        return 0.0
    n = a.size
    return math.exp(math.log(w.numerator) - math.log(w.denominator)
                    + (n - 1) * math.log(t) - n * spec.log_psi(t))


# -- subclass predicates ----------------------------------------------------

@dataclass(frozen=True)
class SubclassPredicate:
    name: str
    accepts: Callable[[PlaneTree], bool]

    def __call__(self, a: PlaneTree) -> bool:
        return self.accepts(a)


ALL = SubclassPredicate("all", lambda a: True)


def parse_predicate(name: str) -> SubclassPredicate:
    """Named subclasses: ``all``, ``root_outdegree=K``, ``max_outdegree=K``,
    ``height<=H``, ``leaves=K``, ``binary`` (outdegrees in {0, 2})."""
    key = name.strip().replace(" ", "")
    if key == "all":
        return ALL
    if key == "binary":
        return SubclassPredicate(key, lambda a: set(a.profile()) <= {0, 2})
    for prefix, make in (
        ("root_outdegree=", lambda k: (lambda a: a.outdegree == k)),
        ("max_outdegree=", lambda k: (lambda a: max(a.profile()) <= k)),
        ("height<=", lambda k: (lambda a: a.height <= k)),
        ("leaves=", lambda k: (lambda a: a.profile()[0] == k)),
    ):
        if key.startswith(prefix):
            return SubclassPredicate(key, make(int(key[len(prefix):])))
    raise ValueError(f"unknown subclass predicate {name!r}")


def sum_weights(n: int, spec: OffspringSpec, pred: SubclassPredicate = ALL) -> Fraction:
    """``R_n``: exact weight of the size-``n`` trees accepted by ``pred``."""
    return sum((weight(a, spec) for a in enumerate_trees(n) if pred(a)), Fraction(0))
