"""Closed walks at the root of the (q+1)-regular tree.

Walks are grouped by occupation profile ``{k: m_k}`` (``m_k`` vertices visited
exactly ``k`` times).  Each class carries an integer polynomial in ``q`` that
counts the walks of the class on the concrete tree for every integer ``q >= 1``.

The enumeration is symbolic: a walk that steps to a child it has not used yet
is recorded once, with the multiplicity factor ``q + 1 - u`` at the root and
``q - u`` elsewhere (``u`` = children of that vertex already used).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

DEFAULT_ORDER_CAP = 16
BRUTE_FORCE_MAX_N = 12
BRUTE_FORCE_MAX_Q = 3

Profile = Tuple[Tuple[int, int], ...]


class OrderCapError(ValueError):
    """Raised when an enumeration is requested beyond the configured cap."""


@dataclass(frozen=True, order=True)
class OccupationProfile:
    """Occupation multiplicities, stored as sorted ``(k, m_k)`` pairs with ``m_k > 0``."""

    items: Profile

    @classmethod
    def from_mapping(cls, mapping: Dict[int, int]) -> "OccupationProfile":
        items = tuple(sorted((int(k), int(m)) for k, m in mapping.items() if m))
        for k, m in items:
            if k < 1 or m < 0:
                raise ValueError(f"invalid profile entry {k}:{m}")
        return cls(items)

    @classmethod
    def from_visits(cls, visits: Iterable[int]) -> "OccupationProfile":
        return cls.from_mapping(Counter(v for v in visits if v > 0))

    def as_dict(self) -> Dict[int, int]:
        return dict(self.items)

    @property
    def total_visits(self) -> int:
        """``sum_k k m_k``; equals walk length + 1."""
        return sum(k * m for k, m in self.items)

    @property
    def vertices(self) -> int:
        return sum(m for _, m in self.items)

    def sorted_list(self) -> List[int]:
        """Nonincreasing list of occupation numbers, e.g. ``[3, 1, 1]``."""
        out: List[int] = []
        for k, m in sorted(self.items, reverse=True):
            out.extend([k] * m)
        return out

    def __str__(self) -> str:
        return "(" + ",".join(map(str, self.sorted_list())) + ")"


@dataclass(frozen=True)
class CountPolynomial:
    """Integer polynomial in ``q``; ``coefficients[j]`` multiplies ``q**j``."""

    coefficients: Tuple[int, ...]

    def __post_init__(self) -> None:
        coeffs = list(self.coefficients)
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs.pop()
        object.__setattr__(self, "coefficients", tuple(int(c) for c in coeffs) or (0,))

    def __call__(self, q: int) -> int:
        value = 0
        for c in reversed(self.coefficients):
            value = value * q + c
        return value

    def __add__(self, other: "CountPolynomial") -> "CountPolynomial":
        n = max(len(self.coefficients), len(other.coefficients))
        a = self.coefficients + (0,) * (n - len(self.coefficients))
        b = other.coefficients + (0,) * (n - len(other.coefficients))
        return CountPolynomial(tuple(x + y for x, y in zip(a, b)))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __str__(self) -> str:
        terms = []
        for j in range(len(self.coefficients) - 1, -1, -1):
            c = self.coefficients[j]
            if c == 0:
                continue
            mono = "" if j == 0 else ("q" if j == 1 else f"q^{j}")
            if mono and abs(c) == 1:
                coef = "-" if c < 0 else ""
            else:
                coef = str(c)
            terms.append(f"{coef}{mono}")
        return " + ".join(terms).replace("+ -", "- ") if terms else "0"


WalkClass = Tuple[OccupationProfile, CountPolynomial]


def _mul_linear(poly: List[int], c: int) -> List[int]:
    """Multiply ``poly`` by ``(q + c)``."""
    out = [0] * (len(poly) + 1)
    for j, p in enumerate(poly):
        out[j] += c * p
        out[j + 1] += p
    return out


def _check_cap(n: int, cap: int) -> None:
    if n < 0:
        raise ValueError(f"walk length must be nonnegative, got {n}")
    if n > cap:
        raise OrderCapError(
            f"walk length {n} exceeds the enumeration cap {cap}; the number of "
            f"classes grows exponentially (raise `cap` explicitly to override)"
        )


def _symbolic_walks(n: int, prune_parity: bool = True):
    """Yield ``(visit_counts, poly)`` for every canonical closed walk of length ``n``."""
    # vertex 0 is the root; parent[v], depth[v], children[v] = canonical used children
    parent = [-1]
    depth = [0]
    children: List[List[int]] = [[]]
    visits = [1]
    polys: List[List[int]] = [[1]]

    def step(v: int, remaining: int):
        if remaining == 0:
            if v == 0:
                yield visits, polys[-1]
            return
        if depth[v] > remaining:
            return
        if prune_parity and (depth[v] - remaining) % 2:
            return
        nxt = remaining - 1
        if v != 0:
            p = parent[v]
            visits[p] += 1
            yield from step(p, nxt)
            visits[p] -= 1
        for c in children[v]:
            visits[c] += 1
            yield from step(c, nxt)
            visits[c] -= 1
        # a fresh child is only useful if the walk can still come back
        if depth[v] + 1 <= nxt:
            u = len(children[v])
            shift = 1 - u if v == 0 else -u
            new = len(parent)
            parent.append(v)
            depth.append(depth[v] + 1)
            children.append([])
            visits.append(1)
            children[v].append(new)
            polys.append(_mul_linear(polys[-1], shift))
            yield from step(new, nxt)
            polys.pop()
            children[v].pop()
            visits.pop()
            children.pop()
            depth.pop()
            parent.pop()

    yield from step(0, n)


def enumerate_walk_classes(n: int, cap: int = DEFAULT_ORDER_CAP) -> List[WalkClass]:
    """All occupation-profile classes of closed root walks of length ``n``.

    Returns ``(profile, count_polynomial)`` pairs sorted by profile.  Odd ``n``
    gives an empty list.
    """
    _check_cap(n, cap)
    if n % 2:
        return []
    return _group(_symbolic_walks(n))


def _group(walks) -> List[WalkClass]:
    acc: Dict[OccupationProfile, List[int]] = {}
    for visits, poly in walks:
        prof = OccupationProfile.from_visits(visits)
        cur = acc.get(prof)
        if cur is None:
            acc[prof] = list(poly)
        else:
            if len(cur) < len(poly):
                cur.extend([0] * (len(poly) - len(cur)))
            for j, c in enumerate(poly):
                cur[j] += c
    return [(prof, CountPolynomial(tuple(acc[prof]))) for prof in sorted(acc)]


def enumerate_walk_classes_unpruned(n: int, cap: int = DEFAULT_ORDER_CAP) -> List[WalkClass]:
    """Same as :func:`enumerate_walk_classes` but runs the search for odd ``n`` too.

    Used as an empirical parity check: no shortcut on ``n % 2``.
    """
    _check_cap(n, cap)
    return _group(_symbolic_walks(n, prune_parity=False))


def count_closed_walks(n: int, q: int, cap: int = DEFAULT_ORDER_CAP) -> int:
    """Number of closed walks of length ``n`` at the root of the (q+1)-regular tree."""
    if q < 1:
        raise ValueError("q must be >= 1")
    return sum(poly(q) for _, poly in enumerate_walk_classes(n, cap))


# --- explicit oracles -------------------------------------------------------

VertexPath = Tuple[int, ...]
ROOT: VertexPath = ()


def neighbors(v: VertexPath, q: int) -> List[VertexPath]:
    """Neighbors of ``v`` in the canonically labeled tree (parent first)."""
    if not v:
        return [(i,) for i in range(1, q + 2)]
    return [v[:-1]] + [v + (i,) for i in range(1, q + 1)]


def brute_force_walks(n: int, q: int) -> List[List[VertexPath]]:
    """Every closed root walk of length ``n`` as an explicit vertex sequence.

    Plain depth-first search over the labeled tree; only meant as a test oracle.
    """
    if n < 0 or q < 1:
        raise ValueError("need n >= 0 and q >= 1")
    if n > BRUTE_FORCE_MAX_N or q > BRUTE_FORCE_MAX_Q:
        raise OrderCapError(
            f"explicit enumeration limited to n <= {BRUTE_FORCE_MAX_N}, q <= {BRUTE_FORCE_MAX_Q}"
        )
    out: List[List[VertexPath]] = []
    path: List[VertexPath] = [ROOT]

    def dfs(remaining: int) -> None:
        v = path[-1]
        if remaining == 0:
            if not v:
                out.append(list(path))
            return
        if len(v) > remaining:
            return
        for w in neighbors(v, q):
            path.append(w)
            dfs(remaining - 1)
            path.pop()

    dfs(n)
    return out


def group_walks(walks: Sequence[Sequence[VertexPath]]) -> Dict[OccupationProfile, int]:
    """Occupation-profile histogram of explicit walks."""
    hist: Counter = Counter()
    for w in walks:
        hist[OccupationProfile.from_visits(Counter(w).values())] += 1
    return dict(hist)


def transfer_count(n: int, q: int) -> int:
    """Closed-walk count by dynamic programming over the distance from the root.

    Independent of both enumerators; exact for any ``n``.
    """
    if n % 2:
        return 0
    # ways[d] = number of walks currently at a given distance d (all vertices at d summed)
    ways = {0: 1}
    for _ in range(n):
        nxt: Dict[int, int] = {}
        for d, w in ways.items():
            if d == 0:
                nxt[1] = nxt.get(1, 0) + w * (q + 1)
            else:
                nxt[d - 1] = nxt.get(d - 1, 0) + w
                nxt[d + 1] = nxt.get(d + 1, 0) + w * q
        ways = nxt
    return ways.get(0, 0)


# --- geometry ----------------------------------------------------------------

def sphere_size(q: int, R: int) -> int:
    if q < 1 or R < 0:
        raise ValueError("need q >= 1 and R >= 0")
    if R == 0:
        return 1
    return (q + 1) * q ** (R - 1)


def ball_size(q: int, R: int) -> int:
    if q < 1 or R < 0:
        raise ValueError("need q >= 1 and R >= 0")
    if q == 1:
        return sum(sphere_size(1, r) for r in range(R + 1))
    return 1 + (q + 1) * (q**R - 1) // (q - 1)


def spectrum_window(q: int, lam: float, supp: Tuple[float, float]) -> Tuple[float, float]:
    """Almost-sure spectrum ``[-2 sqrt q, 2 sqrt q] + lam * supp``."""
    if lam <= 0:
        raise ValueError("disorder strength must be positive")
    lo, hi = supp
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise ValueError("support must be a bounded interval")
    r = 2.0 * math.sqrt(q)
    return (lam * lo - r, lam * hi + r)


# --- tables ------------------------------------------------------------------

@dataclass
class CoefficientTable:
    """Walk classes for every order ``0..max_order``."""

    max_order: int
    rows: Dict[int, List[WalkClass]] = field(default_factory=dict)

    @classmethod
    def build(cls, max_order: int, cap: int = DEFAULT_ORDER_CAP) -> "CoefficientTable":
        _check_cap(max_order, cap)
        return cls(max_order, {n: enumerate_walk_classes(n, cap) for n in range(max_order + 1)})

    def row(self, n: int) -> List[WalkClass]:
        if n > self.max_order:
            raise KeyError(f"table only holds orders <= {self.max_order}")
        return self.rows[n]

    def to_json_rows(self) -> List[dict]:
        return [row_to_json(n, self.rows[n]) for n in sorted(self.rows)]

    @classmethod
    def from_json_rows(cls, rows: List[dict]) -> "CoefficientTable":
        parsed = dict(row_from_json(r) for r in rows)
        return cls(max(parsed) if parsed else 0, parsed)


def row_to_json(n: int, classes: List[WalkClass]) -> dict:
    return {
        "n": n,
        "classes": [
            {
                "profile": {str(k): m for k, m in sorted(prof.items, reverse=True)},
                "count_poly": list(poly.coefficients),
            }
            for prof, poly in classes
        ],
    }


def row_from_json(obj: dict) -> Tuple[int, List[WalkClass]]:
    classes = [
        (
            OccupationProfile.from_mapping({int(k): int(m) for k, m in c["profile"].items()}),
            CountPolynomial(tuple(int(x) for x in c["count_poly"])),
        )
        for c in obj["classes"]
    ]
    return int(obj["n"]), sorted(classes)
