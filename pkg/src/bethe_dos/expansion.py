"""Strong-disorder expansion of the averaged root Green function and the density of states.

``m_lambda(lambda zeta) = sum_n lambda**(-n-1) M_n(zeta) + remainder`` with
``M_n = (-1)**n sum_classes count(q) prod_k s_k(zeta)**m_k``.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .stieltjes import (
    AnalyticWindow,
    DomainError,
    Law,
    UniformLaw,
    s_continued_all,
    s_upper_all,
    single_site_constant,
)
from .treewalk import DEFAULT_ORDER_CAP, CoefficientTable, WalkClass

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExpansionParams:
    q: int
    lam: float
    order: int
    window: AnalyticWindow
    law: Law
    sharp_norm: bool = False

    def __post_init__(self) -> None:
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.order < 0:
            raise ValueError("order must be >= 0")


@dataclass(frozen=True)
class RemainderBudget:
    C_delta: float
    K_delta: float
    Q_delta: float
    lambda0: float
    C_N_delta: float
    order: int
    rigorous: bool

    def bound(self, lam: float) -> float:
        """Truncation bound ``C_{N,delta} lam**(-N-2)``."""
        return self.C_N_delta * lam ** (-self.order - 2)


def remainder_budget(window: AnalyticWindow, q: int, law: Law, N: int,
                     sharp_norm: bool = False) -> RemainderBudget:
    """Constants of the uniform truncation bound.

    ``sharp_norm`` replaces the hopping bound ``q + 1`` by ``2 sqrt(q)``; the
    result is then flagged non-rigorous.
    """
    C, certified = single_site_constant(law, window)
    hop = 2.0 * math.sqrt(q) if sharp_norm else float(q + 1)
    K = max(1.0, C) / (window.delta0 - window.delta)
    Q = hop * K
    lam0 = max(2.0 * Q, 2.0 * hop / window.delta)
    return RemainderBudget(C, K, Q, lam0, 2.0 * K * Q ** (N + 1), N, certified and not sharp_norm)


class TransformCache:
    """Per-point memo of ``s_1 .. s_kmax``; one instance serves every order."""

    def __init__(self, law: Law, window: AnalyticWindow):
        self.law = law
        self.window = window
        self._store: Dict[complex, Tuple[np.ndarray, float, bool]] = {}
        self._lock = threading.Lock()

    def get(self, zeta: complex, kmax: int) -> Tuple[np.ndarray, float, bool]:
        """``(s[0..kmax-1], quadrature error estimate, continued?)`` at ``zeta``."""
        zeta = complex(zeta)
        hit = self._store.get(zeta)
        if hit is not None and hit[0].shape[0] >= kmax:
            return hit
        if bool(self.window.contains(zeta)):
            vals, err = s_continued_all(self.law, kmax, zeta, self.window, with_error=True)
            entry = (np.asarray(vals), float(err), True)
        elif zeta.imag > 0:
            entry = (np.asarray(s_upper_all(self.law, kmax, zeta)), 0.0, False)
        else:
            raise DomainError(f"{zeta} is neither in Omega_delta(I) nor in the upper half-plane")
        with self._lock:
            self._store[zeta] = entry
        return entry


def _class_sum(row: Sequence[WalkClass], q: int, s: np.ndarray) -> Tuple[complex, float]:
    total = 0j
    absolute = 0.0
    for prof, poly in row:
        term = complex(poly(q))
        for k, m in prof.items:
            term *= s[k - 1] ** m
        total += term
        absolute += abs(term)
    return total, absolute


def M_n(row: Sequence[WalkClass], law: Law, window: AnalyticWindow, q: int, zeta: complex,
        cache: Optional[TransformCache] = None) -> complex:
    """Coefficient function of order ``n`` (the row's walk length) at ``zeta``."""
    if not row:
        return 0j
    n = row[0][0].total_visits - 1
    cache = cache or TransformCache(law, window)
    s, _, _ = cache.get(zeta, n + 1)
    total, _ = _class_sum(row, q, s)
    return (-1) ** n * total


@dataclass(frozen=True)
class PartialSum:
    value: complex
    remainder_bound: float
    rigorous: bool
    terms: Tuple[complex, ...]
    numerical_error: float = 0.0


class Expansion:
    """Coefficient table plus transform cache for one ``(law, window, q)``."""

    def __init__(self, law: Law, window: AnalyticWindow, q: int, max_order: int,
                 table: Optional[CoefficientTable] = None, cap: int = DEFAULT_ORDER_CAP):
        law.check_window(window)
        self.law, self.window, self.q = law, window, q
        self.table = table if table is not None else CoefficientTable.build(max_order, cap)
        self.cache = TransformCache(law, window)

    def coefficients(self, zeta: complex, N: int) -> Tuple[List[complex], float]:
        """``[M_0(zeta), ..., M_N(zeta)]`` and a numerical-error estimate for the sum."""
        if N > self.table.max_order:
            self.table = CoefficientTable.build(N, max(N, DEFAULT_ORDER_CAP))
        s, err, _ = self.cache.get(zeta, N + 1)
        rel = err / max(float(np.min(np.abs(s))), 1e-300) if err else 0.0
        out, num_err = [], 0.0
        for n in range(N + 1):
            row = self.table.row(n)
            if not row:
                out.append(0j)
                continue
            total, absolute = _class_sum(row, self.q, s)
            out.append((-1) ** n * total)
            num_err = max(num_err, (n + 1) * rel * absolute)
        return out, num_err

    def partial(self, lam: float, zeta: complex, N: int, sharp_norm: bool = False) -> PartialSum:
        zeta = complex(zeta)
        Ms, num_err = self.coefficients(zeta, N)
        terms = tuple(lam ** (-n - 1) * M for n, M in enumerate(Ms))
        value = sum(terms, 0j)
        bounds = []
        rigorous = False
        if bool(self.window.contains(zeta)):
            budget = remainder_budget(self.window, self.q, self.law, N, sharp_norm)
            ok = budget.rigorous and lam >= budget.lambda0
            bounds.append((budget.bound(lam), ok))
        hop = 2.0 * math.sqrt(self.q) if sharp_norm else float(self.q + 1)
        if zeta.imag * lam > hop:
            # plain Neumann tail: |s_k| <= (Im zeta)**-k and at most hop**n walks
            y = lam * zeta.imag
            r = hop / y
            bounds.append((r ** (N + 1) / (y * (1.0 - r)), not sharp_norm))
        good = [b for b, ok in bounds if ok]
        if good:
            bound, rigorous = min(good), True
        elif bounds:
            bound = min(b for b, _ in bounds)
        else:
            bound = math.inf
        return PartialSum(value, bound, rigorous, terms, lam ** -1 * num_err)

    def tail(self, lam: float, zeta: complex, N: int, M: int) -> complex:
        """``sum_{n=N+1}^{M} lam**(-n-1) M_n(zeta)`` without cancellation."""
        Ms, _ = self.coefficients(complex(zeta), M)
        return sum((lam ** (-n - 1) * Ms[n] for n in range(N + 1, M + 1)), 0j)


def m_partial(params: ExpansionParams, zeta: complex, expansion: Optional[Expansion] = None) -> PartialSum:
    """Partial sum ``sum_{n<=N} lam**(-n-1) M_n(zeta)`` with its truncation bound.

    Points of ``Omega_delta(I)`` use the continued transforms and the uniform
    bound ``C_{N,delta} lam**(-N-2)`` (rigorous iff ``lam >= lambda0``).  Points
    with ``Im zeta > (q+1)/lam`` outside the stadium use the upper transforms and
    the geometric Neumann tail bound.
    """
    exp = expansion or Expansion(params.law, params.window, params.q, params.order)
    res = exp.partial(params.lam, zeta, params.order, params.sharp_norm)
    if not res.rigorous:
        _warn_exploratory(remainder_budget(params.window, params.q, params.law, params.order,
                                           params.sharp_norm), params.lam)
    return res


def _warn_exploratory(budget: RemainderBudget, lam: float) -> None:
    if not budget.rigorous:
        log.warning("remainder bound not certified (sampled density bound or sharp-norm budget)")
    elif lam < budget.lambda0:
        log.warning("lambda=%g below lambda0=%g: exploratory evaluation", lam, budget.lambda0)


def _check_xi(window: AnalyticWindow, xi: float) -> None:
    if not window.contains_real(xi):
        raise DomainError(f"xi={xi} must lie in the open interval I={window.I}")


def dos_coefficient(n: int, law: Law, window: AnalyticWindow, q: int, xi: float,
                    expansion: Optional[Expansion] = None) -> float:
    """``a_n(xi) = Im M_n(xi) / pi`` from the continued boundary value at ``xi + 0i``."""
    _check_xi(window, xi)
    exp = expansion or Expansion(law, window, q, n)
    Ms, _ = exp.coefficients(complex(xi, 0.0), n)
    return float(Ms[n].imag) / math.pi


@dataclass(frozen=True)
class DosValue:
    xi: float
    lam: float
    terms: Tuple[float, ...]
    value: float
    remainder_bound: float
    rigorous: bool
    coefficients: Tuple[float, ...] = field(default=())
    numerical_error: float = 0.0

    @property
    def energy(self) -> float:
        return self.lam * self.xi


def dos_density(params: ExpansionParams, xi: float, expansion: Optional[Expansion] = None) -> DosValue:
    """Density of states ``n_lambda(lambda xi)`` to order ``N`` with its error budget."""
    _check_xi(params.window, xi)
    exp = expansion or Expansion(params.law, params.window, params.q, params.order)
    N = params.order
    Ms, num_err = exp.coefficients(complex(xi, 0.0), N)
    a = tuple(float(M.imag) / math.pi if n % 2 == 0 else 0.0 for n, M in enumerate(Ms))
    terms = tuple(params.lam ** (-n - 1) * an for n, an in enumerate(a))
    budget = remainder_budget(params.window, params.q, params.law, N, params.sharp_norm)
    rigorous = budget.rigorous and params.lam >= budget.lambda0
    _warn_exploratory(budget, params.lam)
    return DosValue(
        xi=float(xi), lam=params.lam, terms=terms, value=math.fsum(terms),
        remainder_bound=budget.bound(params.lam) / math.pi, rigorous=rigorous,
        coefficients=a, numerical_error=num_err * params.lam ** -1 / math.pi,
    )


def uniform_two_term(a: float, q: int, lam: float, xi: float, eps: float = 1e-9) -> float:
    """``1/(2 a lam) - (q+1) / (2 a (a^2 - xi^2) lam^3)`` for the uniform law on ``[-a, a]``."""
    if abs(xi) >= a - eps:
        raise DomainError(f"xi={xi} within {eps} of the support edge +-{a}; the correction is singular there")
    return 1.0 / (2.0 * a * lam) - (q + 1) / (2.0 * a * (a * a - xi * xi) * lam**3)


def uniform_a2(a: float, q: int, xi: float) -> float:
    return -(q + 1) / (2.0 * a * (a * a - xi * xi))


__all__ = [
    "DosValue", "Expansion", "ExpansionParams", "M_n", "PartialSum", "RemainderBudget",
    "TransformCache", "dos_coefficient", "dos_density", "m_partial", "remainder_budget",
    "uniform_a2", "uniform_two_term", "UniformLaw",
]
