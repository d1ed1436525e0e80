"""Quick invariant suite behind ``bethe-dos verify``.

Each check returns ``(passed, detail)``.  The checks are sized to run in a few
seconds; the pytest suite covers the same ground at full resolution.
"""

from __future__ import annotations

import math
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import oracle, treewalk
from .expansion import Expansion, remainder_budget
from .stieltjes import (
    AnalyticWindow,
    UniformLaw,
    s_continued_all,
    s_uniform_closed,
    s_upper,
    sk_bound,
    uniform_as_generic,
)
from .treewalk import CoefficientTable

Check = Tuple[bool, str]

WINDOW = AnalyticWindow((-0.5, 0.5), 0.3, 0.15)


def check_profile_sums(table: CoefficientTable) -> Check:
    for n, row in table.rows.items():
        for prof, _ in row:
            if prof.total_visits != n + 1:
                return False, f"n={n}: profile {prof} sums to {prof.total_visits}"
    return True, f"orders 0..{table.max_order}"


def check_walk_counts(table: CoefficientTable) -> Check:
    for n, row in table.rows.items():
        for q in (1, 2, 3, 4):
            got = sum(p(q) for _, p in row)
            want = treewalk.transfer_count(n, q)
            if got != want:
                return False, f"n={n}, q={q}: table {got} != transfer count {want}"
            if got > (q + 1) ** n:
                return False, f"n={n}, q={q}: exceeds (q+1)^n"
    return True, "q in 1..4"


def check_brute_force(table: CoefficientTable, nmax: int = 8) -> Check:
    for n in range(0, min(nmax, table.max_order) + 1):
        for q in (1, 2, 3):
            hist = treewalk.group_walks(treewalk.brute_force_walks(n, q))
            want = {p: c(q) for p, c in table.rows[n] if c(q)}
            if hist != want:
                return False, f"n={n}, q={q}: brute force classes differ"
    return True, f"n <= {nmax}, q in 1..3"


def check_central_binomial(table: CoefficientTable) -> Check:
    for n in range(0, min(12, table.max_order) + 1, 2):
        got = sum(p(1) for _, p in table.rows[n])
        if got != math.comb(n, n // 2):
            return False, f"n={n}: {got} != C({n},{n // 2})"
    return True, "q=1, n <= 12"


def check_odd_vanishing(nmax: int = 15) -> Check:
    for n in range(1, nmax + 1, 2):
        if treewalk.enumerate_walk_classes_unpruned(n):
            return False, f"n={n}: nonempty"
    return True, f"odd n <= {nmax}"


def check_low_orders(table: CoefficientTable) -> Check:
    P = treewalk.OccupationProfile.from_mapping
    C = treewalk.CountPolynomial
    want2 = [(P({2: 1, 1: 1}), C((1, 1)))]
    want4 = sorted([(P({3: 1, 2: 1}), C((1, 1))), (P({3: 1, 1: 2}), C((0, 1, 1))),
                    (P({2: 2, 1: 1}), C((0, 1, 1)))])
    ok = table.rows[2] == want2 and table.rows[4] == want4
    return ok, "n=2, n=4 tables"


def check_geometry() -> Check:
    for q in (2, 3, 5):
        r = treewalk.sphere_size(q, 30) / treewalk.ball_size(q, 30)
        if abs(r - (q - 1) / q) > 1e-6:
            return False, f"q={q}: ratio {r}"
    return True, "R=30"


def check_herglotz(seed: int = 0) -> Check:
    rng = np.random.default_rng(seed)
    z = rng.uniform(-3, 3, 100) + 1j * rng.uniform(1e-3, 3, 100)
    ok = bool(np.all(np.asarray(s_upper(UniformLaw(1.0), 1, z)).imag > 0))
    return ok, "100 random points"


def check_continuation(kmax: int = 6) -> Check:
    law = uniform_as_generic(1.0, WINDOW)
    pts = WINDOW.grid(20, 20)
    got = s_continued_all(law, kmax, pts, WINDOW)
    want = np.stack([s_uniform_closed(k, pts, 1.0) for k in range(1, kmax + 1)])
    err = float(np.max(np.abs(got - want)))
    return err <= 1e-8, f"max error {err:.2e}"


def check_sk_bound(kmax: int = 10) -> Check:
    law = UniformLaw(1.0)
    pts = WINDOW.grid(20, 20)
    vals = s_continued_all(law, kmax, pts, WINDOW)
    for k in range(1, kmax + 1):
        if np.max(np.abs(vals[k - 1])) > sk_bound(law, WINDOW, k):
            return False, f"k={k}"
    return True, f"k <= {kmax}"


def check_low_coefficient_identity(table: CoefficientTable) -> Check:
    law = UniformLaw(1.0)
    rng = np.random.default_rng(1)
    for _ in range(20):
        q = int(rng.integers(1, 6))
        zeta = complex(rng.uniform(-0.6, 0.6), rng.uniform(-0.1, 0.1))
        exp = Expansion(law, WINDOW, q, 4, table=table)
        M, _ = exp.coefficients(zeta, 4)
        s1, s2, s3 = (complex(s_uniform_closed(k, zeta, 1.0)) for k in (1, 2, 3))
        m4 = (q + 1) * s3 * s2 + (q + 1) * q * s3 * s1**2 + (q + 1) * q * s2**2 * s1
        if abs(M[2] - (q + 1) * s2 * s1) > 1e-12 or abs(M[4] - m4) > 1e-10 * max(1, abs(m4)):
            return False, f"q={q}, zeta={zeta}"
    return True, "M_2, M_4 at 20 points"


def check_remainder_scaling(table: CoefficientTable) -> Check:
    law = UniformLaw(1.0)
    q = 2
    exp = Expansion(law, WINDOW, q, 9, table=table)
    for N in (1, 3):
        budget = remainder_budget(WINDOW, q, law, N)
        lams = [budget.lambda0 * m for m in (4, 8, 16, 32)]
        for zeta in (0.0, 0.3 - 0.1j):
            tails = [abs(exp.tail(l, zeta, N, 9)) for l in lams]
            slope = np.polyfit(np.log(lams), np.log(tails), 1)[0]
            if abs(slope + N + 2) > 0.3:
                return False, f"N={N}, zeta={zeta}: slope {slope:.3f}"
            if any(t > budget.bound(l) for t, l in zip(tails, lams)):
                return False, f"N={N}: bound violated"
    return True, "N in {1, 3}"


def check_recursion_vs_dense() -> Check:
    rng = np.random.default_rng(2)
    worst = 0.0
    for q in (1, 2):
        for R in (0, 1, 2, 3):
            om = [rng.uniform(-1, 1, n) for n in oracle.level_sizes(q, R)]
            z = complex(rng.uniform(-2, 2), rng.uniform(0.1, 1))
            a = complex(oracle.root_green_frozen(q, 2.5, z, om))
            b = oracle.dense_green_oracle(R, q, 2.5, z, om)
            worst = max(worst, abs(a - b) / abs(b))
    return worst <= 1e-12, f"max relative {worst:.1e}"


def check_cavity_herglotz() -> Check:
    rng = np.random.default_rng(3)
    z = 1.0 + 0.05j
    trace: list = []
    g = oracle.root_green_sample(2, 5.0, z, 6, rng, size=2000, trace=trace)
    ok = all(np.all(t.imag > 0) for t in trace) and bool(np.all(np.abs(g) <= 1 / z.imag))
    return ok, "every level, 2000 balls"


def check_seed_determinism() -> Check:
    cfg = oracle.MCConfig(2, 20.0, 20 * (0.1 + 0.4j), depth=8, samples=5000, seed=7)
    a = oracle.dumps_estimate(oracle.mc_average(cfg))
    b = oracle.dumps_estimate(oracle.mc_average(cfg))
    return a == b, "byte-identical JSON"


def run_checks(table: Optional[CoefficientTable] = None) -> Dict[str, Check]:
    table = table or CoefficientTable.build(12)
    checks: List[Tuple[str, Callable[[], Check]]] = [
        ("profile sums = n+1", lambda: check_profile_sums(table)),
        ("counts = transfer count, <= (q+1)^n", lambda: check_walk_counts(table)),
        ("classes = brute force", lambda: check_brute_force(table)),
        ("q=1 central binomial (Catalan)", lambda: check_central_binomial(table)),
        ("odd orders vanish", check_odd_vanishing),
        ("n<=4 tables", lambda: check_low_orders(table)),
        ("sphere/ball ratio", check_geometry),
        ("Herglotz s_1", check_herglotz),
        ("contour vs closed form", check_continuation),
        ("|s_k| <= sk_bound", check_sk_bound),
        ("M_2, M_4 identities", lambda: check_low_coefficient_identity(table)),
        ("remainder scaling", lambda: check_remainder_scaling(table)),
        ("recursion = dense solve", check_recursion_vs_dense),
        ("cavity Herglotz / |G| <= 1/Im z", check_cavity_herglotz),
        ("seed determinism", check_seed_determinism),
    ]
    out: Dict[str, Check] = {}
    for name, fn in checks:
        try:
            out[name] = fn()
        except Exception as exc:  # a crash is a failed check, not a crashed report
            out[name] = (False, f"{type(exc).__name__}: {exc}")
    return out
