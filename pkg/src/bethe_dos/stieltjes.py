"""Single-site Stieltjes transforms and their continuation across an analytic window.

``s_k(zeta) = int dmu(t) / (t - zeta)**k``.  On the upper half-plane this is the
plain integral.  Below the real axis, inside the stadium ``Omega_delta(I)``, the
part of the integral over ``I_sharp`` is replaced by the same integrand taken
along the lower boundary arc ``eta`` of ``Omega_delta0(I)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import chebyshev, legendre
from scipy import integrate

ArrayLike = Union[complex, float, np.ndarray]

REFINE_TOL = 1e-12
MAX_CONTOUR_NODES = 2**14
ETA_SAMPLES = 256
ETA_SAFETY = 2.0


class DomainError(ValueError):
    """Evaluation point outside the region where the requested object is defined."""


class QuadratureError(RuntimeError):
    def __init__(self, message: str, error_estimate: float):
        super().__init__(f"{message} (achieved error estimate {error_estimate:.3e})")
        self.error_estimate = error_estimate


@dataclass(frozen=True)
class AnalyticWindow:
    """Interval ``I = (b1, b2)`` with continuation radii ``0 < delta < delta0``."""

    I: Tuple[float, float]
    delta0: float
    delta: float

    def __post_init__(self) -> None:
        b1, b2 = self.I
        object.__setattr__(self, "I", (float(b1), float(b2)))
        if not b1 < b2:
            raise ValueError(f"empty interval {self.I}")
        if not 0.0 < self.delta < self.delta0:
            raise ValueError(f"need 0 < delta < delta0, got delta={self.delta}, delta0={self.delta0}")

    @property
    def I_sharp(self) -> Tuple[float, float]:
        return (self.I[0] - self.delta0, self.I[1] + self.delta0)

    def dist(self, zeta: ArrayLike) -> np.ndarray:
        """Distance from ``zeta`` to the closed interval ``[b1, b2]``."""
        zeta = np.asarray(zeta, dtype=complex)
        x = np.clip(zeta.real, self.I[0], self.I[1])
        return np.abs(zeta - x)

    def contains(self, zeta: ArrayLike) -> np.ndarray:
        """Membership in ``Omega_delta(I)``; real points of the open interval ``I`` count as inside."""
        return self.dist(zeta) < self.delta

    def contains_real(self, xi: float) -> bool:
        return self.I[0] < xi < self.I[1]

    def grid(self, nx: int = 20, ny: int = 20, shrink: float = 1e-9) -> np.ndarray:
        """``nx x ny`` rectangular grid over the bounding box, restricted to the stadium."""
        b1, b2 = self.I
        d = self.delta * (1.0 - shrink)
        xs = np.linspace(b1 - d, b2 + d, nx)
        ys = np.linspace(-d, d, ny)
        pts = (xs[None, :] + 1j * ys[:, None]).ravel()
        return pts[self.contains(pts)]

    def to_json(self) -> dict:
        return {"I": list(self.I), "delta0": self.delta0, "delta": self.delta}

    @classmethod
    def from_json(cls, obj: dict) -> "AnalyticWindow":
        return cls(tuple(obj["I"]), float(obj["delta0"]), float(obj["delta"]))


# --- laws --------------------------------------------------------------------

@dataclass(frozen=True)
class UniformLaw:
    """Uniform law on ``[-a, a]``."""

    a: float = 1.0

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise ValueError("half-width must be positive")

    @property
    def support(self) -> Tuple[float, float]:
        return (-self.a, self.a)

    def density(self, t: ArrayLike) -> np.ndarray:
        t = np.asarray(t)
        return np.full(t.shape, 1.0 / (2.0 * self.a), dtype=complex)

    def density_bound_on_eta(self, window: AnalyticWindow) -> Tuple[float, bool]:
        return 1.0 / (2.0 * self.a), True

    def check_window(self, window: AnalyticWindow) -> None:
        lo, hi = window.I_sharp
        if not (-self.a < lo and hi < self.a):
            raise DomainError(
                f"I_sharp={window.I_sharp} must lie inside the open support (-{self.a}, {self.a})"
            )

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.uniform(-self.a, self.a, size)

    def to_json(self) -> dict:
        return {"law": "uniform", "a": self.a}


@dataclass(frozen=True, eq=False)
class GenericAnalyticLaw:
    """Law with a density analytic on ``Omega_delta0(I)`` plus an arbitrary part outside ``I_sharp``.

    ``outside_nodes``/``outside_weights`` is a quadrature rule (or exact point
    masses) for the restriction of the law to ``R \\ I_sharp``.
    """

    I: Tuple[float, float]
    delta0: float
    density: Callable[[np.ndarray], np.ndarray]
    outside_nodes: np.ndarray
    outside_weights: np.ndarray
    support: Tuple[float, float]
    density_bound: Optional[float] = None
    sampler: Optional[Callable] = None
    name: str = "generic"
    spec: Optional[dict] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "I", (float(self.I[0]), float(self.I[1])))
        object.__setattr__(self, "outside_nodes", np.asarray(self.outside_nodes, dtype=float).ravel())
        object.__setattr__(self, "outside_weights", np.asarray(self.outside_weights, dtype=float).ravel())
        if self.outside_nodes.shape != self.outside_weights.shape:
            raise ValueError("outside nodes and weights differ in length")
        lo, hi = self.I_sharp
        if np.any((self.outside_nodes > lo) & (self.outside_nodes < hi)):
            raise ValueError("outside quadrature nodes must lie in R \\ I_sharp")
        xs = np.linspace(lo, hi, 257)
        vals = np.asarray(self.density(xs + 0j))
        if np.any(np.abs(vals.imag) > 1e-12) or np.any(vals.real < -1e-14):
            raise ValueError("density must be real and nonnegative on I_sharp")
        mass = self.inner_mass() + float(self.outside_weights.sum())
        if abs(mass - 1.0) > 1e-10:
            raise ValueError(f"total mass is {mass!r}, expected 1")

    @property
    def I_sharp(self) -> Tuple[float, float]:
        return (self.I[0] - self.delta0, self.I[1] + self.delta0)

    @property
    def total_mass_outside(self) -> float:
        return float(self.outside_weights.sum())

    def inner_mass(self) -> float:
        lo, hi = self.I_sharp
        val, _ = integrate.quad(lambda t: float(np.real(self.density(np.asarray(t + 0j)))), lo, hi,
                                epsabs=1e-14, epsrel=1e-13, limit=200)
        return val

    def check_window(self, window: AnalyticWindow) -> None:
        if window.I != self.I or window.delta0 != self.delta0:
            raise DomainError(
                f"window (I={window.I}, delta0={window.delta0}) does not match the law's "
                f"analytic window (I={self.I}, delta0={self.delta0})"
            )

    def density_bound_on_eta(self, window: AnalyticWindow) -> Tuple[float, bool]:
        """``sup |rho|`` on the contour and whether the value is a certified bound."""
        if self.density_bound is not None:
            return float(self.density_bound), True
        eta = build_eta(window, ETA_SAMPLES // 3 + 1)
        vals = np.abs(self.density(eta.points))
        return ETA_SAFETY * float(vals.max()), False

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.sampler is None:
            raise ValueError(f"law {self.name!r} has no sampler")
        return self.sampler(rng, size)

    def to_json(self) -> dict:
        if self.spec is None:
            raise ValueError("law was built programmatically and has no JSON form")
        return dict(self.spec)


Law = Union[UniformLaw, GenericAnalyticLaw]


def _gl_panels(lo: float, hi: float, panels: int, nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = legendre.leggauss(nodes)
    edges = np.linspace(lo, hi, panels + 1)
    ts, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        ts.append(0.5 * (b - a) * x + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * w)
    return np.concatenate(ts), np.concatenate(ws)


def uniform_as_generic(a: float, window: AnalyticWindow, panels: int = 4, nodes: int = 48) -> GenericAnalyticLaw:
    """The uniform law on ``[-a, a]`` in generic form: constant density on ``I_sharp``,
    the two leftover segments of ``[-a, a]`` handled by Gauss-Legendre."""
    UniformLaw(a).check_window(window)
    lo, hi = window.I_sharp
    t1, w1 = _gl_panels(-a, lo, panels, nodes)
    t2, w2 = _gl_panels(hi, a, panels, nodes)
    rho = 1.0 / (2.0 * a)
    return GenericAnalyticLaw(
        I=window.I,
        delta0=window.delta0,
        density=lambda w: np.full(np.shape(w), rho, dtype=complex),
        outside_nodes=np.concatenate([t1, t2]),
        outside_weights=rho * np.concatenate([w1, w2]),
        support=(-a, a),
        density_bound=rho,
        sampler=lambda rng, size: rng.uniform(-a, a, size),
        name="uniform-generic",
    )


def semicircle_law(window: AnalyticWindow, radius: float = 1.0, nodes: int = 64) -> GenericAnalyticLaw:
    """Semicircle law ``2/(pi R^2) sqrt(R^2 - t^2)`` on ``[-R, R]``."""
    R = radius
    lo, hi = window.I_sharp
    if not (-R < lo and hi < R):
        raise DomainError("I_sharp must lie inside (-R, R)")

    def density(w):
        w = np.asarray(w, dtype=complex)
        # principal sqrt of (R - w)(R + w) factors is analytic off (-inf, -R] u [R, inf)
        return 2.0 / (math.pi * R**2) * np.sqrt(R - w) * np.sqrt(R + w)

    # t = R cos(theta) removes the square-root endpoint behaviour
    def piece(t_lo, t_hi):
        th_lo, th_hi = math.acos(t_hi / R), math.acos(t_lo / R)
        th, wt = _gl_panels(th_lo, th_hi, 2, nodes)
        t = R * np.cos(th)
        return t, wt * 2.0 / math.pi * np.sin(th) ** 2

    t1, w1 = piece(-R, lo)
    t2, w2 = piece(hi, R)

    def sampler(rng, size):
        # Beta(3/2, 3/2) on [0, 1] rescaled is the semicircle
        return R * (2.0 * rng.beta(1.5, 1.5, size) - 1.0)

    return GenericAnalyticLaw(
        I=window.I, delta0=window.delta0, density=density,
        outside_nodes=np.concatenate([t1, t2]), outside_weights=np.concatenate([w1, w2]),
        support=(-R, R), sampler=sampler, name="semicircle",
        spec={"law": "generic", "density": "semicircle", "radius": R},
    )


def chebyshev_law(window: AnalyticWindow, coefficients: Sequence[float],
                  outside_masses: Sequence[Sequence[float]] = ()) -> GenericAnalyticLaw:
    """Density given by Chebyshev coefficients in the variable mapped from ``I_sharp`` to ``[-1, 1]``.

    The law outside ``I_sharp`` consists of the listed point masses ``[t, w]``.
    """
    lo, hi = window.I_sharp
    c = np.asarray(coefficients, dtype=float)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)

    def density(w):
        return chebyshev.chebval((np.asarray(w, dtype=complex) - mid) / half, c)

    masses = np.asarray(outside_masses, dtype=float).reshape(-1, 2)
    return GenericAnalyticLaw(
        I=window.I, delta0=window.delta0, density=density,
        outside_nodes=masses[:, 0], outside_weights=masses[:, 1],
        support=(min([lo] + list(masses[:, 0])), max([hi] + list(masses[:, 0]))),
        name="chebyshev",
        spec={"law": "generic", "density": {"chebyshev": c.tolist()},
              "outside_masses": masses.tolist()},
    )


def law_from_json(obj: dict, window: Optional[AnalyticWindow] = None) -> Law:
    kind = obj.get("law", "uniform")
    if kind == "uniform":
        return UniformLaw(float(obj.get("a", 1.0)))
    if kind != "generic":
        raise ValueError(f"unknown law {kind!r}")
    if window is None:
        raise ValueError("a generic law needs its analytic window")
    dens = obj.get("density")
    if dens == "semicircle":
        return semicircle_law(window, float(obj.get("radius", 1.0)))
    if dens == "uniform":
        return uniform_as_generic(float(obj.get("a", 1.0)), window)
    if isinstance(dens, dict) and "chebyshev" in dens:
        return chebyshev_law(window, dens["chebyshev"], obj.get("outside_masses", []))
    raise ValueError(f"unknown density specification {dens!r}")


# --- closed forms for the uniform law ---------------------------------------

def _arg(z: np.ndarray, lower_cut: bool) -> np.ndarray:
    """Argument in ``(-pi, pi]``, or in ``[0, 2 pi)`` when ``lower_cut``; ``-0.0`` treated as ``+0``."""
    y = z.imag + 0.0
    th = np.arctan2(y, z.real)
    if lower_cut:
        th = np.where(th < 0, th + 2 * np.pi, th)
    return th


def s_uniform_closed(k: int, zeta: ArrayLike, a: float = 1.0) -> np.ndarray:
    """Closed-form ``s_k`` for the uniform law on ``[-a, a]``.

    For ``k = 1`` the branch is the one obtained by continuing down a vertical
    line from the upper half-plane: real points in ``(-a, a)`` get the upper
    boundary value, and the lower half-plane below ``(-a, a)`` gets the
    continuation across the support.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    z = np.asarray(zeta, dtype=complex)
    if np.any((z.imag == 0) & (np.abs(np.abs(z.real) - a) == 0)):
        raise DomainError(f"s_{k} has a singularity at +-{a}")
    if k >= 2:
        m = k - 1
        return (1.0 / (2.0 * a * m)) * ((-a - z) ** (-m) - (a - z) ** (-m))
    zm, zp = z - a, z + a
    mod = np.log(np.abs(zm)) - np.log(np.abs(zp))
    upper = z.imag >= 0
    across = (~upper) & (np.abs(z.real) < a)
    # across (-a, a) from above: arg(z - a) continues through pi, arg(z + a) through 0
    th = np.where(upper | across, _arg(zm, True) - _arg(zp, False), _arg(zm, False) - _arg(zp, False))
    return (mod + 1j * th) / (2.0 * a)


# --- contour ------------------------------------------------------------------

@dataclass(frozen=True)
class ContourEta:
    """Gauss-Legendre discretisation of the lower stadium arc.

    ``weights`` already include ``dw/ds`` so ``sum(f(points) * weights)``
    approximates ``int_eta f(w) dw``.
    """

    window: AnalyticWindow
    nodes_per_piece: int
    points: np.ndarray
    weights: np.ndarray
    piece_slices: Tuple[slice, slice, slice]

    @property
    def start(self) -> complex:
        b1, _ = self.window.I
        return complex(b1 - self.window.delta0)

    @property
    def end(self) -> complex:
        _, b2 = self.window.I
        return complex(b2 + self.window.delta0)

    @property
    def length(self) -> float:
        return float(np.abs(self.weights).sum())


def build_eta(window: AnalyticWindow, nodes: int) -> ContourEta:
    if nodes < 4:
        raise ValueError("need at least 4 nodes per piece")
    if not window.delta0 > 0:
        raise ValueError("delta0 must be positive")
    b1, b2 = window.I
    r = window.delta0
    x, w = legendre.leggauss(nodes)

    def arc(center, th0, th1):
        th = 0.5 * (th1 - th0) * x + 0.5 * (th0 + th1)
        e = np.exp(1j * th)
        return center + r * e, 0.5 * (th1 - th0) * w * (1j * r * e)

    p1, w1 = arc(b1, np.pi, 1.5 * np.pi)
    p2 = 0.5 * (b2 - b1) * x + 0.5 * (b1 + b2) - 1j * r
    w2 = 0.5 * (b2 - b1) * w + 0j
    p3, w3 = arc(b2, 1.5 * np.pi, 2.0 * np.pi)
    n = nodes
    return ContourEta(
        window, nodes,
        np.concatenate([p1, p2, p3]), np.concatenate([w1, w2, w3]),
        (slice(0, n), slice(n, 2 * n), slice(2 * n, 3 * n)),
    )


def eta_length(window: AnalyticWindow) -> float:
    """Exact arc length: two quarter circles plus the bottom segment."""
    return math.pi * window.delta0 + (window.I[1] - window.I[0])


# --- transforms ---------------------------------------------------------------

def _powers(inv: np.ndarray, kmax: int) -> np.ndarray:
    """Stack ``inv**1 .. inv**kmax`` along a new leading axis."""
    out = np.empty((kmax,) + inv.shape, dtype=complex)
    out[0] = inv
    for j in range(1, kmax):
        out[j] = out[j - 1] * inv
    return out


def _outside_sum(law: GenericAnalyticLaw, z: np.ndarray, kmax: int) -> np.ndarray:
    if law.outside_nodes.size == 0:
        return np.zeros((kmax,) + z.shape, dtype=complex)
    inv = 1.0 / (law.outside_nodes[:, None] - z.ravel()[None, :])
    vals = np.einsum("kmp,m->kp", _powers(inv, kmax), law.outside_weights)
    return vals.reshape((kmax,) + z.shape)


def _eta_integral(law: GenericAnalyticLaw, window: AnalyticWindow, z: np.ndarray, kmax: int,
                  nodes: int = 16) -> Tuple[np.ndarray, float]:
    """``int_eta rho(w) dw / (w - z)**k`` for ``k = 1..kmax`` with doubling refinement."""
    flat = z.ravel()
    prev = None
    n = max(4, nodes)
    while True:
        eta = build_eta(window, n)
        rw = law.density(eta.points) * eta.weights
        inv = 1.0 / (eta.points[:, None] - flat[None, :])
        terms = _powers(inv, kmax) * rw[None, :, None]
        cur = terms.sum(axis=1)
        scale = np.maximum(1.0, np.abs(terms).sum(axis=1))
        if prev is not None:
            err = float(np.max(np.abs(cur - prev) / scale))
            if err < REFINE_TOL:
                return cur.reshape((kmax,) + z.shape), float(np.max(np.abs(cur - prev)))
            if 3 * 2 * n > MAX_CONTOUR_NODES:
                raise QuadratureError("contour quadrature did not converge", float(np.max(np.abs(cur - prev))))
        prev = cur
        n *= 2


def s_continued_all(law: Law, kmax: int, zeta: ArrayLike, window: AnalyticWindow,
                    nodes: int = 16, with_error: bool = False):
    """``s_1 .. s_kmax`` on ``Omega_delta(I)``; leading axis indexes ``k - 1``."""
    if kmax < 1:
        raise ValueError("k must be >= 1")
    z = np.asarray(zeta, dtype=complex)
    law.check_window(window)
    if not np.all(window.contains(z)):
        raise DomainError(f"point(s) outside Omega_delta(I) for window {window}")
    if isinstance(law, UniformLaw):
        vals = np.stack([s_uniform_closed(k, z, law.a) for k in range(1, kmax + 1)])
        err = 0.0
    else:
        inner, err = _eta_integral(law, window, z, kmax, nodes)
        vals = inner + _outside_sum(law, z, kmax)
    return (vals, err) if with_error else vals


def s_continued(law: Law, k: int, zeta: ArrayLike, window: AnalyticWindow, nodes: int = 16):
    """Holomorphic continuation of ``s_k`` to ``Omega_delta(I)``."""
    vals = s_continued_all(law, k, zeta, window, nodes)[k - 1]
    return vals[()] if vals.ndim == 0 else vals


def _real_line_integral(law: GenericAnalyticLaw, k: int, z: complex) -> complex:
    lo, hi = law.I_sharp
    pts = [z.real] if lo < z.real < hi else None

    def f(t, part):
        v = law.density(np.asarray(t + 0j)).real / (t - z) ** k
        return float(v.real if part == 0 else v.imag)

    out = []
    for part in (0, 1):
        val, err = integrate.quad(f, lo, hi, args=(part,), points=pts, limit=400,
                                  epsabs=1e-14, epsrel=1e-12, full_output=1)[:2]
        tol = max(1e-9, 1e-9 * abs(val))
        if not err <= tol:
            raise QuadratureError(f"real-line quadrature for s_{k}({z}) did not converge", err)
        out.append(val)
    return complex(out[0], out[1])


def s_upper(law: Law, k: int, zeta: ArrayLike):
    """``s_k`` on the upper half-plane from its defining integral."""
    if k < 1:
        raise ValueError("k must be >= 1")
    z = np.asarray(zeta, dtype=complex)
    if np.any(z.imag <= 0):
        raise DomainError("s_upper needs Im zeta > 0")
    if isinstance(law, UniformLaw):
        vals = s_uniform_closed(k, z, law.a)
    else:
        flat = z.ravel()
        inner = np.array([_real_line_integral(law, k, complex(p)) for p in flat], dtype=complex)
        vals = inner.reshape(z.shape) + _outside_sum(law, z, k)[k - 1]
    return vals[()] if vals.ndim == 0 else vals


def s_upper_all(law: Law, kmax: int, zeta: ArrayLike) -> np.ndarray:
    z = np.asarray(zeta, dtype=complex)
    if isinstance(law, UniformLaw):
        if np.any(z.imag <= 0):
            raise DomainError("s_upper needs Im zeta > 0")
        return np.stack([s_uniform_closed(k, z, law.a) for k in range(1, kmax + 1)])
    return np.stack([np.asarray(s_upper(law, k, z)) for k in range(1, kmax + 1)])


# --- bounds -----------------------------------------------------------------

def single_site_constant(law: Law, window: AnalyticWindow) -> Tuple[float, bool]:
    """``C_delta = 1 + length(eta) * sup_eta |rho|`` and whether it is certified."""
    sup, rigorous = law.density_bound_on_eta(window)
    return 1.0 + eta_length(window) * sup, rigorous


def sk_bound(law: Law, window: AnalyticWindow, k: int) -> float:
    """Uniform bound ``C_delta (delta0 - delta)**(-k)`` for ``|s_k|`` on ``Omega_delta(I)``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    c, _ = single_site_constant(law, window)
    return c * (window.delta0 - window.delta) ** (-k)
