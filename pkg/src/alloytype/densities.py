"""Coupling-constant densities: norms, inverse-CDF sampling, singular integrals.

Built-in kinds
--------------
uniform
    Constant on ``[a, b]``; bounded variation with two jumps.
triangular
    Continuous tent on ``[a, b]`` peaking at ``peak`` (default midpoint).
smooth-bump
    Raised cosine ``(1 - cos(2 pi t)) / w`` with ``t = (x - a) / w``; C^1, so
    it has an integrable derivative.
piecewise-linear
    Linear interpolation of ``values`` at ``knots``; normalized on construction.

All kinds have compact support.  Norms are computed exactly from the
piecewise description, never by quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import ParameterError, UnsupportedNormError

KINDS = ("uniform", "triangular", "smooth-bump", "piecewise-linear")


@dataclass(frozen=True)
class RngStream:
    """Independent random stream keyed by ``(master_seed, stream_id)``.

    ``domain`` separates streams belonging to different parts of one run
    (e.g. different box sizes) that reuse sample indices.
    """

    master_seed: int
    stream_id: int
    domain: tuple[int, ...] = ()

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(*self.domain, self.stream_id))
        return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class Density:
    """Normalized compactly supported probability density.

    Piecewise-linear kinds store ``knots`` and, per segment, the value at the
    segment's left end (``start``) and right end (``end``).  A jump at a knot
    is the difference between the adjacent segment values there.
    """

    kind: str
    params: dict
    knots: np.ndarray = field(repr=False, default=None)
    start: np.ndarray = field(repr=False, default=None)
    end: np.ndarray = field(repr=False, default=None)

    # ----------------------------------------------------------- support
    @property
    def support(self) -> tuple[float, float]:
        if self.kind == "smooth-bump":
            return self.params["a"], self.params["b"]
        return float(self.knots[0]), float(self.knots[-1])

    @property
    def breakpoints(self) -> np.ndarray:
        if self.kind == "smooth-bump":
            a, b = self.support
            return np.array([a, b])
        return self.knots

    # ----------------------------------------------------------- norms
    def _jumps(self) -> np.ndarray:
        left = np.concatenate([[0.0], self.end])
        right = np.concatenate([self.start, [0.0]])
        return np.abs(right - left)

    @property
    def sup_norm(self) -> float:
        if self.kind == "smooth-bump":
            return 2.0 / self._width
        return float(max(self.start.max(), self.end.max()))

    @property
    def total_variation(self) -> float:
        if self.kind == "smooth-bump":
            return 4.0 / self._width
        return float(self._jumps().sum() + np.abs(self.end - self.start).sum())

    @property
    def has_derivative(self) -> bool:
        if self.kind == "smooth-bump":
            return True
        return bool(np.all(self._jumps() <= 1e-14 * self.sup_norm))

    @property
    def deriv_l1(self) -> float:
        """L^1 norm of the derivative; only for absolutely continuous densities."""
        if not self.has_derivative:
            raise UnsupportedNormError(f"{self.kind} density has jumps; rho' is not in L^1")
        if self.kind == "smooth-bump":
            return 4.0 / self._width
        return float(np.abs(self.end - self.start).sum())

    @property
    def mass(self) -> float:
        """Exact integral of the density."""
        if self.kind == "smooth-bump":
            return 1.0
        return float(np.sum(0.5 * (self.start + self.end) * np.diff(self.knots)))

    def norms(self) -> dict:
        out = {"total_variation": self.total_variation, "sup_norm": self.sup_norm}
        if self.has_derivative:
            out["deriv_l1"] = self.deriv_l1
        return out

    @property
    def _width(self) -> float:
        a, b = self.support
        return b - a

    # ----------------------------------------------------------- evaluation
    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "smooth-bump":
            a = self.params["a"]
            t = (x - a) / self._width
            val = (1.0 - np.cos(2 * np.pi * t)) / self._width
            return np.where((t >= 0) & (t <= 1), val, 0.0)
        k = self.knots
        i = np.clip(np.searchsorted(k, x, side="right") - 1, 0, len(k) - 2)
        frac = (x - k[i]) / (k[i + 1] - k[i])
        val = self.start[i] + frac * (self.end[i] - self.start[i])
        return np.where((x >= k[0]) & (x <= k[-1]), val, 0.0)

    def _cdf_knots(self) -> np.ndarray:
        seg = 0.5 * (self.start + self.end) * np.diff(self.knots)
        return np.concatenate([[0.0], np.cumsum(seg)])

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "smooth-bump":
            t = np.clip((x - self.params["a"]) / self._width, 0.0, 1.0)
            return t - np.sin(2 * np.pi * t) / (2 * np.pi)
        k = self.knots
        F = self._cdf_knots()
        i = np.clip(np.searchsorted(k, x, side="right") - 1, 0, len(k) - 2)
        t = np.clip(x - k[i], 0.0, k[i + 1] - k[i])
        slope = (self.end[i] - self.start[i]) / (k[i + 1] - k[i])
        val = F[i] + self.start[i] * t + 0.5 * slope * t * t
        return np.where(x < k[0], 0.0, np.where(x >= k[-1], 1.0, val))

    def ppf(self, p):
        """Inverse CDF; closed form for piecewise-linear kinds, bisection otherwise."""
        p = np.asarray(p, dtype=float)
        if self.kind == "smooth-bump":
            lo = np.zeros_like(p)
            hi = np.ones_like(p)
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                below = mid - np.sin(2 * np.pi * mid) / (2 * np.pi) < p
                lo = np.where(below, mid, lo)
                hi = np.where(below, hi, mid)
            return self.params["a"] + self._width * 0.5 * (lo + hi)
        k = self.knots
        F = self._cdf_knots()
        i = np.clip(np.searchsorted(F[1:-1], p, side="right"), 0, len(k) - 2)
        dx = k[i + 1] - k[i]
        y0 = self.start[i]
        slope = (self.end[i] - y0) / dx
        q = np.maximum(p - F[i], 0.0)
        disc = np.maximum(y0 * y0 + 2.0 * slope * q, 0.0)
        denom = y0 + np.sqrt(disc)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(denom > 0, 2.0 * q / denom, 0.0)
        return k[i] + np.clip(t, 0.0, dx)

    def sample_many(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.ppf(rng.random(size))

    def spec(self) -> dict:
        return {"kind": self.kind, **self.params}


def _piecewise(kind, params, knots, start, end) -> Density:
    knots = np.asarray(knots, dtype=float)
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    if np.any(np.diff(knots) <= 0):
        raise ParameterError("knots must be strictly increasing")
    if np.any(start < 0) or np.any(end < 0):
        raise ParameterError("density values must be nonnegative")
    for arr in (knots, start, end):
        arr.setflags(write=False)
    return Density(kind, params, knots, start, end)


def make_density(kind: str, **params) -> Density:
    """Build a normalized density of the given kind.

    >>> make_density("uniform", a=0, b=1).norms()
    {'total_variation': 2.0, 'sup_norm': 1.0}
    """
    if kind == "uniform":
        a, b = float(params.pop("a", 0.0)), float(params.pop("b", 1.0))
        _no_extra(kind, params)
        if not (np.isfinite(a) and np.isfinite(b) and a < b):
            raise ParameterError(f"uniform density needs a < b, got [{a}, {b}]")
        h = 1.0 / (b - a)
        rho = _piecewise(kind, {"a": a, "b": b}, [a, b], [h], [h])
    elif kind == "triangular":
        a, b = float(params.pop("a", 0.0)), float(params.pop("b", 1.0))
        if not (np.isfinite(a) and np.isfinite(b) and a < b):
            raise ParameterError(f"triangular density needs a < b, got [{a}, {b}]")
        c = float(params.pop("peak", 0.5 * (a + b)))
        _no_extra(kind, params)
        if not a < c < b:
            raise ParameterError("triangular peak must lie strictly inside (a, b)")
        h = 2.0 / (b - a)
        rho = _piecewise(kind, {"a": a, "b": b, "peak": c}, [a, c, b], [0.0, h], [h, 0.0])
    elif kind == "smooth-bump":
        a, b = float(params.pop("a", 0.0)), float(params.pop("b", 1.0))
        _no_extra(kind, params)
        if not (np.isfinite(a) and np.isfinite(b) and a < b):
            raise ParameterError(f"smooth-bump density needs a < b, got [{a}, {b}]")
        rho = Density(kind, {"a": a, "b": b})
    elif kind == "piecewise-linear":
        knots = [float(k) for k in params.pop("knots")]
        values = [float(v) for v in params.pop("values")]
        _no_extra(kind, params)
        if len(knots) != len(values) or len(knots) < 2:
            raise ParameterError("piecewise-linear density needs matching knots/values, >= 2 each")
        if any(v < 0 for v in values):
            raise ParameterError("density values must be nonnegative")
        k = np.asarray(knots)
        if np.any(np.diff(k) <= 0):
            raise ParameterError("knots must be strictly increasing")
        v = np.asarray(values)
        total = float(np.sum(0.5 * (v[:-1] + v[1:]) * np.diff(k)))
        if not total > 0 or not np.isfinite(total):
            raise ParameterError("piecewise-linear density is not normalizable")
        v = v / total
        rho = _piecewise(kind, {"knots": knots, "values": values}, k, v[:-1], v[1:])
    else:
        raise ParameterError(f"unknown density kind {kind!r}; expected one of {KINDS}")
    if abs(rho.mass - 1.0) > 1e-12:
        raise ParameterError(f"density integrates to {rho.mass!r}, not 1")
    return rho


def _no_extra(kind, params):
    if params:
        raise ParameterError(f"unexpected parameters for {kind}: {sorted(params)}")


def density_norms(rho: Density) -> dict:
    return rho.norms()


def sample(rho: Density, stream: RngStream | np.random.Generator) -> float:
    """Draw a single coupling constant by inverse-CDF evaluation."""
    rng = stream.generator() if isinstance(stream, RngStream) else stream
    return float(rho.ppf(rng.random()))


def singular_integral(rho: Density, delta: complex, s: float, epsrel: float = 1e-10) -> float:
    """Compute ``int rho(xi) / |xi - delta|^s dxi`` for ``0 < s < 1``.

    The support is split at the density's breakpoints and at ``Re delta``.
    When ``delta`` is real, cells touching it are integrated with the
    algebraic-singularity weight ``|xi - delta|^(-s)`` (QUADPACK QAWS).
    """
    if not 0.0 < s < 1.0:
        raise ParameterError("exponent s must lie in (0, 1)")
    delta = complex(delta)
    x0, eta = delta.real, abs(delta.imag)
    a, b = rho.support
    cuts = set(float(c) for c in rho.breakpoints)
    if a < x0 < b:
        cuts.add(x0)
    cuts = sorted(cuts)
    # rho has unit mass, so the integral is at least (largest distance)^(-s)
    floor = math.hypot(max(abs(a - x0), abs(b - x0)), eta) ** (-s)
    epsabs = 1e-3 * epsrel * floor

    # integrate in t = xi - x0 so that offsets far below ulp(x0) stay resolvable
    def f(t):
        return rho.pdf(x0 + t) * np.hypot(t, eta) ** (-s)

    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if eta == 0.0 and lo == x0:
            val, _ = integrate.quad(rho.pdf, lo, hi, weight="alg", wvar=(-s, 0.0),
                                    epsabs=epsabs, epsrel=epsrel, limit=200)
        elif eta == 0.0 and hi == x0:
            val, _ = integrate.quad(rho.pdf, lo, hi, weight="alg", wvar=(0.0, -s),
                                    epsabs=epsabs, epsrel=epsrel, limit=200)
        else:
            val = 0.0
            for p, q in _graded(lo - x0, hi - x0, eta):
                val += integrate.quad(f, p, q, epsabs=epsabs, epsrel=epsrel, limit=200)[0]
        total += float(val)
    return total


def _graded(lo: float, hi: float, eta: float) -> list[tuple[float, float]]:
    """Split ``[lo, hi]`` geometrically away from the point nearest 0.

    The integrand varies on the scale ``h = hypot(dist(0, cell), eta)``;
    pieces of length h, 10h, 100h, ... let adaptive quadrature see it.
    """
    near = min(max(0.0, lo), hi)
    h = math.hypot(near, eta)
    length = hi - lo
    if h == 0.0 or h >= length:
        return [(lo, hi)]
    steps = []
    d = h
    while d < length:
        steps.append(d)
        d *= 10.0
    if near == lo:
        pts = [lo] + [lo + t for t in steps] + [hi]
    else:
        pts = [hi] + [hi - t for t in steps] + [lo]
        pts.reverse()
    return list(zip(pts[:-1], pts[1:]))


def graf_bounds(rho: Density, s: float, lam: float) -> tuple[float, float | None]:
    """Both upper bounds for :func:`singular_integral` at splitting scale ``lam``.

    Returns ``(sup-norm form, derivative form)``; the second is ``None`` when
    the density has jumps.
    """
    first = lam ** (-s) + rho.sup_norm * 2.0 * lam ** (1.0 - s) / (1.0 - s)
    second = None
    if rho.has_derivative:
        second = lam ** (-s) + rho.deriv_l1 * lam ** (1.0 - s) / (1.0 - s)
    return first, second


def density_from_spec(spec: dict) -> Density:
    spec = dict(spec)
    kind = spec.pop("kind")
    return make_density(kind, **spec)


def ks_critical_value(n: int, alpha: float = 0.01) -> float:
    """Asymptotic one-sample Kolmogorov-Smirnov critical value."""
    return math.sqrt(-0.5 * math.log(alpha / 2.0)) / math.sqrt(n)
