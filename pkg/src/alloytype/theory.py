"""Explicit constants and right-hand sides of the spectral bounds."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .densities import Density
from .errors import HypothesisViolation, NonInvertibleSymbolError, UnsupportedDimensionError
from .lattice import SingleSitePotential
from . import numerics

#: readings of under-determined notation, echoed into every result manifest
INTERPRETATIONS = {
    "energy_window": "trace over [E-eps, E+eps]; counted as eigenvalues in (E-eps, E+eps]",
    "product_index_set": "product in the decay constant runs over supp u",
    "tail_norm": "tail radius uses the sup-norm |k|_inf",
    "wegner_prefactor": "8/ubar evaluated as 8/|ubar|",
    "support_box_size": "n = diameter(supp u) + 1, so rank u <= n^d; |[0,n]^d| = (n+1)^d reported alongside",
    "infinite_chain": "infinite-lattice Green's function approximated by a finite chain",
}


@dataclass(frozen=True)
class PotentialReport:
    rank: int
    ubar: float
    tail_radius_m: int | None
    diameter_n: int
    box_points_n: int
    symbol_min_abs: float | None
    c_u: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def tail_radius(u: SingleSitePotential) -> int:
    """Smallest m >= 1 with ``sum_{|k|_inf >= m} |u(k)| <= |ubar| / 2``."""
    ubar = u.total
    if ubar == 0.0:
        raise HypothesisViolation("ubar = sum u(k) must be nonzero", "tail radius undefined")
    radii = {k: max(abs(c) for c in k) for k in u.support}
    m = 1
    while sum(abs(v) for k, v in u.entries.items() if radii[k] >= m) > abs(ubar) / 2:
        m += 1
    return m


def support_size_n(u: SingleSitePotential) -> int:
    return u.diameter + 1


def potential_report(u: SingleSitePotential) -> PotentialReport:
    ubar = u.total
    n = support_size_n(u)
    m = tail_radius(u) if ubar != 0.0 else None
    min_abs = c_u = None
    if u.dim == 1:
        min_abs = numerics.symbol_eval(u).min_abs
        try:
            c_u = numerics.inverse_kernel_l1(u)
        except NonInvertibleSymbolError:
            c_u = None
    return PotentialReport(u.rank, ubar, m, n, (n + 1) ** u.dim, min_abs, c_u)


def _compact(rho: Density):
    a, b = rho.support
    if not (math.isfinite(a) and math.isfinite(b)):
        raise HypothesisViolation("rho must have compact support")


def wegner_bound(u: SingleSitePotential, rho: Density, L: int, eps: float) -> float:
    """Non-degenerate Wegner bound ``(8/|ubar|) ||rho||_Var min(L^d, rank u) eps (L+m)^d``."""
    _compact(rho)
    m = tail_radius(u)
    d = u.dim
    return (8.0 / abs(u.total)) * rho.total_variation * min(L ** d, u.rank) * eps * (L + m) ** d


@dataclass(frozen=True)
class ShapeFactors:
    epsilon_factor: float
    volume_factor: float
    rank: int
    box_points_n: int


def wegner_shape_factors(u: SingleSitePotential, rho: Density, L: int, eps: float,
                         n: int | None = None) -> ShapeFactors:
    """Structural factors of the degenerate Wegner bound with its constant left free.

    ``epsilon_factor = ||rho||_Var * rank u * eps`` and
    ``volume_factor = (L + n)^(d (n + 1))``.
    """
    n = support_size_n(u) if n is None else n
    d = u.dim
    return ShapeFactors(rho.total_variation * u.rank * eps, float((L + n) ** (d * (n + 1))),
                        u.rank, (n + 1) ** d)


def _check_s(s: float):
    if not 0.0 < s < 1.0:
        raise HypothesisViolation("exponent s must lie in (0, 1)", f"s = {s}")


def fractional_moment_bound(u: SingleSitePotential, rho: Density, s: float,
                            c_u: float | None = None) -> float:
    """``(C_u ||rho'||_1)^s 2^(1+s) s^(-s) / (1 - s)`` for off-diagonal entries."""
    _check_s(s)
    if not rho.has_derivative:
        raise HypothesisViolation("rho' must be integrable", f"{rho.kind} density has jumps")
    if c_u is None:
        if u.dim != 1:
            raise UnsupportedDimensionError("C_u is only computed for d = 1")
        c_u = numerics.inverse_kernel_l1(u)
    return (c_u * rho.deriv_l1) ** s * 2.0 ** (1.0 + s) * s ** (-s) / (1.0 - s)


def fractional_moment_bound_diagonal(u, rho, s, c_u=None) -> float:
    """Sharper diagonal variant, without the factor ``2^(1+s)``."""
    return fractional_moment_bound(u, rho, s, c_u) / 2.0 ** (1.0 + s)


def interval_support(u: SingleSitePotential) -> tuple[int, int]:
    """Return ``(offset, n)`` if supp u is a full interval ``offset + {0..n-1}`` in d = 1."""
    if u.dim != 1:
        raise HypothesisViolation("decay estimates need d = 1")
    ks = sorted(k[0] for k in u.support)
    if ks != list(range(ks[0], ks[0] + len(ks))):
        raise HypothesisViolation("supp u must be a full interval {0, ..., n-1}", f"support {ks}")
    return ks[0], len(ks)


@dataclass(frozen=True)
class DecayConstants:
    c_u_rho: float
    decay_rate_m: float
    n: int

    @property
    def decaying(self) -> bool:
        return self.c_u_rho < 1.0


def decay_constants(u: SingleSitePotential, rho: Density, s: float) -> DecayConstants:
    """``C = |prod u(k)|^(-s/n) ||rho||_inf^s 2^s s^(-s) / (1 - s)`` and rate ``-ln C``."""
    _check_s(s)
    _, n = interval_support(u)
    prod = abs(math.prod(u.entries.values()))
    c = prod ** (-s / n) * rho.sup_norm ** s * 2.0 ** s * s ** (-s) / (1.0 - s)
    return DecayConstants(c, -math.log(c), n)


def bound_set(u: SingleSitePotential, rho: Density, *, L: int, eps: float, s: float) -> dict:
    """Every bound that applies to ``(u, rho)``; inapplicable ones carry the reason."""
    out: dict = {"parameters": {"L": L, "eps": eps, "s": s, "density_norms": rho.norms()}}

    def attempt(key, fn):
        try:
            out[key] = fn()
        except (HypothesisViolation, UnsupportedDimensionError) as exc:
            out[key] = None
            out.setdefault("violations", {})[key] = str(exc)

    attempt("wegner", lambda: wegner_bound(u, rho, L, eps))
    attempt("wegner_shape", lambda: asdict(wegner_shape_factors(u, rho, L, eps)))
    attempt("fractional_moment", lambda: fractional_moment_bound(u, rho, s))
    attempt("fractional_moment_diagonal", lambda: fractional_moment_bound_diagonal(u, rho, s))

    def decay():
        dc = decay_constants(u, rho, s)
        return {"c_u_rho": dc.c_u_rho, "decay_rate_m": dc.decay_rate_m,
                "n": dc.n, "decaying": dc.decaying}

    attempt("decay", decay)
    return out
