"""Lattice boxes, single-site potentials and the finite-volume Hamiltonian.

The random potential is the alloy-type sum

    V(x) = sum_k omega_k * u(x - k),

and the Hamiltonian on a box is the negative discrete Laplacian (hopping -1
between nearest neighbours, simple truncation at the boundary) plus diag(V).
Sites are always enumerated in lexicographic order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import CapacityError, ConfigurationError

Site = tuple[int, ...]

#: default cap on |Lambda| for dense assembly
MAX_SITES = 4096


def _as_site(k, dim: int | None = None) -> Site:
    if isinstance(k, (int, np.integer)):
        site = (int(k),)
    else:
        site = tuple(int(c) for c in k)
    if dim is not None and len(site) != dim:
        raise ConfigurationError(f"site {site!r} does not have dimension {dim}")
    return site


@dataclass(frozen=True)
class SingleSitePotential:
    """Finitely supported real function ``u`` on Z^d.

    Zero values are dropped on construction, so ``support`` is exactly the
    set of sites with ``u(k) != 0``.
    """

    dim: int
    entries: Mapping[Site, float]

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigurationError("potential dimension must be >= 1")
        clean = {}
        for k, v in self.entries.items():
            site = _as_site(k, self.dim)
            v = float(v)
            if not np.isfinite(v):
                raise ConfigurationError(f"non-finite potential value at {site}")
            if v != 0.0:
                clean[site] = clean.get(site, 0.0) + v
        clean = {k: v for k, v in sorted(clean.items()) if v != 0.0}
        if not clean:
            raise ConfigurationError("single-site potential has empty support")
        object.__setattr__(self, "entries", clean)

    @classmethod
    def delta(cls, dim: int = 1) -> SingleSitePotential:
        return cls(dim, {(0,) * dim: 1.0})

    @classmethod
    def from_1d(cls, values: Mapping[int, float]) -> SingleSitePotential:
        return cls(1, {(int(k),): v for k, v in values.items()})

    def __call__(self, k) -> float:
        return self.entries.get(_as_site(k, self.dim), 0.0)

    @property
    def support(self) -> list[Site]:
        return list(self.entries)

    @property
    def rank(self) -> int:
        return len(self.entries)

    @property
    def total(self) -> float:
        """The sum of all values (``u-bar``)."""
        return float(sum(self.entries.values()))

    @property
    def l1_norm(self) -> float:
        return float(sum(abs(v) for v in self.entries.values()))

    @property
    def diameter(self) -> int:
        """Sup-norm diameter of the support."""
        pts = np.array(self.support)
        return int((pts.max(axis=0) - pts.min(axis=0)).max())

    def coefficients_1d(self) -> tuple[int, np.ndarray]:
        """Return ``(k_min, values)`` with ``values[i] = u(k_min + i)``."""
        if self.dim != 1:
            raise ConfigurationError("coefficient sequence only defined for d=1")
        ks = [k[0] for k in self.support]
        lo, hi = min(ks), max(ks)
        out = np.zeros(hi - lo + 1)
        for (k,), v in self.entries.items():
            out[k - lo] = v
        return lo, out


@dataclass(frozen=True)
class BoxRegion:
    """The box [0, L]^d of Z^d, optionally with its enlarged index set.

    ``plus_sites`` holds every k whose coupling constant enters the
    potential on the box; it is empty until :func:`support_dilate` runs.
    """

    dim: int
    L: int
    sites: tuple[Site, ...]
    plus_sites: tuple[Site, ...] = ()
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {x: i for i, x in enumerate(self.sites)})

    def __len__(self) -> int:
        return len(self.sites)

    def index(self, x) -> int:
        try:
            return self._index[_as_site(x, self.dim)]
        except KeyError:
            raise ConfigurationError(f"site {x!r} is not in the box") from None

    def __contains__(self, x) -> bool:
        return _as_site(x) in self._index


def box_sites(L: int, d: int, max_sites: int = MAX_SITES) -> BoxRegion:
    """All integer points of [0, L]^d in lexicographic order."""
    if d < 1 or L < 0:
        raise ConfigurationError(f"invalid box (L={L}, d={d})")
    count = (L + 1) ** d
    if count > max_sites:
        raise CapacityError(f"box has {count} sites, cap is {max_sites}")
    sites = tuple(itertools.product(range(L + 1), repeat=d))
    return BoxRegion(d, L, sites)


def support_dilate(region: BoxRegion, u: SingleSitePotential) -> BoxRegion:
    """Attach ``plus_sites = {k : x - k in supp u for some x in the box}``."""
    if u.dim != region.dim:
        raise ConfigurationError("potential and box dimensions differ")
    plus = {
        tuple(xi - si for xi, si in zip(x, s))
        for x in region.sites
        for s in u.support
    }
    return BoxRegion(region.dim, region.L, region.sites, tuple(sorted(plus)))


@dataclass(frozen=True)
class DisorderConfiguration:
    """Coupling constants on the enlarged index set of a box."""

    values: Mapping[Site, float]
    seed: int = 0
    sample_index: int = 0

    @classmethod
    def from_array(cls, region: BoxRegion, omega: Iterable[float], seed: int = 0,
                   sample_index: int = 0) -> DisorderConfiguration:
        omega = list(omega)
        if len(omega) != len(region.plus_sites):
            raise ConfigurationError(
                f"expected {len(region.plus_sites)} coupling constants, got {len(omega)}")
        return cls(dict(zip(region.plus_sites, map(float, omega))), seed, sample_index)


def potential_stencil(u: SingleSitePotential, region: BoxRegion) -> list[tuple[float, np.ndarray]]:
    """Pairs ``(u(s), cols)`` with ``V[:, i] = sum_s u(s) * omega[:, cols[i]]``.

    Columns index ``region.plus_sites``.  Applying the stencil to a batch of
    coupling constants is elementwise, so each row's result does not depend
    on the batch it belongs to.
    """
    if not region.plus_sites:
        region = support_dilate(region, u)
    col = {k: j for j, k in enumerate(region.plus_sites)}
    out = []
    for s, v in u.entries.items():
        idx = np.array([col[tuple(xi - si for xi, si in zip(x, s))] for x in region.sites])
        out.append((v, idx))
    return out


def apply_stencil(stencil, omega: np.ndarray) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    V = None
    for v, idx in stencil:
        term = v * omega[..., idx]
        V = term if V is None else V + term
    return V


def assemble_potential(u: SingleSitePotential, omega: DisorderConfiguration,
                       region: BoxRegion) -> dict[Site, float]:
    """Evaluate V(x) = sum_k omega_k u(x - k) on every site of the box."""
    V = {}
    for x in region.sites:
        acc = 0.0
        for s, v in u.entries.items():
            k = tuple(xi - si for xi, si in zip(x, s))
            try:
                acc += omega.values[k] * v
            except KeyError:
                raise ConfigurationError(f"missing coupling constant at {k}") from None
        V[x] = acc
    return V


@dataclass(frozen=True)
class Hamiltonian:
    region: BoxRegion
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_chain(self) -> bool:
        """True when the matrix is tridiagonal in site order (d = 1)."""
        return self.region.dim == 1

    def diagonal(self) -> np.ndarray:
        return np.diag(self.matrix).copy()


def hopping_matrix(region: BoxRegion) -> np.ndarray:
    n = len(region.sites)
    H0 = np.zeros((n, n))
    for i, x in enumerate(region.sites):
        for axis in range(region.dim):
            y = x[:axis] + (x[axis] + 1,) + x[axis + 1:]
            j = region._index.get(y)
            if j is not None:
                H0[i, j] = H0[j, i] = -1.0
    return H0


def assemble_hamiltonian(region: BoxRegion, V) -> Hamiltonian:
    """Hopping part plus diag(V); ``V`` is a site map or an array in site order."""
    if isinstance(V, Mapping):
        try:
            diag = np.array([V[x] for x in region.sites], dtype=float)
        except KeyError as exc:
            raise ConfigurationError(f"potential missing at site {exc.args[0]}") from None
    else:
        diag = np.asarray(V, dtype=float)
        if diag.shape != (len(region.sites),):
            raise ConfigurationError("potential array does not match the box")
    H = hopping_matrix(region)
    H[np.diag_indices_from(H)] = diag
    H.setflags(write=False)
    return Hamiltonian(region, H)
