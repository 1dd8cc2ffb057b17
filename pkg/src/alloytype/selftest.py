"""Fast oracle-equivalence checks run by ``alloytype selftest``."""

from __future__ import annotations

import numpy as np

from . import numerics
from .densities import make_density, singular_integral
from .lattice import SingleSitePotential, assemble_hamiltonian, box_sites


def _inertia(rng) -> bool:
    for _ in range(40):
        n = int(rng.integers(1, 30))
        A = rng.normal(size=(n, n))
        A = A + A.T
        ev = numerics.full_spectrum(A)
        for c in rng.normal(scale=3.0, size=3):
            if numerics.eig_count_below(A, c) != int(np.sum(ev < c)):
                return False
    return True


def _green(rng) -> bool:
    region = box_sites(39, 1)
    for _ in range(10):
        H = assemble_hamiltonian(region, rng.uniform(-1, 1, size=40))
        z = complex(rng.normal(), 10 ** rng.uniform(-3, 0))
        G = np.linalg.inv(H.matrix - z * np.eye(40))
        x, y = rng.integers(0, 40, size=2)
        g = numerics.green_entry(H, z, (x,), (y,))
        if abs(g - G[x, y]) > 1e-10 * abs(G[x, y]):
            return False
    return True


def _laplacian() -> bool:
    L = 12
    H = assemble_hamiltonian(box_sites(L, 1), np.zeros(L + 1))
    exact = np.sort(-2 * np.cos(np.pi * np.arange(1, L + 2) / (L + 2)))
    return bool(np.allclose(numerics.full_spectrum(H), exact, atol=1e-12))


def _symbol() -> bool:
    ok = numerics.inverse_kernel_l1(SingleSitePotential.delta()) == 1.0
    ok &= abs(numerics.inverse_kernel_l1(SingleSitePotential.from_1d({0: 1, 1: 0.5})) - 2) < 1e-8
    return bool(ok)


def _densities() -> bool:
    tri = make_density("triangular", a=0, b=1)
    uni = make_density("uniform", a=0, b=1)
    ok = tri.deriv_l1 == 4.0 and uni.total_variation == 2.0
    ok &= abs(singular_integral(uni, 0.5, 0.5) - 2 * np.sqrt(2)) < 1e-8
    return bool(ok)


def run(seed: int = 0) -> dict[str, bool]:
    rng = np.random.default_rng(seed)
    return {
        "inertia_vs_jacobi": _inertia(rng),
        "green_vs_dense_inverse": _green(rng),
        "laplacian_spectrum": _laplacian(),
        "symbol_inverse_l1": _symbol(),
        "density_norms": _densities(),
    }
