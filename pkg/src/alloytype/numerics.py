"""Numerical kernels: inertia counting, resolvent entries, Jacobi oracle, symbol inversion.

Two code paths exist for most kernels: a dense one for arbitrary boxes and a
tridiagonal one for chains (d = 1).  The chain path also has batched variants
operating on a stack of potentials ``V`` of shape ``(samples, sites)``; the
Monte Carlo drivers use those.  The hopping amplitude is fixed at -1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    CapacityError,
    NonInvertibleSymbolError,
    NumericalDegeneracyError,
    ShiftCollisionError,
    UnsupportedDimensionError,
)
from .lattice import Hamiltonian, SingleSitePotential

PIVOT_RTOL = 1e-12
JITTER_STEP = 1e-10
JITTER_RETRIES = 3
SPECTRUM_CAP = 200


def _matrix(H) -> np.ndarray:
    return H.matrix if isinstance(H, Hamiltonian) else np.asarray(H, dtype=float)


def _is_tridiagonal(A: np.ndarray) -> bool:
    n = A.shape[0]
    if n <= 2:
        return True
    return not np.any(np.triu(A, 2)) and not np.any(np.tril(A, -2))


def _inf_norm(A: np.ndarray) -> float:
    return float(np.abs(A).sum(axis=1).max()) if A.size else 0.0


# --------------------------------------------------------------------------
# inertia counting


def _sturm_pivots(diag: np.ndarray, off_sq: np.ndarray, shifts: np.ndarray):
    """Pivots of the unpivoted LDL^T of ``T - c`` for every shift ``c``.

    ``diag`` has shape ``(..., n)``; the result has shape ``(..., len(shifts))``.
    Reported per shift: (negative-pivot count, min |pivot| over block-final pivots).

    A vanishing pivot inside an unreduced block only means a leading
    submatrix is singular; it is replaced by ``-pivmin`` as in LAPACK's
    bisection.  The last pivot of each block satisfies
    ``|d| >= dist(c, spectrum of the block)``, so only those are reported.
    """
    diag = np.asarray(diag, dtype=float)
    off_sq = np.asarray(off_sq, dtype=float)
    shifts = np.asarray(shifts, dtype=float)
    n = diag.shape[-1]
    pivmin = np.finfo(float).tiny * max(1.0, float(off_sq.max()) if off_sq.size else 1.0)
    final = np.append(off_sq == 0.0, True)
    count = np.zeros(np.broadcast_shapes(diag.shape[:-1] + (1,), shifts.shape), dtype=np.int64)
    smallest = np.full(count.shape, np.inf)
    d = None
    for i in range(n):
        if i == 0 or off_sq[i - 1] == 0.0:
            d = diag[..., i, None] - shifts
        else:
            d = (diag[..., i, None] - shifts) - off_sq[i - 1] / d
        if final[i]:
            np.minimum(smallest, np.abs(d), out=smallest)
        else:
            d = np.where(np.abs(d) < pivmin, -pivmin, d)
        count += d < 0
    return count, smallest


def chain_counts_below(V: np.ndarray, shifts, norm: float | None = None):
    """Batched eigenvalue counts of chain Hamiltonians ``-Laplace + diag(V)``.

    Returns ``(counts, collided)``: integer counts of eigenvalues strictly
    below each shift and a boolean mask of numerically zero pivots.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    n = V.shape[-1]
    off_sq = np.ones(max(n - 1, 0))
    counts, smallest = _sturm_pivots(V, off_sq, np.atleast_1d(shifts))
    if norm is None:
        hop = 2.0 if n > 2 else float(n - 1)
        norm = np.abs(V).max(axis=-1, keepdims=True) + hop
    return counts, smallest < PIVOT_RTOL * np.asarray(norm)


def _dense_inertia(A: np.ndarray, c: float) -> tuple[int, float]:
    n = A.shape[0]
    _, D, _ = scipy.linalg.ldl(A - c * np.eye(n), lower=True, hermitian=True)
    neg = 0
    smallest = np.inf
    i = 0
    while i < n:
        if i + 1 < n and D[i + 1, i] != 0.0:
            ev = np.linalg.eigvalsh(D[i:i + 2, i:i + 2])
            i += 2
        else:
            ev = np.array([D[i, i]])
            i += 1
        neg += int(np.sum(ev < 0))
        smallest = min(smallest, float(np.abs(ev).min()))
    return neg, smallest


def eig_count_below(H, c: float) -> int:
    """Number of eigenvalues of ``H`` strictly below ``c`` (Sylvester inertia).

    Raises :class:`ShiftCollisionError` when a pivot of the factorization
    of ``H - c`` is below ``1e-12 * ||H||_inf`` in magnitude.
    """
    A = _matrix(H)
    tol = PIVOT_RTOL * max(_inf_norm(A), np.finfo(float).tiny)
    if _is_tridiagonal(A):
        diag = np.diag(A)
        off_sq = np.diag(A, 1) ** 2
        count, smallest = _sturm_pivots(diag, off_sq, np.array([c]))
        count, smallest = int(count[0]), float(smallest[0])
    else:
        count, smallest = _dense_inertia(A, c)
    if smallest < tol:
        raise ShiftCollisionError(f"shift {c!r} is numerically an eigenvalue")
    return count


def jittered(c: float, j: int) -> float:
    return c + j * JITTER_STEP * max(abs(c), 1.0)


def count_below_jittered(H, c: float) -> int:
    for j in range(JITTER_RETRIES + 1):
        try:
            return eig_count_below(H, jittered(c, j))
        except ShiftCollisionError:
            continue
    raise NumericalDegeneracyError(f"shift collision at {c!r} persists after jitter")


def interval_trace(H, E: float, eps: float) -> int:
    """Number of eigenvalues in ``(E - eps, E + eps]`` via two inertia counts."""
    if not eps > 0:
        raise ValueError("interval half-width must be positive")
    return count_below_jittered(H, E + eps) - count_below_jittered(H, E - eps)


def chain_interval_traces(V: np.ndarray, energies, widths, return_failed: bool = False):
    """Batched interval traces for chains; shape ``(samples, len(energies), len(widths))``.

    Endpoints hitting a pivot collision are retried with the deterministic
    jitter sequence, sample by sample.  With ``return_failed`` a sample whose
    collision persists is flagged in a boolean mask instead of raising.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    energies = np.asarray(energies, dtype=float)
    widths = np.asarray(widths, dtype=float)
    E, W = np.meshgrid(energies, widths, indexing="ij")
    ends = np.concatenate([(E + W).ravel(), (E - W).ravel()])
    uniq, inv = np.unique(ends, return_inverse=True)
    counts, bad = chain_counts_below(V, uniq)
    failed = np.zeros(len(V), dtype=bool)
    for b, k in zip(*np.nonzero(bad)):
        try:
            counts[b, k] = _chain_count_retry(V[b], uniq[k])
        except NumericalDegeneracyError:
            if not return_failed:
                raise
            failed[b] = True
    per_end = counts[:, inv]
    half = E.size
    traces = (per_end[:, :half] - per_end[:, half:]).reshape(len(V), *E.shape)
    return (traces, failed) if return_failed else traces


def _chain_count_retry(v: np.ndarray, c: float) -> int:
    for j in range(1, JITTER_RETRIES + 1):
        counts, bad = chain_counts_below(v[None, :], [jittered(c, j)])
        if not bad[0, 0]:
            return int(counts[0, 0])
    raise NumericalDegeneracyError(f"shift collision at {c!r} persists after jitter")


# --------------------------------------------------------------------------
# Green's function


def green_entry(H, z: complex, x, y) -> complex:
    """Resolvent entry ``<delta_x, (H - z)^{-1} delta_y>``.

    ``x`` and ``y`` are sites of the box (or plain indices when ``H`` is an
    array).  Chains use a banded LU with partial pivoting, other boxes a dense
    LU.
    """
    z = complex(z)
    if z.imag == 0.0:
        raise ValueError("spectral parameter must have nonzero imaginary part")
    A = _matrix(H)
    if isinstance(H, Hamiltonian):
        i, j = H.region.index(x), H.region.index(y)
    else:
        i, j = int(x), int(y)
    n = A.shape[0]
    rhs = np.zeros(n, dtype=complex)
    rhs[j] = 1.0
    if _is_tridiagonal(A) and n > 2:
        ab = np.zeros((3, n), dtype=complex)
        ab[0, 1:] = np.diag(A, 1)
        ab[1] = np.diag(A) - z
        ab[2, :-1] = np.diag(A, -1)
        w = scipy.linalg.solve_banded((1, 1), ab, rhs)
    else:
        w = scipy.linalg.solve(A - z * np.eye(n), rhs)
    g = complex(w[i])
    assert abs(g) <= (1.0 + 1e-9) / abs(z.imag), "resolvent bound violated"
    return g


def chain_green_columns(V: np.ndarray, z: complex, y: int) -> np.ndarray:
    """Batched column ``G(z; ., y)`` of chain resolvents, shape ``(samples, sites)``.

    Uses forward elimination without pivoting.  For ``Im z > 0`` every pivot
    has imaginary part at most ``-Im z`` (and symmetrically for ``Im z < 0``),
    so no pivot can vanish.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    z = complex(z)
    if z.imag == 0.0:
        raise ValueError("spectral parameter must have nonzero imaginary part")
    B, n = V.shape
    piv = np.empty((B, n), dtype=complex)
    rhs = np.zeros((B, n), dtype=complex)
    rhs[:, y] = 1.0
    piv[:, 0] = V[:, 0] - z
    for i in range(1, n):
        # sub/super diagonal entries are -1, so the multiplier is -1 / piv
        m = -1.0 / piv[:, i - 1]
        piv[:, i] = (V[:, i] - z) + m
        rhs[:, i] -= m * rhs[:, i - 1]
    w = np.empty_like(rhs)
    w[:, -1] = rhs[:, -1] / piv[:, -1]
    for i in range(n - 2, -1, -1):
        w[:, i] = (rhs[:, i] + w[:, i + 1]) / piv[:, i]
    return w


def chain_green_diagonal(V: np.ndarray, z: complex) -> np.ndarray:
    """All diagonal entries ``G(z; x, x)`` for a batch of chains."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    z = complex(z)
    B, n = V.shape
    left = np.empty((B, n), dtype=complex)
    right = np.empty((B, n), dtype=complex)
    left[:, 0] = V[:, 0] - z
    for i in range(1, n):
        left[:, i] = V[:, i] - z - 1.0 / left[:, i - 1]
    right[:, -1] = V[:, -1] - z
    for i in range(n - 2, -1, -1):
        right[:, i] = V[:, i] - z - 1.0 / right[:, i + 1]
    # G(x,x) = 1 / (left_x + right_x - (V_x - z))
    return 1.0 / (left + right - (V - z))


# --------------------------------------------------------------------------
# dense eigensolver oracle


def _round_robin(m: int):
    players = list(range(m))
    for _ in range(m - 1):
        yield [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        players = [players[0], players[-1], *players[1:-1]]


def full_spectrum(H, max_size: int = SPECTRUM_CAP, rtol: float = 1e-12,
                  max_sweeps: int = 60) -> np.ndarray:
    """All eigenvalues of a symmetric matrix by the cyclic Jacobi method.

    Rotations on disjoint index pairs (round-robin ordering) are applied
    simultaneously.  Iterates until the off-diagonal Frobenius norm drops
    below ``rtol * ||H||_F``.
    """
    A = np.array(_matrix(H), dtype=float)
    n = A.shape[0]
    if n > max_size:
        raise CapacityError(f"dense eigensolver oracle is capped at {max_size} sites")
    if n < 2:
        return np.diag(A).copy()
    if not np.array_equal(A, A.T):
        raise ValueError("matrix is not symmetric")
    m = n + (n % 2)
    rounds = []
    for pairs in _round_robin(m):
        pairs = [(p, q) if p < q else (q, p) for p, q in pairs if p < n and q < n]
        P = np.array([p for p, _ in pairs])
        Q = np.array([q for _, q in pairs])
        rounds.append((P, Q))
    target = rtol * np.linalg.norm(A)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= target:
            return np.sort(np.diag(A))
        for P, Q in rounds:
            apq = A[P, Q]
            active = apq != 0.0
            if not active.any():
                continue
            p, q, apq = P[active], Q[active], apq[active]
            with np.errstate(over="ignore", divide="ignore"):
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (np.abs(theta) + np.sqrt(1.0 + theta * theta))
            t[theta == 0.0] = 1.0
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            Ap, Aq = A[:, p].copy(), A[:, q].copy()
            A[:, p] = c * Ap - s * Aq
            A[:, q] = s * Ap + c * Aq
            Rp, Rq = A[p, :].copy(), A[q, :].copy()
            A[p, :] = c[:, None] * Rp - s[:, None] * Rq
            A[q, :] = s[:, None] * Rp + c[:, None] * Rq
            A[p, q] = 0.0
            A[q, p] = 0.0
    raise NumericalDegeneracyError("Jacobi iteration did not converge")


# --------------------------------------------------------------------------
# symbol of the single-site potential


@dataclass(frozen=True)
class SymbolTable:
    """Values of ``u_hat(theta) = sum_k u(k) exp(i k theta)`` on ``theta_j = 2 pi j / N``."""

    grid_size: int
    values: np.ndarray
    min_abs: float


def _require_1d(u: SingleSitePotential):
    if u.dim != 1:
        raise UnsupportedDimensionError("symbol inversion is implemented for d = 1 only")


def _wrapped_coefficients(u: SingleSitePotential, N: int) -> np.ndarray:
    c = np.zeros(N)
    for (k,), v in u.entries.items():
        c[k % N] += v
    return c


def symbol_eval(u: SingleSitePotential, N: int | None = None) -> SymbolTable:
    _require_1d(u)
    min_n = 4 * max(u.diameter, 1)
    if N is None:
        N = 1 << (min_n - 1).bit_length()
    if N & (N - 1) or N < min_n:
        raise ValueError(f"grid size must be a power of two >= {min_n}")
    values = N * np.fft.ifft(_wrapped_coefficients(u, N))
    return SymbolTable(N, values, float(np.abs(values).min()))


def symbol_coefficients(table: SymbolTable) -> np.ndarray:
    """Invert :func:`symbol_eval`: wrapped coefficient sequence of length N."""
    return np.fft.fft(table.values) / table.grid_size


def inverse_kernel_l1(u: SingleSitePotential, tol: float = 1e-12,
                      max_grid: int = 1 << 22) -> float:
    """l^1 norm of the inverse of the convolution operator ``A(j, k) = u(j - k)``.

    The Fourier coefficients of ``1 / u_hat`` are obtained by FFT; the grid
    is doubled until the l^1 sum is stable to ``tol`` and the coefficients
    around ``|k| ~ N/2`` (where aliasing lives) are below 1e-15 of the sum.
    """
    _require_1d(u)
    scale = u.l1_norm
    N = max(64, 1 << (4 * (u.diameter + 1) - 1).bit_length())
    previous = None
    while N <= max_grid:
        table = symbol_eval(u, N)
        if table.min_abs < 1e-10 * scale:
            raise NonInvertibleSymbolError(table.min_abs)
        b = np.fft.fft(1.0 / table.values) / N
        total = float(np.abs(b).sum())
        tail = float(np.abs(b[N // 4: 3 * N // 4]).max())
        if previous is not None and abs(total - previous) <= tol * total and tail <= 1e-15 * total:
            return total
        previous = total
        N *= 2
    raise NonInvertibleSymbolError(table.min_abs)
