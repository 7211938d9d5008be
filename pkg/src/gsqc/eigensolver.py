"""Lowest eigenpairs of sparse Hermitian operators.

Small problems are diagonalized densely. Larger ones use a thick-restart
block Lanczos iteration with full reorthogonalization; a block of at least
two vectors keeps exactly or nearly degenerate ground pairs apart. ARPACK
(``scipy.sparse.linalg.eigsh``) is available as an alternative engine. Start
blocks come from a seeded generator, so results are reproducible, and every
returned pair carries its explicit residual ``||H x - theta x||``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .hamiltonian import SparseHermitian

DENSE_CUTOFF = 2048
MAX_BASIS = 240
BASIS_BYTES = 512 * 2**20


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, partial: "SpectrumResult | None" = None):
        super().__init__(message)
        self.partial = partial


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    iterations: int
    method: str
    seconds: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return bool(self.info.get("converged", True))

    def ground_state(self) -> np.ndarray:
        v = self.eigenvectors[:, 0]
        return v / np.linalg.norm(v)


def _as_operator(H):
    if isinstance(H, SparseHermitian):
        return H.matrix, H.dim
    if sp.issparse(H):
        return sp.csr_matrix(H), H.shape[0]
    H = np.asarray(H)
    return H, H.shape[0]


def residuals(H, values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    op, _ = _as_operator(H)
    r = op @ vectors - vectors * values[None, :]
    return np.linalg.norm(r, axis=0)


def _dense(op, k: int) -> tuple[np.ndarray, np.ndarray]:
    m = op.toarray() if sp.issparse(op) else np.asarray(op)
    w, v = np.linalg.eigh(m)
    return w[:k], v[:, :k]


def _orthonormalize(block: np.ndarray, basis: np.ndarray | None, rng, scale: float):
    """QR of ``block`` after two passes of projection against ``basis``.

    Columns that collapse numerically are replaced by fresh random
    directions (their coupling coefficient is set to zero), which keeps the
    block size constant across invariant subspaces and exact degeneracies.
    """
    q, r = np.linalg.qr(block)
    bad = np.abs(np.diag(r)) <= 1e-12 * max(scale, 1.0)
    if np.any(bad):
        for col in np.flatnonzero(bad):
            x = rng.standard_normal(block.shape[0]).astype(block.dtype)
            for _ in range(2):
                if basis is not None and basis.shape[1]:
                    x -= basis @ (basis.conj().T @ x)
                good = np.flatnonzero(~bad)
                if good.size:
                    x -= q[:, good] @ (q[:, good].conj().T @ x)
            q[:, col] = x / np.linalg.norm(x)
            r[col, :] = 0.0
            bad[col] = False
    return q, r


def _block_lanczos(op, n, k, block, max_basis, tol, maxiter, rng, dtype, v0, scale):
    """Thick-restart block Lanczos with full (two-pass) reorthogonalization.

    The projected matrix is assembled from explicit inner products, so after
    a restart the kept Ritz vectors and the next block are coupled correctly
    without special bookkeeping.
    """
    b, m = block, max_basis
    V = np.zeros((n, m + b), dtype=dtype)
    T = np.zeros((m + b, m + b), dtype=dtype)
    start = rng.standard_normal((n, b))
    if np.issubdtype(dtype, np.complexfloating):
        start = start + 1j * rng.standard_normal((n, b))
    if v0 is not None:
        start[:, 0] = v0
    Q, _ = _orthonormalize(start.astype(dtype), None, rng, 1.0)
    j = 0
    steps = 0
    check_every = max(1, min(8, (m // b) // 4))
    while steps < maxiter:
        V[:, j : j + b] = Q
        W = op @ Q
        steps += 1
        jb = j + b
        basis = V[:, :jb]
        C = basis.conj().T @ W
        W -= basis @ C
        C2 = basis.conj().T @ W
        W -= basis @ C2
        C += C2
        T[:jb, j:jb] = C
        T[j:jb, :jb] = C.conj().T
        T[j:jb, j:jb] = 0.5 * (C[j:jb] + C[j:jb].conj().T)
        Q, Bm = _orthonormalize(W, basis, rng, scale)
        j = jb
        full = j + b > m
        if not (full or steps % check_every == 0) or j < k:
            continue
        theta, S = np.linalg.eigh(T[:j, :j])
        est = np.linalg.norm(Bm @ S[j - b : j, :], axis=0)
        if np.all(est[:k] <= tol):
            X = V[:, :j] @ S[:, :k]
            res = np.linalg.norm(op @ X - X * theta[None, :k], axis=0)
            if np.all(res <= tol):
                return theta[:k], X, res, steps, True
        if full:
            p = min(j - b, max(k + b, (m + k) // 2))
            V[:, :p] = V[:, :j] @ S[:, :p]
            T[:] = 0
            T[:p, :p] = np.diag(theta[:p])
            j = p
    if j == 0:
        return np.array([]), np.zeros((n, 0), dtype), np.array([]), steps, False
    theta, S = np.linalg.eigh(T[:j, :j])
    kk = min(k, j)
    X = V[:, :j] @ S[:, :kk]
    res = np.linalg.norm(op @ X - X * theta[None, :kk], axis=0)
    return theta[:kk], X, res, steps, False


def _arpack(op, n, k, tol, maxiter, v0, ncv, sigma, scale):
    # ARPACK's tolerance is relative to |theta|; tighten it and check the
    # explicit residuals afterwards.
    arpack_tol = max(tol / max(scale, 1.0) * 1e-2, np.finfo(float).eps)
    kwargs = dict(k=k, tol=arpack_tol, v0=v0, ncv=ncv, maxiter=maxiter)
    try:
        if sigma is None:
            w, v = sla.eigsh(op, which="SA", **kwargs)
        else:
            w, v = sla.eigsh(op, sigma=sigma, which="LM", **kwargs)
        ok = True
    except sla.ArpackNoConvergence as exc:
        w, v, ok = exc.eigenvalues, exc.eigenvectors, False
    order = np.argsort(w)
    w, v = w[order], v[:, order]
    res = residuals(op, w, v) if w.size else np.array([])
    return w, v, res, maxiter, ok


def lowest_eigenpairs(
    H,
    k: int = 1,
    tol: float = 1e-10,
    seed: int = 0,
    method: str = "auto",
    dense_cutoff: int = DENSE_CUTOFF,
    block: int | None = None,
    max_basis: int | None = None,
    maxiter: int | None = None,
    v0: np.ndarray | None = None,
    sigma: float | None = None,
) -> SpectrumResult:
    """Return the ``k`` smallest eigenvalues in ascending order.

    ``method`` is ``"dense"``, ``"lanczos"`` (block Lanczos, the default
    above ``dense_cutoff``) or ``"arpack"``. ``tol`` bounds the explicit
    residual norm of each returned pair. The iteration cap defaults to
    ``10*sqrt(dim)`` block steps. For an eigenvalue of multiplicity larger
    than the block size only ``block`` copies are guaranteed; levels above it
    are still found.

    On failure a :class:`ConvergenceError` carrying the best pairs found is
    raised.
    """
    op, n = _as_operator(H)
    if tol < 1e-13:
        raise ValueError("tolerance below 1e-13 is not attainable")
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside 1..{n}")
    if v0 is not None and np.shape(v0) != (n,):
        raise ValueError(f"start vector of shape {np.shape(v0)} does not match dimension {n}")
    if method == "auto":
        method = "dense" if n <= dense_cutoff else "lanczos"
    t0 = time.perf_counter()
    if method == "dense" or k >= n - 1:
        w, v = _dense(op, k)
        res = residuals(op, w, v)
        return SpectrumResult(w, v, res, 0, "dense", time.perf_counter() - t0)

    rng = np.random.default_rng(seed)
    dtype = np.result_type(op.dtype, np.float64)
    if v0 is not None:
        v0 = np.asarray(v0, dtype=dtype)
    if sp.issparse(op):
        scale = float(abs(op).sum(axis=1).max())
    else:
        scale = float(np.abs(op).sum(axis=1).max())
    b = block or max(2, min(k, 8))
    maxiter = maxiter or int(10 * np.sqrt(n)) + 50
    if method == "lanczos":
        itemsize = np.dtype(dtype).itemsize
        m = max_basis or int(min(MAX_BASIS, max(k + 4 * b, BASIS_BYTES // (itemsize * n))))
        # leave room for a full block orthogonal to the basis, or deflated
        # columns have nowhere to go
        m = min(m, n - 2 * b)
        m -= m % b
        if m < k + 2 * b:
            w, v = _dense(op, k)
            res = residuals(op, w, v)
            return SpectrumResult(w, v, res, 0, "dense", time.perf_counter() - t0)
        w, v, res, steps, ok = _block_lanczos(op, n, k, b, m, tol, maxiter, rng, dtype, v0, scale)
    elif method == "arpack":
        if v0 is None:
            v0 = rng.standard_normal(n).astype(dtype)
        ncv = min(n - 1, max(2 * k + 1, k + 32))
        w, v, res, steps, ok = _arpack(op, n, k, tol, maxiter, v0, ncv, sigma, scale)
    else:
        raise ValueError(f"unknown method {method!r}")
    result = SpectrumResult(w, v, res, steps, method, time.perf_counter() - t0, {"converged": ok})
    if not ok or w.size < k or np.any(res > tol):
        result.info["converged"] = False
        worst = res.max() if res.size else float("nan")
        raise ConvergenceError(
            f"{method} did not converge within {maxiter} steps "
            f"({w.size}/{k} pairs, worst residual {worst:.3g}, tol {tol:g})",
            result,
        )
    return result


def lowest_eigenvalues(H, k: int = 1, **kw) -> np.ndarray:
    return lowest_eigenpairs(H, k, **kw).eigenvalues


@dataclass(frozen=True)
class GapReport:
    """Low spectrum summary.

    ``splitting`` is the spread of the ``multiplicity`` lowest levels of the
    biased Hamiltonian. ``gap`` is ``E_m - E_0`` of the unbiased twin (or of
    the same operator when no twin is given), ``m`` being the zero-mode
    multiplicity.
    """

    energies: tuple[float, ...]
    splitting: float
    gap: float
    multiplicity: int

    @property
    def ground_energy(self) -> float:
        return self.energies[0]


def gap_report(H, unbiased=None, multiplicity: int = 2, **kw) -> GapReport:
    m = multiplicity
    e = lowest_eigenvalues(H, m + 1, **kw)
    if unbiased is None:
        gap = e[m] - e[0]
    else:
        e0 = lowest_eigenvalues(unbiased, m + 1, **kw)
        gap = e0[m] - e0[0]
    return GapReport(tuple(float(x) for x in e), float(e[m - 1] - e[0]), float(gap), m)


@dataclass(frozen=True)
class NonzeroLevel:
    value: float
    residual_estimate: float
    residual: float | None
    iterations: int
    seconds: float


def lowest_nonzero_eigenvalue(
    H,
    zero_tol: float = 1e-8,
    tol: float = 1e-8,
    seed: int = 0,
    maxiter: int | None = None,
    check_every: int = 100,
    verify: bool = True,
) -> NonzeroLevel:
    """Smallest eigenvalue above ``zero_tol`` of a positive semidefinite operator.

    The start vector is ``H @ r`` for random ``r``, which is orthogonal to the
    kernel however degenerate it is, and the three-term recurrence is run
    without reorthogonalization. Rounding slowly reintroduces kernel
    components; they surface as Ritz values that are either below
    ``zero_tol`` or unconverged, so the first converged Ritz value above
    ``zero_tol`` is accepted. With ``verify`` the recurrence is replayed to
    form the Ritz vector and its explicit residual is returned.
    """
    from scipy.linalg import eigh_tridiagonal

    op, n = _as_operator(H)
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    dtype = np.result_type(op.dtype, np.float64)
    maxiter = maxiter or max(200, int(40 * np.sqrt(n)))

    def start():
        r = rng.standard_normal(n).astype(dtype)
        v = op @ r
        return v / np.linalg.norm(v)

    v = start()
    v_first = v.copy()
    v_prev = np.zeros_like(v)
    alphas: list[float] = []
    betas: list[float] = []
    beta = 0.0
    found = None
    for j in range(1, maxiter + 1):
        w = op @ v - beta * v_prev
        a = float(np.vdot(v, w).real)
        w -= a * v
        beta = float(np.linalg.norm(w))
        alphas.append(a)
        betas.append(beta)
        if beta == 0.0:
            break
        v_prev, v = v, w / beta
        if j % check_every and j != maxiter:
            continue
        kk = min(j, 12)
        th, s = eigh_tridiagonal(
            np.array(alphas), np.array(betas[:-1]), select="i", select_range=(0, kk - 1)
        )
        est = np.abs(beta * s[-1, :])
        above = np.flatnonzero(th > zero_tol)
        if above.size and est[above[0]] <= tol:
            found = (float(th[above[0]]), float(est[above[0]]), s[:, above[0]], j)
            break
    if found is None:
        raise ConvergenceError(
            f"no converged level above {zero_tol:g} after {len(alphas)} Lanczos steps"
        )
    value, est, coeffs, steps = found
    res = None
    if verify:
        x = np.zeros(n, dtype=dtype)
        v, v_prev, b = v_first, np.zeros_like(v_first), 0.0
        for i in range(steps):
            x += coeffs[i] * v
            w = op @ v - b * v_prev - alphas[i] * v
            b = betas[i]
            v_prev, v = v, w / b
        x /= np.linalg.norm(x)
        res = float(np.linalg.norm(op @ x - value * x))
    return NonzeroLevel(value, est, res, steps, time.perf_counter() - t0)


@dataclass(frozen=True)
class ZeroMode:
    vector: np.ndarray
    residual: float
    iterations: int
    seconds: float


def anchored_zero_mode(H, anchor: int, tol: float = 1e-12, maxiter: int | None = None) -> ZeroMode:
    """Null vector of a positive semidefinite ``H`` with a one-dimensional kernel.

    The amplitude at ``anchor`` is fixed to one and the rest solves
    ``H_rr x = -H_ra`` by Jacobi-preconditioned conjugate gradients; ``H_rr``
    is positive definite whenever the kernel vector does not vanish at the
    anchor. Returns the normalized vector and ``||H x||``.
    """
    op, n = _as_operator(H)
    op = sp.csr_matrix(op)
    t0 = time.perf_counter()
    rest = np.delete(np.arange(n), anchor)
    A = op[rest][:, rest]
    rhs = -op[rest][:, [anchor]].toarray().ravel()
    d = A.diagonal().real
    if np.any(d <= 0):
        raise ConvergenceError("anchored block has a non-positive diagonal entry")
    count = [0]

    def tick(_):
        count[0] += 1

    x, info = sla.cg(
        A, rhs, rtol=tol * 1e-2, atol=0.0, maxiter=maxiter or 20 * n,
        M=sp.diags(1.0 / d), callback=tick,
    )
    psi = np.zeros(n, dtype=np.result_type(op.dtype, np.float64))
    psi[anchor] = 1.0
    psi[rest] = x
    psi /= np.linalg.norm(psi)
    res = float(np.linalg.norm(op @ psi))
    if info != 0 or res > tol:
        raise ConvergenceError(f"anchored solve failed (info={info}, residual {res:.3g})")
    return ZeroMode(psi, res, count[0], time.perf_counter() - t0)
