"""Dense complex linear algebra kernel.

Every operator, state and vector in fermikit is a plain ``numpy`` complex
array.  The helpers here fix the conventions used everywhere else:

* ``vec`` stacks columns, so ``vec(A @ X @ B) == kron(B.T, A) @ vec(X)``;
* Hilbert-Schmidt inner product ``<a, b> = trace(a^H b)``;
* rank decisions compare against ``tol`` times the largest value, and a value
  sitting exactly on the threshold counts as nonzero.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import DimensionMismatch, NoConvergence, NotHermitian

DEFAULT_TOL = 1e-10


def as_cmat(a, name="matrix"):
    """Return ``a`` as a finite 2-d complex array."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-dimensional, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def kron(a, b):
    """Kronecker product; the first factor indexes the slow (outer) block."""
    return np.kron(as_cmat(a, "a"), as_cmat(b, "b"))


def fro(a):
    return float(np.linalg.norm(a))


def dagger(a):
    return np.conj(np.swapaxes(a, -1, -2))


def hs_inner(a, b):
    """Hilbert-Schmidt inner product ``trace(a^H b)``."""
    return complex(np.vdot(a, b))


def commutator(a, b):
    return a @ b - b @ a


def anticommutator(a, b):
    return a @ b + b @ a


def _check_hermitian(a, tol):
    a = as_cmat(a)
    if a.shape[0] != a.shape[1]:
        raise NotHermitian(f"matrix is not square: {a.shape}")
    scale = max(fro(a), 1.0) if tol is not None else 1.0
    if fro(a - dagger(a)) > tol * scale:
        raise NotHermitian("matrix is not Hermitian within tolerance")
    return 0.5 * (a + dagger(a))


def herm_eigh(a, tol=DEFAULT_TOL):
    """Eigen-decomposition ``a = U diag(w) U^H`` of a Hermitian matrix, ``w`` ascending."""
    h = _check_hermitian(a, tol)
    if h.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0), dtype=complex)
    if not np.any(h.imag):
        w, u = np.linalg.eigh(h.real)
        return w, u.astype(complex)
    return np.linalg.eigh(h)


def herm_eigvals(a, tol=DEFAULT_TOL):
    """Ascending real eigenvalues of a Hermitian matrix.

    Raises NotHermitian when ``||a - a^H||_F > tol * ||a||_F``.
    """
    h = _check_hermitian(a, tol)
    if h.shape[0] == 0:
        return np.zeros(0)
    if not np.any(h.imag):
        return np.linalg.eigvalsh(h.real)
    return np.linalg.eigvalsh(h)


def jacobi_eigh(a, tol=1e-14, max_sweeps=60):
    """Cyclic Jacobi eigensolver for complex Hermitian matrices.

    Sweeps the strict upper triangle row by row in a fixed order, so the
    result is bit-reproducible.  Returns ascending eigenvalues and the
    accumulated unitary whose columns are the eigenvectors.
    """
    h = _check_hermitian(a, DEFAULT_TOL).copy()
    n = h.shape[0]
    u = np.eye(n, dtype=complex)
    scale = max(fro(h), 1e-300)
    for _ in range(max_sweeps):
        off = math.sqrt(max(fro(h) ** 2 - float(np.sum(np.abs(np.diag(h)) ** 2)), 0.0))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = h[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                phase = apq / mag
                theta = (h[q, q].real - h[p, p].real) / (2.0 * mag)
                if theta == 0.0:
                    t = 1.0
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # R = diag(1, conj(phase)) on (p, q) followed by a real rotation
                rpp, rpq = c, s
                rqp, rqq = -s * np.conj(phase), c * np.conj(phase)
                colp = h[:, p].copy()
                colq = h[:, q].copy()
                h[:, p] = colp * rpp + colq * rqp
                h[:, q] = colp * rpq + colq * rqq
                rowp = h[p, :].copy()
                rowq = h[q, :].copy()
                h[p, :] = np.conj(rpp) * rowp + np.conj(rqp) * rowq
                h[q, :] = np.conj(rpq) * rowp + np.conj(rqq) * rowq
                h[p, q] = 0.0
                h[q, p] = 0.0
                up = u[:, p].copy()
                uq = u[:, q].copy()
                u[:, p] = up * rpp + uq * rqp
                u[:, q] = up * rpq + uq * rqq
    else:
        raise NoConvergence("Jacobi sweeps did not converge")
    w = np.real(np.diag(h))
    order = np.argsort(w, kind="stable")
    return w[order], u[:, order]


def nullspace(a, tol=DEFAULT_TOL):
    """Orthonormal kernel basis of ``a`` as the columns of an ``(n, k)`` array.

    Singular values strictly below ``tol * s_max`` are treated as zero.
    """
    a = as_cmat(a)
    n = a.shape[1]
    if a.size == 0 or not np.any(a):
        return np.eye(n, dtype=complex)
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    rank = int(np.sum(s >= tol * s[0]))
    return np.conj(vh[rank:].T)


def numerical_rank(a, tol=DEFAULT_TOL):
    a = np.asarray(a)
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s >= tol * s[0]))


def solve_lstsq(a, b):
    """Minimum-norm least-squares solution of ``a x = b``.

    Returns ``(x, residual)`` with ``residual = ||a x - b||_F``.
    """
    a = as_cmat(a, "a")
    b = np.asarray(b, dtype=complex)
    squeeze = b.ndim == 1
    if squeeze:
        b = b[:, None]
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(f"incompatible shapes {a.shape} and {b.shape}")
    x, *_ = np.linalg.lstsq(a, b, rcond=None)
    res = fro(a @ x - b)
    return (x[:, 0] if squeeze else x), res


def vec(x):
    """Column-stacking vectorisation."""
    x = np.asarray(x)
    if x.ndim != 2:
        raise DimensionMismatch(f"vec expects a matrix, got shape {x.shape}")
    return x.reshape(-1, order="F")


def unvec(v, rows, cols):
    v = np.asarray(v)
    if v.size != rows * cols:
        raise DimensionMismatch(f"cannot reshape {v.size} entries into {rows}x{cols}")
    return v.reshape((rows, cols), order="F")


def stack_vecs(mats):
    """``(m, d, d)`` matrices -> ``(d*d, m)`` array of their vecs."""
    mats = np.asarray(mats)
    if mats.shape[0] == 0:
        return np.zeros((0, 0), dtype=complex)
    return np.stack([vec(m) for m in mats], axis=1)


def unstack_vecs(cols, d):
    return np.stack([unvec(cols[:, k], d, d) for k in range(cols.shape[1])]) if cols.shape[1] else np.zeros((0, d, d), dtype=complex)


def span_basis(mats, d=None, tol=DEFAULT_TOL):
    """HS-orthonormal basis (``(k, d, d)``) of the span of a list of matrices."""
    mats = np.asarray(mats, dtype=complex)
    if mats.ndim != 3 or mats.shape[0] == 0:
        if d is None:
            raise DimensionMismatch("cannot infer dimension of an empty list")
        return np.zeros((0, d, d), dtype=complex)
    d = mats.shape[1]
    flat = mats.reshape(mats.shape[0], -1).T
    u, s, _ = np.linalg.svd(flat, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((0, d, d), dtype=complex)
    rank = int(np.sum(s >= tol * s[0]))
    return u[:, :rank].T.reshape(rank, d, d)


def gram_schmidt_extend(basis, candidates, tol=DEFAULT_TOL):
    """Extend an HS-orthonormal basis by the candidates that are not in its span.

    Classical Gram-Schmidt applied twice per candidate.  A candidate is
    accepted when its residual norm is at least ``tol`` times the largest
    norm seen so far.
    """
    d = candidates.shape[-1] if len(candidates) else basis.shape[-1]
    q = basis.reshape(basis.shape[0], -1) if len(basis) else np.zeros((0, d * d), dtype=complex)
    scale = max([1.0] + [float(np.linalg.norm(c)) for c in candidates])
    added = 0
    qcur = q
    for c in candidates:
        v = np.asarray(c, dtype=complex).reshape(-1)
        for _ in range(2):
            if qcur.shape[0]:
                v = v - qcur.T @ (np.conj(qcur) @ v)
        nv = np.linalg.norm(v)
        if nv >= tol * scale and nv > 0.0:
            qcur = np.vstack([qcur, (v / nv)[None, :]])
            added += 1
    return qcur.reshape(qcur.shape[0], d, d), added


def coords(basis, x):
    """Coordinates of ``x`` in an HS-orthonormal basis."""
    return np.conj(basis.reshape(basis.shape[0], -1)) @ np.asarray(x).reshape(-1)


def from_coords(basis, c):
    return np.tensordot(c, basis, axes=(0, 0))


def projection_residual(basis, x):
    """Frobenius distance from ``x`` to the span of an orthonormal basis."""
    if len(basis) == 0:
        return fro(x)
    return fro(x - from_coords(basis, coords(basis, x)))


def psd_min_eig(a, tol=DEFAULT_TOL):
    return float(herm_eigvals(a, tol=max(tol, 1e-8))[0]) if len(a) else 0.0


def random_matrix(rng, d, hermitian=False):
    m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    if hermitian:
        m = 0.5 * (m + dagger(m))
    return m


def random_unit_vector(rng, d):
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)
