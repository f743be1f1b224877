"""Dense linear-algebra helpers shared by the analysis modules.

Vectorization is column-stacking throughout, so that
``vec(X @ Y @ Z) == kron(Z.T, X) @ vec(Y)``.
"""

from __future__ import annotations

import numpy as np

# relative tie window when choosing pivots / phase anchors
_TIE = 1e-9


def vec(matrix) -> np.ndarray:
    """Stack the columns of ``matrix`` into one vector."""
    m = np.asarray(matrix)
    if m.ndim != 2:
        raise ValueError(f"vec expects a 2-d array, got shape {m.shape}")
    return m.reshape(-1, order="F")


def unvec(vector, rows: int, cols: int | None = None) -> np.ndarray:
    cols = rows if cols is None else cols
    v = np.asarray(vector)
    if v.size != rows * cols:
        raise ValueError(f"cannot reshape {v.size} entries into {rows}x{cols}")
    return v.reshape((rows, cols), order="F")


def kron(a, b) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("kron expects two 2-d arrays")
    return np.kron(a, b)


def dagger(x: np.ndarray) -> np.ndarray:
    return x.conj().T


def canonical_phase(columns: np.ndarray) -> np.ndarray:
    """Rotate each column so its first entry of largest modulus is real positive."""
    out = np.array(columns, dtype=complex, copy=True)
    if out.ndim == 1:
        out = out[:, None]
    for j in range(out.shape[1]):
        col = out[:, j]
        mags = np.abs(col)
        top = mags.max()
        if top == 0.0:
            continue
        anchor = int(np.flatnonzero(mags >= top * (1.0 - _TIE))[0])
        out[:, j] = col * (abs(col[anchor]) / col[anchor])
    return out


def canonical_basis(span: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis for the column span of an orthonormal ``span``.

    Pivoted Cholesky of the projector: repeatedly pick the standard basis vector
    with the largest remaining projection (lowest index on ties), orthogonalize,
    then order the chosen vectors by pivot index and fix phases.  The result
    depends only on the subspace, not on the input basis, and is coordinate
    aligned whenever the subspace is.
    """
    q = np.asarray(span, dtype=complex)
    n, d = q.shape
    if d == 0:
        return np.zeros((n, 0), dtype=complex)
    # columns of the projector: P e_i = q q^dag e_i
    cand = q @ q.conj().T
    chosen: list[np.ndarray] = []
    pivots: list[int] = []
    for _ in range(d):
        resid = cand.copy()
        for b in chosen:
            resid -= np.outer(b, b.conj() @ resid)
        norms = np.linalg.norm(resid, axis=0)
        norms[pivots] = -1.0
        top = norms.max()
        idx = int(np.flatnonzero(norms >= top * (1.0 - _TIE))[0])
        v = resid[:, idx] / norms[idx]
        # one re-orthogonalization pass for stability
        for b in chosen:
            v = v - b * (b.conj() @ v)
        v /= np.linalg.norm(v)
        chosen.append(v)
        pivots.append(idx)
    order = np.argsort(pivots, kind="stable")
    basis = np.column_stack([chosen[i] for i in order])
    return canonical_phase(basis)


def orthonormalize(vectors: np.ndarray, rank_tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis for the column span of ``vectors`` (via SVD)."""
    v = np.asarray(vectors, dtype=complex)
    if v.ndim == 1:
        v = v[:, None]
    if v.shape[1] == 0:
        return np.zeros((v.shape[0], 0), dtype=complex)
    u, s, _ = np.linalg.svd(v, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((v.shape[0], 0), dtype=complex)
    keep = s > rank_tol * s[0]
    return u[:, keep]


def orthonormal_complement(basis: np.ndarray) -> np.ndarray:
    """Canonical orthonormal basis of the orthogonal complement of span(basis)."""
    q = np.asarray(basis, dtype=complex)
    n, m = q.shape
    if m == n:
        return np.zeros((n, 0), dtype=complex)
    proj = np.eye(n) - q @ q.conj().T
    # eigenvectors of the complementary projector with eigenvalue ~1
    w, v = np.linalg.eigh(proj)
    span = v[:, w > 0.5]
    if span.shape[1] != n - m:
        raise ValueError("basis is not orthonormal; complement has wrong dimension")
    return canonical_basis(span)


def kernel(matrix: np.ndarray, abs_tol: float, eps: float) -> np.ndarray:
    """Orthonormal basis of the (numerical) right kernel of ``matrix``.

    A singular value counts as zero when it is at most
    ``max(eps * sigma_max, abs_tol)``.  Columns are in the coordinates of the
    matrix's domain; callers canonicalize in global coordinates.
    """
    a = np.asarray(matrix, dtype=complex)
    rows, cols = a.shape
    if cols == 0:
        return np.zeros((0, 0), dtype=complex)
    if rows == 0:
        return np.eye(cols, dtype=complex)
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    smax = s[0] if s.size else 0.0
    thresh = max(eps * smax, abs_tol)
    rank = int(np.sum(s > thresh))
    return vh[rank:].conj().T


def spectral_norm(x: np.ndarray) -> float:
    x = np.asarray(x)
    if x.size == 0:
        return 0.0
    return float(np.linalg.norm(x, 2))
