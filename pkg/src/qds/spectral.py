"""Vectorized generators, the spectral GAS test and asymptotic convergence speed."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocks import check_s_invariance, full_basis, split, zero_tolerance
from .config import get_tolerances
from .did import NotInvariant
from .linalg import kernel, kron, unvec, vec
from .model import ControlVector, QdsModel, Subspace, hamiltonian_at

__all__ = [
    "SpeedReport",
    "SteadyStates",
    "VectorizedGenerator",
    "build_hat_lr",
    "full_generator",
    "gas_verdict",
    "kron",
    "steady_states",
    "vec",
]


@dataclass(frozen=True)
class VectorizedGenerator:
    matrix: np.ndarray
    partition: np.ndarray  # unitary [S | R] basis the blocks were taken in
    target_dim: int


@dataclass(frozen=True)
class SpeedReport:
    lambda0: float
    spectrum: np.ndarray
    gas: bool
    indeterminate: bool = False
    scale: float = 1.0

    @property
    def speed(self) -> float:
        return -self.lambda0


def _superop_terms(h: np.ndarray, ls, lps=()) -> np.ndarray:
    """-i(1 (x) H - H^T (x) 1) + sum L^* (x) L - 1/2 (1 (x) K + K^T (x) 1),
    with K = sum L^dag L plus the extra decay terms ``lps`` (L_P^dag L_P)."""
    d = h.shape[0]
    eye = np.eye(d)
    out = -1j * (kron(eye, h) - kron(h.T, eye))
    k = np.zeros((d, d), dtype=complex)
    for l in ls:
        out = out + kron(l.conj(), l)
        k = k + l.conj().T @ l
    for lp in lps:
        k = k + lp.conj().T @ lp
    out = out - 0.5 * (kron(eye, k) + kron(k.T, eye))
    return out


def build_hat_lr(model: QdsModel, u: ControlVector | None, s: Subspace,
                 complement: np.ndarray | None = None, check: bool = True) -> VectorizedGenerator:
    """Generator of the decoupled R-block dynamics, vec(rho_R)' = hat L_R vec(rho_R)."""
    if check:
        report = check_s_invariance(model, u, s, complement)
        if not report.invariant:
            raise NotInvariant(report)
    basis = full_basis(s, complement)
    m = s.dim
    hr = split(hamiltonian_at(model, u), basis, m).xr
    blocks = [split(l, basis, m) for l in model.lindblads]
    mat = _superop_terms(hr, [b.xr for b in blocks], [b.xp for b in blocks])
    return VectorizedGenerator(mat, basis, m)


def _verdict(spectrum: np.ndarray, floor: float = 1.0) -> SpeedReport:
    """Zero decisions are relative to max(max|lambda|, floor); the floor keeps a
    spectrum made only of round-off from counting as its own scale."""
    tol = get_tolerances()
    if spectrum.size == 0:
        # target is the whole space: nothing to converge
        return SpeedReport(-np.inf, spectrum, True, False, 0.0)
    lam0 = float(np.max(spectrum.real))
    scale = max(float(np.max(np.abs(spectrum))), floor)
    rel = abs(lam0) / scale
    gas = lam0 < -tol.zero_disc * scale
    indeterminate = tol.band_lo <= rel <= tol.band_hi
    return SpeedReport(lam0, spectrum, gas, indeterminate, scale)


def gas_verdict(model: QdsModel, u: ControlVector | None, s: Subspace,
                complement: np.ndarray | None = None) -> SpeedReport:
    """Spectral GAS test and the asymptotic rate lambda0 = max Re sp(hat L_R)."""
    gen = build_hat_lr(model, u, s, complement)
    return _verdict(np.linalg.eigvals(gen.matrix), max(1.0, model.scale))


def full_generator(model: QdsModel, u: ControlVector | None = None) -> np.ndarray:
    """The n^2 x n^2 Lindbladian acting on column-stacked density matrices."""
    return _superop_terms(hamiltonian_at(model, u), model.lindblads)


@dataclass(frozen=True)
class SteadyStates:
    states: list[np.ndarray]
    kernel_dim: int

    @property
    def unique(self) -> bool:
        return self.kernel_dim == 1


def _hermitian_basis(vectors: np.ndarray, n: int) -> list[np.ndarray]:
    """Real-linear Hermitian basis of the span of the given vec'd operators."""
    cands = []
    for col in vectors.T:
        x = unvec(col, n)
        cands.append((x + x.conj().T) / 2)
        cands.append((x - x.conj().T) / 2j)
    if not cands:
        return []
    # real coordinates of each Hermitian candidate
    coords = np.array([np.concatenate([c.real.ravel(), c.imag.ravel()]) for c in cands]).T
    q, s, _ = np.linalg.svd(coords, full_matrices=False)
    rank = int(np.sum(s > 1e-8 * s[0])) if s.size and s[0] > 0 else 0
    out = []
    for j in range(rank):
        re = q[: n * n, j].reshape(n, n)
        im = q[n * n:, j].reshape(n, n)
        x = re + 1j * im
        out.append((x + x.conj().T) / 2)
    return out


def _positive_parts(x: np.ndarray) -> list[np.ndarray]:
    w, v = np.linalg.eigh(x)
    out = []
    for sign in (1.0, -1.0):
        sel = sign * w > 1e-12 * max(1.0, np.abs(w).max())
        if np.any(sel):
            part = (v[:, sel] * (sign * w[sel])) @ v[:, sel].conj().T
            out.append(part / np.trace(part).real)
    return out


def steady_states(model: QdsModel, u: ControlVector | None = None) -> SteadyStates:
    """Stationary states: normalized positive elements of the generator kernel.

    The positive and negative parts of a stationary Hermitian operator are
    stationary too, so each Hermitian kernel element contributes up to two
    states; collection stops once ``kernel_dim`` independent states are found.
    """
    n = model.dim
    gen = full_generator(model, u)
    ker = kernel(gen, zero_tolerance(model), get_tolerances().kernel_eps)
    d = ker.shape[1]
    states: list[np.ndarray] = []
    stacked = np.zeros((n * n, 0), dtype=complex)
    for x in _hermitian_basis(ker, n):
        for rho in _positive_parts(x):
            trial = np.hstack([stacked, vec(rho)[:, None]])
            if np.linalg.matrix_rank(trial, tol=1e-8) > stacked.shape[1]:
                states.append(rho)
                stacked = trial
            if len(states) >= d:
                break
        if len(states) >= d:
            break
    return SteadyStates(states, d)
