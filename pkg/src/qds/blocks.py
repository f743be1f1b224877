"""Block partitioning against H = H_S (+) H_R, invariance tests and open-loop feasibility."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import get_tolerances
from .linalg import orthonormal_complement
from .model import ControlVector, ModelError, QdsModel, Subspace, hamiltonian_at


@dataclass(frozen=True)
class BlockPartition:
    xs: np.ndarray
    xp: np.ndarray
    xq: np.ndarray
    xr: np.ndarray

    def assemble(self) -> np.ndarray:
        return np.block([[self.xs, self.xp], [self.xq, self.xr]])


@dataclass(frozen=True)
class InvarianceReport:
    invariant: bool
    # Frobenius norms of the noise blocks that must vanish (L_Q for the
    # S-test, L_P for the R-test)
    lq_norms: list[float]
    residual_norm: float
    witness: np.ndarray | None = None
    tolerance: float = 0.0


@dataclass(frozen=True)
class Feasibility:
    kind: str  # "GasPossible" | "InvariancePossible" | "Blocked"
    reason: str = ""
    invariance_reachable: bool = True

    @property
    def blocked(self) -> bool:
        return self.kind == "Blocked"


def zero_tolerance(model: QdsModel) -> float:
    return get_tolerances().zero_block * max(1.0, model.scale)


def full_basis(s: Subspace, complement: np.ndarray | None = None) -> np.ndarray:
    """Unitary [basis(S) | basis(S-perp)] with the canonical completion by default."""
    comp = orthonormal_complement(s.basis) if complement is None else np.asarray(complement, complex)
    u = np.hstack([s.basis, comp])
    if u.shape[0] != u.shape[1]:
        raise ModelError("subspace and complement do not span the space")
    if np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])) > 1e-8:
        raise ModelError("complement is not an orthonormal completion")
    return u


def split(x: np.ndarray, basis: np.ndarray, m: int) -> BlockPartition:
    y = basis.conj().T @ x @ basis
    return BlockPartition(y[:m, :m], y[:m, m:], y[m:, :m], y[m:, m:])


def partition(matrix, s: Subspace, complement: np.ndarray | None = None) -> BlockPartition:
    x = np.asarray(matrix, dtype=complex)
    if x.shape != (s.ambient, s.ambient):
        raise ModelError(f"matrix shape {x.shape} does not match subspace ambient dimension {s.ambient}")
    return split(x, full_basis(s, complement), s.dim)


def _blocks(model: QdsModel, u, s: Subspace, complement=None):
    if s.ambient != model.dim:
        raise ModelError("subspace dimension does not match the model")
    basis = full_basis(s, complement)
    h = split(hamiltonian_at(model, u), basis, s.dim)
    ls = [split(l, basis, s.dim) for l in model.lindblads]
    return h, ls


def tilde_lp(model: QdsModel, u: ControlVector | None, s: Subspace,
             complement: np.ndarray | None = None) -> np.ndarray:
    """S-invariance residual i H_P - 1/2 sum_k L_{S,k}^dag L_{P,k} (m x (n-m))."""
    h, ls = _blocks(model, u, s, complement)
    out = 1j * h.xp
    for b in ls:
        out = out - 0.5 * b.xs.conj().T @ b.xp
    return out


def r_residual(model: QdsModel, u: ControlVector | None, s: Subspace,
               complement: np.ndarray | None = None) -> np.ndarray:
    """-i H_P - 1/2 sum_k L_{Q,k}^dag L_{R,k}; vanishes iff the R-side coupling is
    compatible with invariance of H_R (given all L_P = 0)."""
    h, ls = _blocks(model, u, s, complement)
    out = -1j * h.xp
    for b in ls:
        out = out - 0.5 * b.xq.conj().T @ b.xr
    return out


def check_s_invariance(model: QdsModel, u: ControlVector | None, s: Subspace,
                       complement: np.ndarray | None = None) -> InvarianceReport:
    h, ls = _blocks(model, u, s, complement)
    tol = zero_tolerance(model)
    lq = [float(np.linalg.norm(b.xq)) for b in ls]
    resid = 1j * h.xp
    for b in ls:
        resid = resid - 0.5 * b.xs.conj().T @ b.xp
    rnorm = float(np.linalg.norm(resid))
    ok = rnorm <= tol and all(x <= tol for x in lq)
    witness = None
    if not ok:
        witness = resid if rnorm > tol else ls[int(np.argmax(lq))].xq
    return InvarianceReport(ok, lq, rnorm, witness, tol)


def check_r_invariance(model: QdsModel, u: ControlVector | None, s: Subspace,
                       complement: np.ndarray | None = None) -> InvarianceReport:
    """Invariance of the complement H_R (the dual test)."""
    h, ls = _blocks(model, u, s, complement)
    tol = zero_tolerance(model)
    lp = [float(np.linalg.norm(b.xp)) for b in ls]
    resid = 1j * h.xp
    for b in ls:
        resid = resid + 0.5 * b.xq.conj().T @ b.xr
    rnorm = float(np.linalg.norm(resid))
    ok = rnorm <= tol and all(x <= tol for x in lp)
    witness = None
    if not ok:
        witness = resid if rnorm > tol else ls[int(np.argmax(lp))].xp
    return InvarianceReport(ok, lp, rnorm, witness, tol)


def openloop_feasibility(model: QdsModel, s: Subspace) -> Feasibility:
    """What time-independent Hamiltonian control can achieve for target ``s``.

    The noise blocks do not depend on the controls, so the verdict is a
    property of the Lindblad operators alone.
    """
    if s.dim == model.dim:
        return Feasibility("InvariancePossible", "target is the whole space")
    basis = full_basis(s)
    tol = zero_tolerance(model)
    blocks = [split(l, basis, s.dim) for l in model.lindblads]
    for k, b in enumerate(blocks):
        if np.linalg.norm(b.xq) > tol:
            return Feasibility("Blocked", f"L_Q of lindblad {k} is nonzero: invariance "
                               "cannot be enforced by Hamiltonian control", False)
    if all(np.linalg.norm(b.xp) <= tol for b in blocks):
        return Feasibility("Blocked", "all L_P blocks vanish: the complement would stay "
                           "invariant, so the target cannot be attractive", True)
    return Feasibility("GasPossible")
