"""Dissipation-induced decomposition (DID) of the Hilbert space.

Starting from an invariant target, the complement is peeled into an ordered
chain of basins.  Each basin is split off either by the joint kernel of the
noise blocks L_P (a noise link into what has already been collected) or, when
all of those vanish, by the kernel of the Hamiltonian-driven coupling
-i H_P - 1/2 sum_k L_Q^dag L_R.  The chain is complete exactly when the target
is globally asymptotically stable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blocks import InvarianceReport, check_s_invariance, zero_tolerance
from .config import get_tolerances
from .linalg import canonical_basis, kernel, orthonormal_complement
from .model import ControlVector, QdsModel, Subspace, hamiltonian_at

NOISE = "NoiseKernel"
HAMILTONIAN = "HamiltonianKernel"


class NotInvariant(ValueError):
    def __init__(self, report: InvarianceReport):
        super().__init__(
            f"target is not invariant (residual {report.residual_norm:.3g}, "
            f"max |L_Q| {max(report.lq_norms, default=0.0):.3g})"
        )
        self.report = report


@dataclass(frozen=True)
class DidStep:
    index: int  # j + 1, i.e. the basin label T^(index)
    basin: np.ndarray  # n x d_j, orthonormal columns
    split_kind: str  # NOISE or HAMILTONIAN
    final: bool  # True when this basin exhausted the remaining space
    evidence: tuple[np.ndarray, ...]  # L_P blocks (noise) or the coupling matrix (Hamiltonian)
    collected: np.ndarray  # basis of H_S^(j) before this step
    remainder: np.ndarray  # basis of H_R^(j) before this step

    @property
    def dim(self) -> int:
        return self.basin.shape[1]


@dataclass(frozen=True)
class DidResult:
    success: bool
    steps: tuple[DidStep, ...]
    total_basis: np.ndarray
    target_dim: int
    failure_reason: str | None = None
    # on failure: the invariant piece of the complement that stopped the chain
    invariant_remainder: np.ndarray | None = None
    failed_at: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def dims(self) -> list[int]:
        return [s.dim for s in self.steps]

    @property
    def block_sizes(self) -> list[int]:
        sizes = [self.target_dim, *self.dims]
        if not self.success and self.invariant_remainder is not None:
            sizes.append(self.invariant_remainder.shape[1])
        return sizes

    @property
    def kinds(self) -> list[str]:
        return [s.split_kind for s in self.steps]


def _blocks_at(x: np.ndarray, s_basis: np.ndarray, r_basis: np.ndarray):
    """(X_S, X_P, X_Q, X_R) of ``x`` against the pair of orthonormal bases."""
    sd = s_basis.conj().T
    rd = r_basis.conj().T
    return sd @ x @ s_basis, sd @ x @ r_basis, rd @ x @ s_basis, rd @ x @ r_basis


def compute_did(model: QdsModel, u: ControlVector | None, target: Subspace,
                check: bool = True) -> DidResult:
    """Run the decomposition for an invariant ``target`` at controls ``u``."""
    if check:
        report = check_s_invariance(model, u, target)
        if not report.invariant:
            raise NotInvariant(report)
    tol = zero_tolerance(model)
    eps = get_tolerances().kernel_eps
    h = hamiltonian_at(model, u)
    ls = model.lindblads
    n = model.dim
    s_basis = np.array(target.basis)
    r_basis = orthonormal_complement(s_basis)
    steps: list[DidStep] = []
    j = 0
    while r_basis.shape[1] > 0:
        r = r_basis.shape[1]
        lps = [s_basis.conj().T @ l @ r_basis for l in ls]
        if lps:
            k_local = kernel(np.vstack(lps), tol, eps)
        else:
            k_local = np.eye(r, dtype=complex)
        if k_local.shape[1] < r:
            kind = NOISE
            evidence = tuple(lps)
        else:
            _, hp, _, _ = _blocks_at(h, s_basis, r_basis)
            coupling = -1j * hp
            for l in ls:
                _, _, lq, lr = _blocks_at(l, s_basis, r_basis)
                coupling = coupling - 0.5 * lq.conj().T @ lr
            if np.linalg.norm(coupling) <= tol:
                return DidResult(
                    success=False,
                    steps=tuple(steps),
                    total_basis=np.hstack([s_basis, r_basis]),
                    target_dim=target.dim,
                    failure_reason=(
                        f"step {j}: all L_P vanish and the Hamiltonian coupling is zero; "
                        f"a {r}-dimensional piece of the complement is invariant"
                    ),
                    invariant_remainder=r_basis,
                    failed_at=j,
                    meta={"lindblads": ls},
                )
            k_local = kernel(coupling, tol, eps)
            kind = HAMILTONIAN
            evidence = (coupling,)
        if k_local.shape[1] == 0:
            basin = r_basis
            new_r = np.zeros((n, 0), dtype=complex)
        else:
            new_r = canonical_basis(r_basis @ k_local)
            t_local = orthonormal_complement(k_local)
            basin = canonical_basis(r_basis @ t_local)
        steps.append(DidStep(j + 1, basin, kind, new_r.shape[1] == 0, evidence,
                             s_basis, r_basis))
        s_basis = np.hstack([s_basis, basin])
        r_basis = new_r
        j += 1
    return DidResult(True, tuple(steps), s_basis, target.dim, meta={"lindblads": ls})


@dataclass(frozen=True)
class DidTransform:
    hamiltonian: np.ndarray
    lindblads: tuple[np.ndarray, ...]
    block_sizes: list[int]

    def block(self, x: np.ndarray, a: int, b: int) -> np.ndarray:
        edges = np.concatenate([[0], np.cumsum(self.block_sizes)])
        return x[edges[a]:edges[a + 1], edges[b]:edges[b + 1]]


def _check_chain(mats, sizes: list[int], tol: float) -> None:
    edges = np.concatenate([[0], np.cumsum(sizes)])
    nb = len(sizes)
    for k, m in enumerate(mats):
        for a in range(nb):
            for b in range(a + 2, nb):
                blk = m[edges[a]:edges[a + 1], edges[b]:edges[b + 1]]
                if np.linalg.norm(blk) > tol:
                    raise AssertionError(
                        f"lindblad {k} has a nonzero block at ({a}, {b}) above the DID chain"
                    )


def did_transform(model: QdsModel, u: ControlVector | None, did: DidResult) -> DidTransform:
    """H(u) and every L_k written in the DID-ordered basis.

    The block structure of the noise operators (only the first super-diagonal
    of blocks may be nonzero above the diagonal) is verified, not assumed.
    """
    ub = did.total_basis
    ud = ub.conj().T
    h = ud @ hamiltonian_at(model, u) @ ub
    ls = tuple(ud @ l @ ub for l in model.lindblads)
    sizes = did.block_sizes
    _check_chain(ls, sizes, zero_tolerance(model) * 10)
    return DidTransform(h, ls, sizes)


def dcm(model: QdsModel, u: ControlVector | None, did: DidResult) -> tuple[np.ndarray, list[int]]:
    """Dynamical connection matrix H + sum_k L_k in the DID basis, with block sizes."""
    ub = did.total_basis
    c = hamiltonian_at(model, u) + sum(model.lindblads, np.zeros((model.dim, model.dim), complex))
    return ub.conj().T @ c @ ub, did.block_sizes
