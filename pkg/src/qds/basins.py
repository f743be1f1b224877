"""Basin taxonomy of a DID chain, per-basin transfer rates and the bottleneck.

For basin T_i the blocks are read against what the DID had collected before
it (S^(i-1) = S + T_1 + ... + T_{i-1}):

* hat L_P  = <S^(i-1)| L |T_i>        (noise flowing out of T_i)
* L_Q      = <T_i| L |T_{i-1}>        (noise flowing back into T_i from its predecessor)
* residual = i H_P - 1/2 sum L_S^dag L_P restricted to the T_i columns
* H_P      = <S^(i-1)| H |T_i>        (Hamiltonian coupling used for rate_h)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .blocks import zero_tolerance
from .did import DidResult
from .model import ControlVector, QdsModel, hamiltonian_at

TRANSITION = "Transition"
MIXING1 = "Mixing1"
MIXING2 = "Mixing2"
MIXING3 = "Mixing3"
CIRCULATION = "Circulation"

NOISE_KINDS = (TRANSITION, MIXING1, MIXING2)
HAMILTONIAN_KINDS = (MIXING3, CIRCULATION)

ARCCOS_INV_E = math.acos(math.exp(-1.0))


class DidFailed(ValueError):
    pass


class NotApplicable(ValueError):
    pass


@dataclass(frozen=True)
class BasinClass:
    index: int
    kind: str
    rate_l: float | None = None
    rate_h: float | None = None
    singulars: tuple[float, ...] = ()
    flags: tuple[str, ...] = ()
    norms: dict = field(default_factory=dict, compare=False)

    @property
    def rate(self) -> float:
        return self.rate_l if self.kind in NOISE_KINDS else self.rate_h


@dataclass(frozen=True)
class BottleneckReport:
    gamma_min: float
    basin_index: int
    limited_by: str  # "Dissipation" | "Hamiltonian"
    note: str = ""
    # slowest noise-driven rate; Hamiltonian control cannot push past it
    dissipative_limit: float | None = None
    dissipative_index: int | None = None


def _require(did: DidResult) -> None:
    if not did.success:
        raise DidFailed(did.failure_reason or "DID did not complete")


def _pair(did: DidResult, i: int):
    """(collected S^(i-1), predecessor T_{i-1} (S when i = 1), basin T_i)."""
    if not 1 <= i <= len(did.steps):
        raise IndexError(f"basin index {i} out of range 1..{len(did.steps)}")
    step = did.steps[i - 1]
    prev = did.total_basis[:, : did.target_dim] if i == 1 else did.steps[i - 2].basin
    return step.collected, prev, step.basin


def _hat_lp(did: DidResult, i: int, lindblads) -> list[np.ndarray]:
    c, _, t = _pair(did, i)
    return [c.conj().T @ l @ t for l in lindblads]


def basin_blocks(model: QdsModel, u: ControlVector | None, did: DidResult, i: int) -> dict:
    c, prev, t = _pair(did, i)
    cd = c.conj().T
    h = hamiltonian_at(model, u)
    lps = [cd @ l @ t for l in model.lindblads]
    lqs = [t.conj().T @ l @ prev for l in model.lindblads]
    resid = 1j * (cd @ h @ t)
    for l, lp in zip(model.lindblads, lps):
        resid = resid - 0.5 * (cd @ l @ c).conj().T @ lp
    return {"lp": lps, "lq": lqs, "residual": resid, "hp": cd @ h @ t}


def dissipative_rate(did: DidResult, i: int, model: QdsModel | None = None) -> float:
    """Worst-case exit rate: min eigenvalue of sum_k hat L_P^dag hat L_P."""
    lindblads = did.meta.get("lindblads") if model is None else model.lindblads
    if lindblads is None:
        raise ValueError("dissipative_rate needs the model (or did.meta['lindblads'])")
    lps = _hat_lp(did, i, lindblads)
    tol = zero_tolerance(model) if model is not None else 1e-9
    if all(np.linalg.norm(lp) <= tol for lp in lps):
        raise NotApplicable(f"basin {i} has no noise link (all hat L_P vanish)")
    g = sum(lp.conj().T @ lp for lp in lps)
    return float(max(np.linalg.eigvalsh(g).min(), 0.0))


def hamiltonian_rate(model: QdsModel, u: ControlVector | None, did: DidResult, i: int,
                     _kind: str | None = None) -> tuple[float, tuple[float, ...]]:
    """s_hat / arccos(1/e), with s_hat the smallest of the d_i singular values of H_P."""
    kind = _kind or classify_one(model, u, did, i).kind
    if kind not in HAMILTONIAN_KINDS:
        raise NotApplicable(f"basin {i} is {kind}; the Hamiltonian estimate applies to "
                            "Mixing3/Circulation basins")
    hp = basin_blocks(model, u, did, i)["hp"]
    d = hp.shape[1]
    sv = np.linalg.svd(hp, compute_uv=False)
    sv = np.concatenate([sv, np.zeros(max(0, d - sv.size))])[:d]
    sing = tuple(float(s) for s in sorted(sv, reverse=True))
    s_hat = min(sing) if sing else 0.0
    if s_hat <= zero_tolerance(model):
        s_hat = 0.0
    return s_hat / ARCCOS_INV_E, sing


def classify_one(model: QdsModel, u: ControlVector | None, did: DidResult, i: int) -> BasinClass:
    _require(did)
    tol = zero_tolerance(model)
    b = basin_blocks(model, u, did, i)
    lp_n = max((float(np.linalg.norm(x)) for x in b["lp"]), default=0.0)
    lq_n = max((float(np.linalg.norm(x)) for x in b["lq"]), default=0.0)
    res_n = float(np.linalg.norm(b["residual"]))
    has_lp, has_lq = lp_n > tol, lq_n > tol
    if has_lp and not has_lq:
        kind = TRANSITION if res_n <= tol else MIXING1
    elif has_lp:
        kind = MIXING2
    elif has_lq:
        kind = MIXING3
    else:
        kind = CIRCULATION
    norms = {"lp": lp_n, "lq": lq_n, "residual": res_n}
    if kind in NOISE_KINDS:
        g = sum(x.conj().T @ x for x in b["lp"])
        rate = float(max(np.linalg.eigvalsh(g).min(), 0.0))
        return BasinClass(i, kind, rate_l=rate, norms=norms)
    rate, sing = hamiltonian_rate(model, u, did, i, _kind=kind)
    flags = ("zero_hp",) if rate == 0.0 else ()
    return BasinClass(i, kind, rate_h=rate, singulars=sing, flags=flags, norms=norms)


def classify(model: QdsModel, u: ControlVector | None, did: DidResult) -> list[BasinClass]:
    _require(did)
    return [classify_one(model, u, did, i) for i in range(1, len(did.steps) + 1)]


def bottleneck(model: QdsModel, u: ControlVector | None, did: DidResult,
               classes: list[BasinClass] | None = None) -> BottleneckReport:
    _require(did)
    classes = classes if classes is not None else classify(model, u, did)
    if not classes:
        return BottleneckReport(math.inf, 0, "Dissipation", "target is the whole space")
    best = min(classes, key=lambda c: (c.rate, c.index))
    noise = [c for c in classes if c.kind in NOISE_KINDS]
    slow_noise = min(noise, key=lambda c: (c.rate_l, c.index)) if noise else None
    if best.kind in NOISE_KINDS:
        limited = "Dissipation"
        note = ("noise-limited: Hamiltonian control cannot raise this rate, "
                "it is a fundamental limit")
    else:
        limited = "Hamiltonian"
        note = "Hamiltonian-limited: the coupling H_P sets the slowest transfer"
    return BottleneckReport(
        best.rate, best.index, limited, note,
        slow_noise.rate_l if slow_noise else None,
        slow_noise.index if slow_noise else None,
    )
