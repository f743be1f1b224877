"""Search for constant controls that make a target invariant and GAS.

The invariance residual tilde L_P(u) is affine in u, so the invariance set
C0 is an affine set intersected with the admissible box-union.  Stabilizing
controls are then found by seeded sampling in C0 with back-tracking: every
time the DID stalls at a Hamiltonian split with zero coupling, that coupling
(affine in u, written in the stalled step's bases) is recorded and later
samples are required to avoid its zero set.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .blocks import Feasibility, full_basis, openloop_feasibility, split, tilde_lp, zero_tolerance
from .config import get_tolerances
from .did import DidResult, compute_did
from .model import Control, ModelError, QdsModel, Subspace, hamiltonian_at
from .spectral import full_generator, gas_verdict, steady_states

CLIP = 10.0  # stand-in bound for infinite interval ends when sampling
GLOBAL_CAP = 10_000

STABILIZED = "Stabilized"
INFEASIBLE = "Infeasible"
PRACTICAL = "Practical"


class Blocked(ValueError):
    def __init__(self, feasibility: Feasibility):
        super().__init__(feasibility.reason)
        self.feasibility = feasibility


class IterationCapExceeded(RuntimeError):
    def __init__(self, message: str, progress: dict):
        super().__init__(message)
        self.progress = progress


class NoStabilizingSet(ValueError):
    pass


class NonUniqueSteadyState(ValueError):
    def __init__(self, message: str, outcome: "SynthesisOutcome"):
        super().__init__(message)
        self.outcome = outcome


# ---------------------------------------------------------------- control sets

def _merge(intervals) -> tuple[tuple[float, float], ...]:
    iv = sorted((float(a), float(b)) for a, b in intervals)
    if not iv:
        raise ModelError("a control axis needs at least one interval")
    for a, b in iv:
        if a > b or math.isnan(a) or math.isnan(b):
            raise ModelError(f"bad interval [{a}, {b}]")
    out = [iv[0]]
    for a, b in iv[1:]:
        if a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return tuple(out)


@dataclass(frozen=True)
class ControlSet:
    """Per-axis unions of closed intervals; a degenerate interval is a single value."""

    names: tuple[str, ...]
    axes: tuple[tuple[tuple[float, float], ...], ...]

    def __post_init__(self):
        if len(self.names) != len(self.axes):
            raise ModelError("names and axes differ in length")
        object.__setattr__(self, "axes", tuple(_merge(a) for a in self.axes))

    @classmethod
    def from_model(cls, model: QdsModel) -> "ControlSet":
        return cls(tuple(c.name for c in model.controls), tuple(c.ranges for c in model.controls))

    @classmethod
    def parse(cls, model: QdsModel, specs) -> "ControlSet":
        """Override axes with ``name=piece[,piece...]``; a piece is ``lo:hi`` or a value."""
        axes = {c.name: c.ranges for c in model.controls}
        for spec in specs or ():
            name, _, body = spec.partition("=")
            name = name.strip()
            if name not in axes:
                raise ModelError(f"unknown control {name!r}; model has {list(axes)}")
            pieces = []
            for piece in body.split(","):
                piece = piece.strip()
                if ":" in piece:
                    lo, hi = piece.split(":", 1)
                    pieces.append((float(lo), float(hi)))
                elif piece:
                    pieces.append((float(piece), float(piece)))
            axes[name] = tuple(pieces)
        return cls(tuple(axes), tuple(axes.values()))

    @property
    def dim(self) -> int:
        return len(self.names)

    def axis_finite(self, j: int) -> bool:
        return all(a == b for a, b in self.axes[j])

    @property
    def finite(self) -> bool:
        return all(self.axis_finite(j) for j in range(self.dim))

    @property
    def bounded(self) -> bool:
        return all(math.isfinite(a[0][0]) and math.isfinite(a[-1][1]) for a in self.axes)

    def contains(self, u, atol: float = 1e-9) -> bool:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if u.shape != (self.dim,):
            return False
        return all(any(a - atol <= x <= b + atol for a, b in ax) for x, ax in zip(u, self.axes))

    def enumerate(self):
        if not self.finite:
            raise ValueError("only finite control sets can be enumerated")
        pts = [sorted({a for a, _ in ax}) for ax in self.axes]
        for combo in itertools.product(*pts):
            yield np.array(combo, dtype=float)

    def fixed(self) -> dict[int, float]:
        """Axes pinned to a single value."""
        return {j: ax[0][0] for j, ax in enumerate(self.axes) if len(ax) == 1 and ax[0][0] == ax[0][1]}

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        out = np.empty(self.dim)
        for j, ax in enumerate(self.axes):
            clipped = [(max(a, -CLIP), min(b, CLIP)) if (math.isinf(a) or math.isinf(b)) else (a, b)
                       for a, b in ax]
            clipped = [(a, b) for a, b in clipped if a <= b] or [(0.0, 0.0)]
            lengths = np.array([b - a for a, b in clipped])
            if lengths.sum() > 0:
                k = rng.choice(len(clipped), p=lengths / lengths.sum())
            else:
                k = rng.integers(len(clipped))
            a, b = clipped[k]
            out[j] = a if a == b else rng.uniform(a, b)
        return out


# ------------------------------------------------------------- invariance set

def _affine_parts(fn, nu: int):
    """Decompose an affine matrix function u -> F(u) into (F0, [F_j])."""
    f0 = fn(np.zeros(nu))
    return f0, [fn(np.eye(nu)[j]) - f0 for j in range(nu)]


def _real_system(f0, fj):
    a = np.column_stack([np.concatenate([f.real.ravel(), f.imag.ravel()]) for f in fj]) if fj else \
        np.zeros((2 * f0.size, 0))
    b = -np.concatenate([f0.real.ravel(), f0.imag.ravel()])
    return a, b


@dataclass(frozen=True)
class InvarianceSet:
    particular: np.ndarray | None
    directions: np.ndarray  # nu x k orthonormal null-space directions
    residual: float
    controls: ControlSet
    empty: bool
    reason: str = ""

    def project(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        d = self.directions
        return self.particular + d @ (d.T @ (u - self.particular))

    def contains(self, u, atol: float = 1e-7) -> bool:
        if self.empty:
            return False
        u = np.asarray(u, dtype=float)
        on_set = np.linalg.norm(self.project(u) - u) <= atol * max(1.0, np.linalg.norm(u))
        return on_set and self.controls.contains(u)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.project(self.controls.sample(rng))


def _solve_affine(f0, fj, fixed: dict[int, float], nu: int, tol: float):
    a, b = _real_system(f0, fj)
    for j, v in fixed.items():
        row = np.zeros((1, nu))
        row[0, j] = 1.0
        a = np.vstack([a, row])
        b = np.concatenate([b, [v]])
    if nu == 0:
        return np.zeros(0), np.zeros((0, 0)), float(np.linalg.norm(b))
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    resid = float(np.linalg.norm(a @ sol - b))
    _, s, vt = np.linalg.svd(a, full_matrices=True)
    rank = int(np.sum(s > max(tol, 1e-12 * (s[0] if s.size else 0.0))))
    return sol, vt[rank:].T.copy(), resid


def invariance_set(model: QdsModel, target: Subspace, c: ControlSet | None = None) -> InvarianceSet:
    """C0 = {u in c : tilde L_P(u) = 0} as particular solution + null-space directions."""
    c = c or ControlSet.from_model(model)
    feas = openloop_feasibility(model, target)
    if feas.blocked and not feas.invariance_reachable:
        raise Blocked(feas)
    nu = model.n_controls
    tol = zero_tolerance(model)
    f0, fj = _affine_parts(lambda u: tilde_lp(model, u, target), nu)
    fixed = c.fixed()
    sol, dirs, resid = _solve_affine(f0, fj, fixed, nu, tol)
    if resid > tol:
        return InvarianceSet(None, np.zeros((nu, 0)), resid, c, True,
                             f"tilde L_P(u) = 0 has no solution in the admissible set "
                             f"(least-squares residual {resid:.3g})")
    inv = InvarianceSet(sol, dirs, resid, c, False)
    if dirs.shape[1] == 0 and not c.contains(sol):
        return InvarianceSet(sol, dirs, resid, c, True, "the invariance point lies outside c")
    if dirs.shape[1] > 0 and not c.contains(sol):
        # look for at least one admissible point on the affine set
        rng = np.random.default_rng(0)
        if not any(c.contains(inv.sample(rng)) for _ in range(200 * max(1, nu))):
            return InvarianceSet(sol, dirs, resid, c, True,
                                 "the affine invariance set misses the admissible set")
    return inv


# ---------------------------------------------------------------- synthesis

@dataclass
class SynthesisOutcome:
    status: str
    u: np.ndarray | None = None
    did: DidResult | None = None
    reason: str = ""
    delta_h: np.ndarray | None = None
    bound: float | None = None
    steady: np.ndarray | None = None
    fidelity: float | None = None
    samples: list = field(default_factory=list)
    details: dict = field(default_factory=dict)


def _stall_coupling(model: QdsModel, did: DidResult):
    """Affine map u -> -i H_P - 1/2 sum L_Q^dag L_R in the stalled step's bases."""
    s_b = did.total_basis[:, : did.total_basis.shape[1] - did.invariant_remainder.shape[1]]
    r_b = did.invariant_remainder
    sd, rd = s_b.conj().T, r_b.conj().T
    noise = sum((-0.5 * (rd @ l @ s_b).conj().T @ (rd @ l @ r_b) for l in model.lindblads),
                np.zeros((s_b.shape[1], r_b.shape[1]), complex))

    def g(u):
        return -1j * (sd @ hamiltonian_at(model, u) @ r_b) + noise

    return g


def synthesize(model: QdsModel, target: Subspace | None = None, c: ControlSet | None = None,
               seed: int = 0, max_runs: int = GLOBAL_CAP) -> SynthesisOutcome:
    target = target or model.target
    if target is None:
        raise ModelError("no target subspace given")
    c = c or ControlSet.from_model(model)
    feas = openloop_feasibility(model, target)
    if feas.blocked:
        return SynthesisOutcome(INFEASIBLE, reason=f"Blocked: {feas.reason}")
    inv = invariance_set(model, target, c)
    if inv.empty:
        return SynthesisOutcome(INFEASIBLE, reason=inv.reason)
    tol = zero_tolerance(model)
    nu = model.n_controls
    samples: list[np.ndarray] = []

    if c.finite:
        # exhaustive over the admissible grid points that enforce invariance
        tried = 0
        for u in c.enumerate():
            if not inv.contains(u):
                continue
            tried += 1
            samples.append(u)
            did = compute_did(model, u, target, check=False)
            if did.success:
                return SynthesisOutcome(STABILIZED, u, did, samples=samples)
        return SynthesisOutcome(INFEASIBLE, reason=f"exhaustive search over {tried} invariant "
                                "control values found no GAS choice", samples=samples)

    rng = np.random.default_rng(seed)
    avoid: list = []  # affine couplings that must stay nonzero
    level_cap = 10 * max(1, nu) * model.dim
    runs = 0
    while True:
        u = None
        for _ in range(level_cap):
            cand = inv.sample(rng)
            if not c.contains(cand):
                continue
            if all(np.linalg.norm(g(cand)) > tol for g in avoid):
                u = cand
                break
        if u is None:
            raise IterationCapExceeded(
                f"no admissible sample after {level_cap} draws at back-track level {len(avoid)}",
                {"runs": runs, "constraints": len(avoid), "samples": samples})
        samples.append(u)
        did = compute_did(model, u, target, check=False)
        runs += 1
        if did.success:
            return SynthesisOutcome(STABILIZED, u, did, samples=samples,
                                    details={"runs": runs, "constraints": len(avoid)})
        g = _stall_coupling(model, did)
        # zero on the whole (affine hull of the) restricted set -> C^(j) is empty
        probes = [inv.particular] + [inv.particular + d for d in inv.directions.T]
        if all(np.linalg.norm(g(p)) <= tol for p in probes):
            return SynthesisOutcome(
                INFEASIBLE, u, did, samples=samples,
                reason=(f"at DID step {did.failed_at} the coupling vanishes for every admissible "
                        "invariance-enforcing control: a piece of the complement stays invariant"))
        avoid.append(g)
        if runs >= max_runs:
            raise IterationCapExceeded(f"global cap of {max_runs} DID runs reached",
                                       {"runs": runs, "constraints": len(avoid), "samples": samples})


# ---------------------------------------------------------- practical version

def corrected_model(model: QdsModel, target: Subspace) -> QdsModel:
    """Model with H + Delta H, Delta H cancelling the invariance residual for every u.

    The corrected off-diagonal block is -(i/2) sum L_S^dag L_P, the same for all
    controls, so controls are compressed to their block-diagonal parts.
    """
    basis = full_basis(target)
    m = target.dim
    bd = basis.conj().T

    def block_diag(x):
        y = bd @ x @ basis
        y[:m, m:] = 0
        y[m:, :m] = 0
        return y

    hp = np.zeros((m, model.dim - m), complex)
    for l in model.lindblads:
        b = split(l, basis, m)
        hp = hp - 0.5j * b.xs.conj().T @ b.xp
    h0 = block_diag(model.h0)
    h0[:m, m:] = hp
    h0[m:, :m] = hp.conj().T
    h0 = basis @ h0 @ bd
    ctrls = tuple(Control(c.name, basis @ block_diag(c.matrix) @ bd, c.ranges) for c in model.controls)
    return QdsModel(model.dim, 0.5 * (h0 + h0.conj().T), ctrls, model.lindblads, target,
                    model.unit, (model.name or "model") + "_corrected", dict(model.meta))


def delta_h(model: QdsModel, u, target: Subspace) -> np.ndarray:
    """Delta H(u) in the original basis: off-diagonal blocks i tilde L_P and its adjoint."""
    basis = full_basis(target)
    m = target.dim
    ht = 1j * tilde_lp(model, u, target)
    y = np.zeros((model.dim, model.dim), complex)
    y[:m, m:] = ht
    y[m:, :m] = ht.conj().T
    return basis @ y @ basis.conj().T


def _residual_norm(model, u, target) -> float:
    return float(np.linalg.norm(tilde_lp(model, u, target), 2))


def practical_stabilize(model: QdsModel, target: Subspace | None = None,
                        c: ControlSet | None = None, seed: int = 0, starts: int = 6,
                        sweeps: int = 30, rel_step: float = 1e-4) -> SynthesisOutcome:
    target = target or model.target
    c = c or ControlSet.from_model(model)
    feas = openloop_feasibility(model, target)
    if feas.blocked and not feas.invariance_reachable:
        raise Blocked(feas)
    inv = invariance_set(model, target, c)
    if not inv.empty:
        out = synthesize(model, target, c, seed)
        if out.status == STABILIZED:
            out.delta_h = np.zeros((model.dim, model.dim), complex)
            out.bound = 0.0
            return out

    fixed_model = corrected_model(model, target)
    first = synthesize(fixed_model, target, c, seed)
    if first.status != STABILIZED:
        raise NoStabilizingSet(f"corrected model cannot be stabilized: {first.reason}")

    tol = zero_tolerance(model)

    def in_s(u) -> bool:
        return c.contains(u) and compute_did(fixed_model, u, target, check=False).success

    cache: dict = {}

    def key(u):
        # primary: residual norm; ties broken by the corrected model's speed
        k = tuple(np.round(u, 12))
        if k not in cache:
            cache[k] = (_residual_norm(model, u, target),
                        gas_verdict(fixed_model, u, target).lambda0)
        return cache[k]

    def better(ka, kb) -> bool:
        if ka[0] < kb[0] - tol:
            return True
        return abs(ka[0] - kb[0]) <= tol and ka[1] < kb[1] - 1e-12

    rng = np.random.default_rng(seed)
    u0 = np.asarray(first.u, float)
    best_u, best_k = u0, key(u0)
    history = [best_k[0]]
    starts_u = [u0]
    tries = 0
    while len(starts_u) < starts and tries < 50 * starts and model.n_controls:
        tries += 1
        cand = c.sample(rng)
        if in_s(cand):
            starts_u.append(cand)
    span = np.array([min(ax[-1][1], CLIP * 100) - max(ax[0][0], -CLIP * 100) for ax in c.axes]) \
        if model.n_controls else np.zeros(0)
    for u in starts_u:
        u = np.array(u, float)
        k = key(u)
        step = np.where(span > 0, span / 8.0, 0.0)
        for _ in range(sweeps):
            moved = False
            for j in range(model.n_controls):
                if step[j] == 0:
                    continue
                for sgn in (1.0, -1.0):
                    trial = u.copy()
                    trial[j] += sgn * step[j]
                    if not in_s(trial):
                        continue
                    kt = key(trial)
                    if better(kt, k):
                        u, k, moved = trial, kt, True
                        break
            if not moved:
                step = step / 2
                if np.all(step < rel_step * np.maximum(span, 1.0)):
                    break
        if better(k, best_k):
            best_u, best_k = u, k
        history.append(best_k[0])

    u_star = best_u
    dh = delta_h(model, u_star, target)
    bound = 2.0 * _residual_norm(model, u_star, target)
    ss = steady_states(model, u_star)
    ev = np.linalg.eigvals(full_generator(fixed_model, u_star))
    nz = np.abs(ev)[np.abs(ev) > get_tolerances().zero_disc * max(1.0, np.abs(ev).max())]
    gap = float(nz.min()) if nz.size else 0.0
    details = {"bound_vs_gap": {"bound": bound, "gap": gap}, "lambda0_corrected": best_k[1],
               "best_so_far": history, "kernel_dim": ss.kernel_dim,
               "did_corrected": compute_did(fixed_model, u_star, target, check=False)}
    rho = ss.states[0] if ss.states else None
    fid = float(np.trace(target.projector @ rho).real) if rho is not None else None
    out = SynthesisOutcome(PRACTICAL, u_star, details["did_corrected"], "", dh, bound, rho, fid,
                           first.samples, details)
    if not ss.unique:
        raise NonUniqueSteadyState(
            f"true generator has a {ss.kernel_dim}-dimensional kernel at u*; "
            f"bound {bound:.3g} vs spectral gap {gap:.3g}", out)
    return out
