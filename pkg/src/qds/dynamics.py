"""Fixed-step RK4 integration of the master equation, used to cross-check verdicts and rates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ControlVector, QdsModel, Subspace, generator_apply, hamiltonian_at

STABILITY = 0.1


class StepTooLarge(ValueError):
    pass


class InsufficientDecay(ValueError):
    pass


@dataclass
class Trajectory:
    times: np.ndarray
    states: list[np.ndarray]
    trace_drift: np.ndarray = field(default_factory=lambda: np.zeros(0))
    min_eig: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self) -> int:
        return len(self.times)


def generator_norm_bound(model: QdsModel, u: ControlVector | None = None) -> float:
    """Cheap upper bound on the generator's operator norm: 2|H| + 2 sum |L|^2."""
    h = hamiltonian_at(model, u)
    nh = np.linalg.norm(h, 2)
    nl = sum(np.linalg.norm(l, 2) ** 2 for l in model.lindblads)
    return float(2 * nh + 2 * nl)


def suggest_dt(model: QdsModel, u: ControlVector | None = None, safety: float = 0.5) -> float:
    g = generator_norm_bound(model, u)
    return safety * STABILITY / g if g > 0 else 0.01


def _hermitize(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x + x.conj().T)


def _rk4_step(f, rho, dt):
    k1 = f(rho)
    k2 = f(rho + 0.5 * dt * k1)
    k3 = f(rho + 0.5 * dt * k2)
    k4 = f(rho + dt * k3)
    return rho + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def evolve(model: QdsModel, u: ControlVector | None, rho0: np.ndarray, t: float,
           steps: int) -> np.ndarray:
    """Propagate by time t (may be negative) in ``steps`` equal RK4 steps, no guard."""
    f = lambda r: generator_apply(model, u, r)  # noqa: E731
    rho = np.asarray(rho0, dtype=complex)
    dt = t / steps
    for _ in range(steps):
        rho = _hermitize(_rk4_step(f, rho, dt))
    return rho


def integrate(model: QdsModel, u: ControlVector | None, rho0, t_max: float, dt: float,
              record_every: int = 1) -> Trajectory:
    if dt <= 0 or t_max <= 0:
        raise ValueError("dt and t_max must be positive")
    g = generator_norm_bound(model, u)
    if dt * g > STABILITY:
        raise StepTooLarge(f"dt*|generator| = {dt * g:.3g} exceeds {STABILITY}; "
                           f"use dt <= {STABILITY / g:.3g}")
    rho = _hermitize(np.asarray(rho0, dtype=complex))
    n_steps = int(np.ceil(t_max / dt - 1e-9))
    f = lambda r: generator_apply(model, u, r)  # noqa: E731
    times, states, drift, mins = [0.0], [rho], [0.0], [float(np.linalg.eigvalsh(rho)[0])]
    tr0 = np.trace(rho).real
    for k in range(1, n_steps + 1):
        rho = _hermitize(_rk4_step(f, rho, dt))
        if k % record_every == 0 or k == n_steps:
            times.append(k * dt)
            states.append(rho)
            drift.append(abs(np.trace(rho).real - tr0))
            mins.append(float(np.linalg.eigvalsh(rho)[0]))
    return Trajectory(np.array(times), states, np.array(drift), np.array(mins))


def r_population(rho: np.ndarray, s: Subspace) -> float:
    """trace(Pi_R rho), the weight outside the target."""
    pr = np.eye(s.ambient) - s.projector
    return float(max(np.trace(pr @ rho).real, 0.0))


def trace_distance_to_set(rho: np.ndarray, s: Subspace) -> float:
    """1/2 |rho - Pi_S rho Pi_S / tr(.)|_1; a stand-in for the distance to the set of
    states supported on S (equals 1 when rho has no weight on S)."""
    p = s.projector
    comp = p @ rho @ p
    w = np.trace(comp).real
    if w <= 1e-15:
        return 1.0
    diff = rho - comp / w
    return float(0.5 * np.abs(np.linalg.eigvalsh(_hermitize(diff))).sum())


def fidelity_to_target(rho: np.ndarray, s: Subspace) -> float:
    return float(np.trace(s.projector @ rho).real)


def fit_decay_rate(traj: Trajectory, s: Subspace, floor: float = 1e-3) -> float:
    """Slope of log r_population over the tail window [t_max/2, t_max]."""
    t = np.asarray(traj.times)
    pops = np.array([r_population(r, s) for r in traj.states])
    if pops[-1] >= floor:
        raise InsufficientDecay(f"r_population is still {pops[-1]:.3g} at t = {t[-1]:.3g}")
    sel = (t >= t[-1] / 2) & (pops > 1e-300)
    if sel.sum() < 2:
        raise InsufficientDecay("too few positive samples in the tail window")
    slope, _ = np.polyfit(t[sel], np.log(pops[sel]), 1)
    return float(slope)


def maximally_mixed(n: int) -> np.ndarray:
    return np.eye(n, dtype=complex) / n
