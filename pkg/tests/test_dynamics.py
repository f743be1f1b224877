import math

import numpy as np
import pytest

from qds.corpus import BUILDERS, amplitude_damping, example1, example2, load_bundled
from qds.dynamics import (InsufficientDecay, StepTooLarge, evolve, fidelity_to_target,
                          fit_decay_rate, integrate, maximally_mixed, r_population, suggest_dt,
                          trace_distance_to_set)
from qds.model import QdsModel, Subspace
from qds.spectral import gas_verdict
import oracles
from randmodels import random_invariant_model

DEFAULT_U = {"example2": [0.0, 1.0], "dfs4": [0.0, 1.0], "entangle2": [0.0, 0.0],
             "nv_reduced": [507.0], "nv_merged": [507.0], "nv_extended": [507.0]}


def test_amplitude_damping_closed_form():
    m = amplitude_damping(1.3)
    rho0 = np.diag([0.0, 1.0]).astype(complex)
    tr = integrate(m, None, rho0, 4.0, 1e-3, record_every=100)
    for t, rho in zip(tr.times, tr.states):
        assert abs(rho[1, 1].real - oracles.amplitude_damping_excited(1.3, t)) < 1e-9
    assert abs(fit_decay_rate(tr, m.target, floor=0.01) + 1.3) < 1e-6


def test_example2_rate_is_dominant_mode():
    m = example2()
    u = [0.0, 1.0]
    lam0 = gas_verdict(m, u, m.target).lambda0
    tr = integrate(m, u, maximally_mixed(3), 40.0, suggest_dt(m, u), record_every=50)
    fit = fit_decay_rate(tr, m.target)
    assert abs(fit - lam0) < 0.01 * abs(lam0)


def test_misses_slow_mode_without_overlap():
    # two decay channels; starting in the fast one never sees lambda0
    l1 = np.zeros((3, 3)); l1[0, 1] = 1.0
    l2 = np.zeros((3, 3)); l2[0, 2] = math.sqrt(5.0)
    m = QdsModel(3, np.zeros((3, 3)), (), (l1, l2), Subspace.coordinates(3, [0]))
    assert abs(gas_verdict(m, None, m.target).lambda0 + 1.0) < 1e-12
    rho0 = np.diag([0, 0, 1.0]).astype(complex)
    tr = integrate(m, None, rho0, 4.0, suggest_dt(m), record_every=10)
    assert abs(fit_decay_rate(tr, m.target) + 5.0) < 1e-3
    assert abs(oracles.dominant_overlapping_mode(m.h0, m.lindblads, m.target.basis, rho0) + 5) < 1e-9


def test_step_guard_and_bad_args():
    m = example1()
    with pytest.raises(StepTooLarge):
        integrate(m, None, maximally_mixed(4), 1.0, 1.0)
    with pytest.raises(ValueError):
        integrate(m, None, maximally_mixed(4), -1.0, 0.01)


def test_non_gas_plateaus():
    m = example2()
    tr = integrate(m, [0.5, 0.0], maximally_mixed(3), 30.0, suggest_dt(m, [0.5, 0.0]),
                   record_every=50)
    with pytest.raises(InsufficientDecay):
        fit_decay_rate(tr, m.target)


def test_evolve_reversible():
    m = example1()
    rho = maximally_mixed(4)
    back = evolve(m, None, evolve(m, None, rho, 0.01, 10), -0.01, 10)
    assert np.abs(back - rho).max() < 1e-9


def test_example1_converges():
    m = example1()
    tr = integrate(m, None, maximally_mixed(4), 50.0, suggest_dt(m), record_every=500)
    assert fidelity_to_target(tr.states[-1], m.target) > 0.9999
    assert trace_distance_to_set(tr.states[-1], m.target) < 1e-4


def test_measures():
    s = Subspace.coordinates(2, [0])
    assert r_population(np.diag([0.25, 0.75]), s) == 0.75
    assert trace_distance_to_set(np.diag([0.0, 1.0]), s) == 1.0
    assert trace_distance_to_set(np.diag([1.0, 0.0]), s) == 0.0


@pytest.mark.parametrize("name", sorted(BUILDERS))
def test_diagnostics_on_bundled(name):
    m = load_bundled(name)
    u = DEFAULT_U.get(name)
    dt = suggest_dt(m, u)
    tmax = min(5.0, 3000 * dt)
    tr = integrate(m, u, maximally_mixed(m.dim), tmax, dt, record_every=100)
    assert tr.trace_drift.max() / tr.times[-1] < 1e-8 * max(1.0, m.scale)
    assert tr.min_eig.min() >= -1e-6


def test_tail_rate_matches_dominant_mode():
    rng = np.random.default_rng(77)
    done = 0
    while done < 20:
        m = random_invariant_model(rng, mode="generic")
        if not gas_verdict(m, None, m.target).gas:
            continue
        rho0 = maximally_mixed(m.dim)
        lam = oracles.dominant_overlapping_mode(m.h0, m.lindblads, m.target.basis, rho0)
        tmax = 16 / abs(lam)
        dt = suggest_dt(m)
        tr = integrate(m, None, rho0, tmax, dt, record_every=max(1, int(tmax / dt / 400)))
        fit = fit_decay_rate(tr, m.target)
        assert abs(fit - lam) <= 0.10 * abs(lam)
        done += 1
