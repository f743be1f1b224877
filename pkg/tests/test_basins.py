import math

import numpy as np
import pytest

from qds.basins import (ARCCOS_INV_E, CIRCULATION, MIXING1, MIXING2, TRANSITION, DidFailed,
                        NotApplicable, basin_blocks, bottleneck, classify, dissipative_rate,
                        hamiltonian_rate)
from qds.corpus import amplitude_damping, entangle2_at, example1, example2, nv_reduced
from qds.did import compute_did
from qds.dynamics import evolve
from qds.model import QdsModel, Subspace
import oracles
from randmodels import random_invariant_model


def _did(m, u=None):
    return compute_did(m, u, m.target)


def test_arccos_constant():
    assert abs(ARCCOS_INV_E - oracles.ARCCOS_INV_E) < 1e-15
    assert abs(ARCCOS_INV_E - 1.19407) < 1e-5


def test_example1_classes():
    m = example1()
    cls = classify(m, None, _did(m))
    assert [c.kind for c in cls] == [TRANSITION, MIXING1, CIRCULATION]
    assert abs(cls[0].rate_l - 2 / 3) < 1e-10
    assert abs(cls[1].rate_l - 2.0) < 1e-10
    assert abs(cls[2].singulars[0] - math.sqrt(3)) < 1e-10
    assert abs(cls[2].rate_h - math.sqrt(3) / ARCCOS_INV_E) < 1e-10
    b = bottleneck(m, None, _did(m))
    assert b.basin_index == 1 and b.limited_by == "Dissipation"
    assert abs(b.gamma_min - 2 / 3) < 1e-10


def test_amplitude_damping_rate():
    for g in (0.3, 1.0, 4.0):
        m = amplitude_damping(g)
        cls = classify(m, None, _did(m))
        assert cls[0].kind == TRANSITION and abs(cls[0].rate_l - g) < 1e-12


def test_entangle_closed_form():
    for d, a in [(0.3, 1.0), (1.0, 0.5), (2.0, 2.0)]:
        m = entangle2_at(d, a)
        dd = _did(m)
        r = dissipative_rate(dd, 1, m)
        assert abs(r - 2 * d**2 / (d**2 + 2 * a**2)) < 1e-10


def test_nv_reduced_taxonomy():
    m = nv_reduced()
    d = _did(m, [507.0])
    cls = classify(m, [507.0], d)
    assert [c.kind for c in cls] == [TRANSITION, TRANSITION, MIXING2, CIRCULATION,
                                     TRANSITION, TRANSITION, MIXING2]
    assert np.allclose([cls[i].rate_l for i in (0, 1, 2)], [3.3, 33.0, 70.0])
    assert np.allclose(cls[3].singulars, [40.0, 2.2])
    b = bottleneck(m, [507.0], d, cls)
    assert b.limited_by == "Hamiltonian" and b.basin_index == 4
    assert abs(b.gamma_min - 2.2 / ARCCOS_INV_E) < 1e-9
    assert b.dissipative_index == 1 and abs(b.dissipative_limit - 3.3) < 1e-9


def test_wrong_kind_and_failed_did():
    m = example1()
    d = _did(m)
    with pytest.raises(NotApplicable):
        hamiltonian_rate(m, None, d, 1)
    with pytest.raises(NotApplicable):
        dissipative_rate(d, 3, m)
    m2 = example2()
    with pytest.raises(DidFailed):
        classify(m2, [0.5, 0.0], compute_did(m2, [0.5, 0.0], m2.target))


def test_dissipative_rate_without_model_uses_meta():
    m = example1()
    d = _did(m)
    assert abs(dissipative_rate(d, 2) - 2.0) < 1e-10


def test_rates_invariant_under_unitary_frame():
    rng = np.random.default_rng(4)
    for _ in range(15):
        m = random_invariant_model(rng, mode="generic")
        d = _did(m)
        if not d.success:
            continue
        q, _ = np.linalg.qr(rng.normal(size=(m.dim, m.dim)) + 1j * rng.normal(size=(m.dim, m.dim)))
        qd = q.conj().T
        m2 = QdsModel(m.dim, q @ m.h0 @ qd, (), tuple(q @ l @ qd for l in m.lindblads),
                      Subspace(q @ m.target.basis))
        r1 = [c.rate for c in classify(m, None, d)]
        r2 = [c.rate for c in classify(m2, None, _did(m2))]
        assert np.allclose(r1, r2, rtol=1e-8, atol=1e-10)


def test_dissipative_rate_is_inflow_rate():
    # for rho supported on T_i, d/dt tr(Pi_C rho) = tr(sum hat L_P^dag hat L_P rho)
    rng = np.random.default_rng(9)
    cases = [(example1(), None), (nv_reduced(), [507.0])]
    for _ in range(8):
        m = random_invariant_model(rng, mode="generic")
        cases.append((m, None))
    checked = 0
    for m, u in cases:
        d = compute_did(m, u, m.target)
        if not d.success:
            continue
        for i, step in enumerate(d.steps, 1):
            lps = basin_blocks(m, u, d, i)["lp"]
            g = sum(x.conj().T @ x for x in lps)
            if np.linalg.norm(g) < 1e-9:
                continue
            w, v = np.linalg.eigh(g)
            psi = step.basin @ v[:, 0]
            rho = np.outer(psi, psi.conj())
            pc = step.collected @ step.collected.conj().T
            h = 1e-4 / max(1.0, m.scale)
            fwd = np.trace(pc @ evolve(m, u, rho, h, 4)).real
            bwd = np.trace(pc @ evolve(m, u, rho, -h, 4)).real
            assert abs((fwd - bwd) / (2 * h) - dissipative_rate(d, i, m)) < 1e-5 * max(1.0, w[0])
            checked += 1
    assert checked >= 10
