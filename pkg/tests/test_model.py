import json
import math

import numpy as np
import pytest

from qds.corpus import BUILDERS, example1, example2, load_bundled, nv_reduced
from qds.model import (Control, ModelError, ParseError, QdsModel, Subspace, generator_apply,
                       hamiltonian_at, load_model, serialize_model)
from oracles import lindblad_rhs


AD_DOC = {"dim": 2, "h0": [[0, 0], [0, 0]], "lindblads": [[[0, 1], [0, 0]]],
          "target": {"basis": [[1], [0]]}}


def test_load_amplitude_damping():
    m = load_model(json.dumps(AD_DOC))
    assert m.dim == 2 and len(m.lindblads) == 1 and m.n_controls == 0
    assert m.target.dim == 1


def test_complex_entries_and_ranges():
    doc = {"dim": 2, "h0": [[1, [0, -1]], [[0, 1], 0]],
           "controls": [{"name": "x", "matrix": [[0, 1], [1, 0]], "range": [[0, 1], [2, 2]]},
                        {"name": "y", "matrix": [[1, 0], [0, -1]], "range": [["-inf", "inf"]]}]}
    m = load_model(json.dumps(doc))
    assert m.h0[0, 1] == -1j
    assert m.controls[0].ranges == ((0.0, 1.0), (2.0, 2.0))
    assert m.contains([2.0, -5.0]) and not m.contains([1.5, 0.0])
    assert math.isinf(m.controls[1].ranges[0][1])


def test_example2_and_nv_shapes():
    m = example2()
    assert m.dim == 3 and m.control_names == ["Delta", "Omega"]
    h = hamiltonian_at(m, [1.0, 1.0])
    expect = np.array([[1, 0, 0], [0, 1, 1], [0, 1, 0]], complex)  # Upsilon = 1
    assert np.allclose(h, expect)
    nv = nv_reduced()
    assert nv.dim == 10 and len(nv.lindblads) == 6 and nv.unit == "MHz"


def test_nv_level_at_resonance():
    nv = nv_reduced()
    b = 1420.0 / 2.8
    h = hamiltonian_at(nv, [b])
    # |e,1,0> diagonal entry is h_e = D_e - g_el B
    assert abs(h[2, 2]) < 1e-9


@pytest.mark.parametrize("doc, exc", [
    ("{not json", ParseError),
    (json.dumps({"h0": [[0]]}), ParseError),
    (json.dumps({"dim": 2, "h0": [[0, 1], [0, 0]]}), ModelError),  # non-Hermitian
    (json.dumps({"dim": 2, "h0": [[0]]}), ModelError),  # shape
    (json.dumps({"dim": 1, "h0": [[0]], "controls": [{"matrix": [[1]], "range": [[2, 1]]}]}),
     ModelError),  # empty interval
    (json.dumps({"dim": 1, "h0": [[0]], "controls": [{"matrix": [[1]], "range": []}]}),
     ModelError),
])
def test_validation_errors(doc, exc):
    with pytest.raises(exc):
        load_model(doc)


def test_hermitian_tolerance_is_relative():
    big = 1e6 * np.array([[1, 1], [1, 1]], complex)
    big[0, 1] += 1e-6  # relative 1e-12: accepted
    QdsModel(2, big)
    with pytest.raises(ModelError):
        QdsModel(2, np.array([[0, 1e-6], [0, 0]]))


def test_dim_cap_and_subspace_checks():
    with pytest.raises(ModelError):
        QdsModel(65, np.zeros((65, 65)))
    with pytest.raises(ModelError):
        Subspace(np.array([[1.0], [1.0]]))
    s = Subspace.span(np.array([[1.0], [1.0]]))
    assert np.isclose(np.linalg.norm(s.basis), 1.0)


def test_hamiltonian_at_zero_and_length():
    m = example2()
    assert np.array_equal(hamiltonian_at(m, [0, 0]), m.h0)
    with pytest.raises(ModelError):
        hamiltonian_at(m, [1.0])


def test_hamiltonian_affine():
    m = nv_reduced()
    rng = np.random.default_rng(0)
    u, v = rng.normal(size=1) * 100, rng.normal(size=1) * 100
    d = hamiltonian_at(m, u + v) - hamiltonian_at(m, u) - hamiltonian_at(m, v) + hamiltonian_at(m, [0])
    assert np.abs(d).max() < 1e-10


def test_generator_examples():
    m = example1()
    psi = m.target.basis
    assert np.abs(generator_apply(m, None, psi @ psi.conj().T)).max() < 1e-12
    ad = load_bundled("amplitude_damping")
    out = generator_apply(ad, None, np.diag([0, 1]).astype(complex))
    assert np.allclose(out, np.diag([1, -1]))


def test_generator_matches_oracle_and_preserves_trace():
    rng = np.random.default_rng(1)
    for name in ("example1", "dfs4", "nv_reduced"):
        m = load_bundled(name)
        u = rng.uniform(0, 2, size=m.n_controls)
        h = hamiltonian_at(m, u)
        for _ in range(20):
            a = rng.normal(size=(m.dim, m.dim)) + 1j * rng.normal(size=(m.dim, m.dim))
            rho = a @ a.conj().T
            rho /= np.trace(rho)
            out = generator_apply(m, u, rho)
            assert np.allclose(out, lindblad_rhs(h, m.lindblads, rho), atol=1e-9 * m.scale)
            assert abs(np.trace(out)) < 1e-10 * m.scale**2
            assert np.abs(out - out.conj().T).max() < 1e-10 * m.scale**2


@pytest.mark.parametrize("name", sorted(BUILDERS))
def test_corpus_roundtrip(name):
    m = load_bundled(name)
    text = serialize_model(m)
    assert serialize_model(load_model(text)) == text


@pytest.mark.parametrize("name", sorted(BUILDERS))
def test_corpus_files_in_sync_with_builders(name):
    from qds.corpus import bundled_path

    assert bundled_path(name).read_text(encoding="utf-8") == serialize_model(BUILDERS[name]())


def test_control_flags():
    c = Control("q", np.eye(1), ((1.0, 1.0), (2.0, 2.0)))
    assert c.finite and c.bounded
    assert not Control("r", np.eye(1)).bounded
