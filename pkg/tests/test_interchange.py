import json

import numpy as np
import pytest

from hpfold import LatticeGrid, encode, get_sequence, qubo_energy
from hpfold.bench import VARIABLE_COUNT_CASES
from hpfold.interchange import (InterchangeError, document_hash, export_flat,
                                export_qubo, import_qubo, model_to_document,
                                models_equal)

from conftest import LAMBDA_STAR, random_configs


@pytest.mark.parametrize("label,grid", [(l, g) for l, g, _ in VARIABLE_COUNT_CASES[:6]])
def test_roundtrip_identity(tmp_path, label, grid):
    model = encode(get_sequence(label), LatticeGrid(*grid), LAMBDA_STAR)
    path = tmp_path / "m.json"
    export_qubo(model, path)
    assert models_equal(model, import_qubo(path))


def test_roundtrip_preserves_energies(tmp_path, s6_model):
    path = tmp_path / "m.json"
    export_qubo(s6_model, path)
    m2 = import_qubo(path)
    X = random_configs(s6_model.num_vars, 100, seed=31)
    for x in X:
        assert qubo_energy(s6_model, x) == qubo_energy(m2, x)


def test_s4_document_has_12_map_entries(s4_model):
    doc = model_to_document(s4_model)
    assert len(doc["variables"]) == 12
    assert doc["metadata"]["grid"] == {"lx": 3, "ly": 2}


def test_missing_offset_rejected(tmp_path, s4_model):
    doc = model_to_document(s4_model)
    del doc["offset"]
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(InterchangeError, match="offset"):
        import_qubo(path)


def test_version_mismatch_rejected(tmp_path, s4_model):
    doc = model_to_document(s4_model)
    doc["version"] = 999
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(InterchangeError, match="version"):
        import_qubo(path)


def test_tampered_coefficients_fail_hash_check(tmp_path, s4_model):
    doc = model_to_document(s4_model)
    doc["linear"][0] += 1.0
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(InterchangeError, match="hash"):
        import_qubo(path)


def test_inconsistent_map_rejected(tmp_path, s4_model):
    doc = model_to_document(s4_model)
    doc["variables"][0][3], doc["variables"][1][3] = \
        doc["variables"][1][3], doc["variables"][0][3]
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(InterchangeError, match="map"):
        import_qubo(path)


def test_not_json_rejected(tmp_path):
    path = tmp_path / "m.json"
    path.write_text("definitely not json {")
    with pytest.raises(InterchangeError, match="JSON"):
        import_qubo(path)


def test_hash_is_deterministic_and_content_sensitive(s4_model, s6_model):
    d4 = model_to_document(s4_model)
    assert document_hash(d4) == document_hash(model_to_document(s4_model))
    assert document_hash(d4) != document_hash(model_to_document(s6_model))


def test_flat_export(tmp_path, s4_model):
    qubo = tmp_path / "m.qubo"
    sidecar = tmp_path / "m.sidecar.json"
    export_flat(s4_model, qubo, sidecar)
    lines = [l for l in qubo.read_text().splitlines() if not l.startswith("#")]
    diag = [l for l in lines if l.split()[0] == l.split()[1]]
    offdiag = [l for l in lines if l.split()[0] != l.split()[1]]
    assert len(diag) == s4_model.num_vars  # every linear coefficient nonzero
    assert len(offdiag) == s4_model.quad.nnz
    # flat + sidecar reconstruct the full energy
    side = json.loads(sidecar.read_text())
    assert side["offset"] == s4_model.offset
    assert len(side["variables"]) == 12
    i0, j0, v0 = offdiag[0].split()
    k = np.flatnonzero((s4_model.quad.i == int(i0)) & (s4_model.quad.j == int(j0)))
    assert float(v0) == s4_model.quad.value[k[0]]
