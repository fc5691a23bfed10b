"""Versioned QUBO interchange format.

A model document is JSON with a metadata block, the variable map, linear
coefficients, quadratic triplets (i < j), the constant offset, and the
lambda-free integer components of the four energy terms.  Round-trips are
bit-exact because JSON serialization of Python floats uses the shortest
repr that reparses to the same double.

A flat "i j value" text emitter is provided for interoperability with
generic QUBO tooling (diagonal entries carry the linear coefficients; the
offset and variable map travel in a JSON sidecar).

The document hash, used by samplers to tag their output, is the SHA-256
of the canonical JSON of the coefficient-bearing fields; any consumer can
recompute it from the document alone.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .encoding import (LambdaParams, QuadTerms, QuboModel, TermComponent,
                       build_variable_map)
from .hp import HpSequence, LatticeGrid
from .registry import load_registry

FORMAT_NAME = "hp-qubo"
FORMAT_VERSION = 1


class InterchangeError(ValueError):
    """Malformed, inconsistent, or wrong-version interchange document."""


def model_to_document(model: QuboModel) -> dict:
    """Serialize a model to a plain-dict interchange document."""
    vmap = model.vmap
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "metadata": {
            "sequence_label": model.sequence.label,
            "sequence": str(model.sequence),
            "grid": {"lx": vmap.grid.lx, "ly": vmap.grid.ly},
            "lambdas": list(model.lambdas.as_tuple()),
            "parity_convention": "bead f on sites with (x+y) mod 2 == (f-1) mod 2",
        },
        "variables": [[f, site[0], site[1], idx] for f, site, idx in vmap.entries()],
        "linear": [float(v) for v in model.linear],
        "quadratic": [[int(i), int(j), float(v)]
                      for i, j, v in zip(model.quad.i, model.quad.j, model.quad.value)],
        "offset": float(model.offset),
        "components": {
            name: {
                "linear": [int(v) for v in comp.linear],
                "quadratic": [[int(i), int(j), int(v)]
                              for i, j, v in zip(comp.quad.i, comp.quad.j, comp.quad.value)],
                "offset": int(comp.offset),
            }
            for name, comp in model.components.items()
        },
    }
    doc["hash"] = document_hash(doc)
    return doc


def document_hash(doc: dict) -> str:
    """SHA-256 over the canonical JSON of the coefficient-bearing fields."""
    payload = {
        "variables": doc["variables"],
        "linear": doc["linear"],
        "quadratic": doc["quadratic"],
        "offset": doc["offset"],
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def export_qubo(model: QuboModel, path) -> dict:
    """Write the interchange JSON document for a model; returns the dict."""
    doc = model_to_document(model)
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")
    return doc


def document_to_model(doc: dict) -> QuboModel:
    """Rebuild a model from an interchange document, checking consistency."""
    if not isinstance(doc, dict):
        raise InterchangeError("document is not a JSON object")
    if doc.get("format") != FORMAT_NAME:
        raise InterchangeError(f"unknown format {doc.get('format')!r}")
    if doc.get("version") != FORMAT_VERSION:
        raise InterchangeError(
            f"unsupported version {doc.get('version')!r}; this build reads version {FORMAT_VERSION}")
    for key in ("metadata", "variables", "linear", "quadratic", "offset", "components"):
        if key not in doc:
            raise InterchangeError(f"document missing {key!r} field")
    meta = doc["metadata"]
    seq_text = meta["sequence"]
    label = meta.get("sequence_label", "")
    registry = load_registry()
    if label in registry and str(registry[label].sequence) == seq_text:
        seq = registry[label].sequence
    else:
        from .hp import parse_sequence
        seq = parse_sequence(seq_text, label=label or seq_text)
    grid = LatticeGrid(lx=int(meta["grid"]["lx"]), ly=int(meta["grid"]["ly"]))
    lam = LambdaParams(*[float(v) for v in meta["lambdas"]])
    vmap = build_variable_map(seq, grid)

    expected = [[f, site[0], site[1], idx] for f, site, idx in vmap.entries()]
    got = [list(map(int, row)) for row in doc["variables"]]
    if got != expected:
        raise InterchangeError("variable map entries inconsistent with sequence/grid")

    linear = np.asarray(doc["linear"], dtype=np.float64)
    if linear.shape != (vmap.num_vars,):
        raise InterchangeError(
            f"linear has {linear.shape[0] if linear.ndim else 0} entries, expected {vmap.num_vars}")
    quad = _quad_from_rows(doc["quadratic"], vmap.num_vars, np.float64)

    components = {}
    for name, comp in doc["components"].items():
        comp_lin = np.asarray(comp["linear"], dtype=np.int64)
        if comp_lin.shape != (vmap.num_vars,):
            raise InterchangeError(f"component {name}: linear length mismatch")
        components[name] = TermComponent(
            linear=comp_lin,
            quad=_quad_from_rows(comp["quadratic"], vmap.num_vars, np.int64),
            offset=int(comp["offset"]))

    stored_hash = doc.get("hash")
    if stored_hash is not None and stored_hash != document_hash(doc):
        raise InterchangeError("document hash does not match coefficient payload")
    return QuboModel(vmap=vmap, lambdas=lam, linear=linear, quad=quad,
                     offset=float(doc["offset"]), components=components, sequence=seq)


def _quad_from_rows(rows, num_vars: int, dtype) -> QuadTerms:
    if not rows:
        return QuadTerms(i=np.empty(0, dtype=np.int64), j=np.empty(0, dtype=np.int64),
                         value=np.empty(0, dtype=dtype))
    arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InterchangeError("quadratic rows must be [i, j, value] triplets")
    i = arr[:, 0].astype(np.int64)
    j = arr[:, 1].astype(np.int64)
    if np.any(i >= j):
        raise InterchangeError("quadratic triplets must have i < j")
    if np.any(i < 0) or np.any(j >= num_vars):
        raise InterchangeError("quadratic index out of range")
    return QuadTerms(i=i, j=j, value=arr[:, 2].astype(dtype))


def import_qubo(path) -> QuboModel:
    """Read an interchange JSON file back into a model."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InterchangeError(f"not valid JSON: {exc}") from exc
    return document_to_model(doc)


def models_equal(a: QuboModel, b: QuboModel) -> bool:
    """Bit-exact coefficient equality, used by round-trip tests."""
    if (str(a.sequence) != str(b.sequence) or a.vmap.grid != b.vmap.grid
            or a.lambdas != b.lambdas or a.offset != b.offset):
        return False
    if not (np.array_equal(a.linear, b.linear)
            and np.array_equal(a.quad.i, b.quad.i)
            and np.array_equal(a.quad.j, b.quad.j)
            and np.array_equal(a.quad.value, b.quad.value)):
        return False
    if set(a.components) != set(b.components):
        return False
    for name in a.components:
        ca, cb = a.components[name], b.components[name]
        if not (np.array_equal(ca.linear, cb.linear)
                and np.array_equal(ca.quad.i, cb.quad.i)
                and np.array_equal(ca.quad.j, cb.quad.j)
                and np.array_equal(ca.quad.value, cb.quad.value)
                and ca.offset == cb.offset):
            return False
    return True


def export_flat(model: QuboModel, qubo_path, sidecar_path) -> None:
    """Write the flat "i j value" text form plus its JSON sidecar.

    Diagonal lines (i == j) carry linear coefficients; off-diagonal lines
    the quadratic ones.  The sidecar holds offset, metadata, and the
    variable map, which the flat format cannot express.
    """
    doc = model_to_document(model)
    with open(qubo_path, "w") as fh:
        fh.write(f"# {FORMAT_NAME} flat export; offset and variable map in sidecar\n")
        fh.write(f"# vars {model.num_vars} quadratic_terms {model.quad.nnz}\n")
        for i, v in enumerate(model.linear):
            if v != 0.0:
                fh.write(f"{i} {i} {float(v)!r}\n")
        for i, j, v in zip(model.quad.i, model.quad.j, model.quad.value):
            fh.write(f"{i} {j} {float(v)!r}\n")
    sidecar = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "metadata": doc["metadata"],
        "offset": doc["offset"],
        "variables": doc["variables"],
        "hash": doc["hash"],
    }
    with open(sidecar_path, "w") as fh:
        json.dump(sidecar, fh, indent=1)
        fh.write("\n")
