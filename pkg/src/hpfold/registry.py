"""Registry of benchmark HP sequences with known minimum energies.

Shipped as a JSON data file; each entry carries the sequence, its minimum
HP energy, and whether that energy is exact (exhaustive enumeration) or
the best known value from classical searches.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .hp import HpSequence, parse_sequence


class UnknownSequenceError(KeyError):
    """Requested label is not in the benchmark registry."""


@dataclass(frozen=True)
class BenchmarkEntry:
    sequence: HpSequence
    e_min: int
    exact: bool

    @property
    def label(self) -> str:
        return self.sequence.label


@lru_cache(maxsize=1)
def load_registry() -> dict[str, BenchmarkEntry]:
    """Load the shipped sequence table, keyed by label (e.g. "S30")."""
    text = resources.files("hpfold.data").joinpath("sequences.json").read_text()
    raw = json.loads(text)
    registry: dict[str, BenchmarkEntry] = {}
    for row in raw["sequences"]:
        label = row["label"]
        if label in registry:
            raise ValueError(f"duplicate label {label} in registry data")
        seq = parse_sequence(row["sequence"], label=label)
        expected_n = int(label[1:])
        if len(seq) != expected_n:
            raise ValueError(f"{label}: sequence length {len(seq)} != {expected_n}")
        registry[label] = BenchmarkEntry(sequence=seq, e_min=int(row["e_min"]),
                                         exact=bool(row["exact"]))
    return registry


def get_entry(label: str) -> BenchmarkEntry:
    reg = load_registry()
    if label not in reg:
        raise UnknownSequenceError(
            f"unknown sequence {label!r}; known: {', '.join(sorted(reg, key=lambda s: int(s[1:])))}")
    return reg[label]


def get_sequence(label: str) -> HpSequence:
    return get_entry(label).sequence


def known_e_min(label: str) -> int:
    return get_entry(label).e_min
