"""Map spin configurations back to physical chains and diagnose
constraint violations.

A configuration decodes to a valid chain exactly when all three
constraint energies vanish; in that case the reconstructed conformation's
contact energy equals the E_HP term of the spin system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoding import ContractError, TermEnergies, VariableMap, _as_bits, _term_energies_from_bits
from .hp import Conformation, HpSequence
from .registry import get_entry


class EminUnknownError(LookupError):
    """hit_test needs a registered minimum energy for the sequence."""


@dataclass(frozen=True)
class ViolationCounts:
    """Constraint diagnostics in physical units.

    beads_misplaced counts beads not on exactly one site (as opposed to
    E1, which is the sum of squared deviations); colliding_pairs and
    broken_links coincide with E2 and E3.
    """

    beads_misplaced: int
    colliding_pairs: int
    broken_links: int


@dataclass(frozen=True)
class DecodedState:
    """Outcome of decoding one spin configuration."""

    status: str  # "valid_chain" | "invalid"
    conformation: Conformation | None
    violations: ViolationCounts
    energies: TermEnergies

    @property
    def is_valid_chain(self) -> bool:
        return self.status == "valid_chain"


def decode(x, vmap: VariableMap, seq: HpSequence) -> DecodedState:
    """Decode a spin configuration against a variable map.

    Always carries all four term energies, so constraint-broken states can
    still be traced and plotted.
    """
    if vmap.seq_len != len(seq):
        raise ContractError(f"map is for {vmap.seq_len} beads, sequence has {len(seq)}")
    bits = _as_bits(x, vmap.num_vars)
    terms = _term_energies_from_bits(seq, vmap, bits)

    misplaced = 0
    coords = []
    for f in range(1, len(seq) + 1):
        lo, hi = vmap.bead_start[f - 1], vmap.bead_start[f]
        idx = np.flatnonzero(bits[lo:hi])
        if len(idx) != 1:
            misplaced += 1
        else:
            coords.append(vmap.sites_for_bead(f)[idx[0]])
    violations = ViolationCounts(beads_misplaced=misplaced,
                                 colliding_pairs=terms.e2,
                                 broken_links=terms.e3)
    if terms.e1 == 0 and terms.e2 == 0 and terms.e3 == 0:
        return DecodedState(status="valid_chain",
                            conformation=Conformation(tuple(coords)),
                            violations=violations, energies=terms)
    return DecodedState(status="invalid", conformation=None,
                        violations=violations, energies=terms)


def hit_test(state: DecodedState, seq: HpSequence, e_min: int | None = None) -> bool:
    """Whether a decoded state is a ground-state hit.

    True iff the state is a valid chain at the sequence's known minimum
    energy.  Constraint-broken states never count, even when their E_HP
    term lies below the minimum (such values only occur when at least one
    constraint is violated).
    """
    if e_min is None:
        try:
            e_min = get_entry(seq.label).e_min
        except KeyError as exc:
            raise EminUnknownError(
                f"no registered e_min for sequence {seq.label!r}; pass e_min explicitly") from exc
    return state.is_valid_chain and state.energies.e_hp == e_min
