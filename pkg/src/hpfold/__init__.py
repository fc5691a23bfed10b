"""HP lattice-protein folding via a distributed QUBO encoding.

Builds quadratic binary models whose ground states are minimum-energy HP
chains, anneals them classically (spin flips or explicit-chain moves),
checks everything against exhaustive enumeration, and reproduces the
benchmark hit-rate experiments.
"""

from .hp import (Conformation, ContactEnergy, HpSequence, LatticeGrid,
                 canonical_form, hp_energy, parse_sequence,
                 validate_conformation)
from .registry import BenchmarkEntry, get_entry, get_sequence, known_e_min, load_registry
from .encoding import (LambdaParams, QuboModel, SpinConfig, TermEnergies,
                       VariableMap, build_variable_map, encode, qubo_energy,
                       spin_config_from_conformation, suggest_grid,
                       term_energies)
from .decoding import DecodedState, decode, hit_test
from .sa_qubo import (AnnealSchedule, BatchResult, SaRun, batch,
                      default_schedule, flip_delta, local_fields, run)
from .sa_chain import (ChainSaRun, ChainState, chain_batch,
                       default_chain_schedule, one_bead_move, pivot_move,
                       run_chain_sa, two_bead_move)
from .oracle import (BruteForceResult, EnumerationResult, brute_force_qubo,
                     count_conformations, designability_scan,
                     enumerate_ground_states)

__version__ = "0.1.0"
