import numpy as np
import pytest

from hpfold import (Conformation, LatticeGrid, decode, encode, get_sequence,
                    hit_test, hp_energy)
from hpfold.decoding import EminUnknownError
from hpfold.encoding import spin_config_from_conformation
from hpfold.hp import parse_sequence
from hpfold.oracle import enumerate_ground_states

from conftest import LAMBDA_STAR, random_configs


@pytest.fixture(scope="module")
def s4():
    return get_sequence("S4"), encode(get_sequence("S4"), LatticeGrid(3, 2), LAMBDA_STAR)


# an S30 minimum-energy conformation, found by chain annealing and verified
# below against hp_energy; e_min = -15 is the registry value
S30_GROUND = Conformation((
    (0, 3), (1, 3), (2, 3), (3, 3), (3, 2), (2, 2), (1, 2), (1, 1), (2, 1),
    (2, 0), (3, 0), (3, 1), (4, 1), (4, 2), (5, 2), (5, 3), (4, 3), (4, 4),
    (5, 4), (5, 5), (4, 5), (4, 6), (3, 6), (2, 6), (2, 5), (1, 5), (1, 4),
    (2, 4), (3, 4), (3, 5)))


def anchor_to_grid(conf, grid):
    """Shift a conformation onto the grid with bead 1 on an even site."""
    from hpfold.hp import site_parity
    for dx in (0, 1):
        cand = Conformation(tuple((x + dx, y) for x, y in conf.coords))
        if all(grid.contains(c) for c in cand.coords) and \
                site_parity(cand.coords[0]) == 0:
            return cand
    raise AssertionError("conformation does not fit the grid")


class TestDecode:
    def test_roundtrip_conformation(self, s4):
        seq, model = s4
        conf = Conformation(((0, 0), (1, 0), (1, 1), (0, 1)))
        x = spin_config_from_conformation(conf, model.vmap)
        state = decode(x, model.vmap, seq)
        assert state.is_valid_chain
        assert state.conformation == conf
        assert state.energies.e_hp == hp_energy(seq, conf).e_hp == -1

    def test_all_zero_reports_unplaced_beads(self, s4):
        seq, model = s4
        state = decode(np.zeros(model.num_vars, dtype=np.uint8), model.vmap, seq)
        assert state.status == "invalid"
        assert state.violations.beads_misplaced == len(seq)
        assert state.energies.e1 == len(seq)
        assert state.conformation is None

    def test_stretched_link_counts_once(self, s4):
        seq, model = s4
        vmap = model.vmap
        x = np.zeros(model.num_vars, dtype=np.uint8)
        # valid chain except bead 4 moved three steps from bead 3
        for f, c in [(1, (0, 0)), (2, (1, 0)), (3, (1, 1)), (4, (2, 1))]:
            x[vmap.index(f, c)] = 1
        x[vmap.index(4, (2, 1))] = 0
        x[vmap.index(4, (0, 1))] = 1  # adjacent: sanity
        assert decode(x, vmap, seq).is_valid_chain
        x[vmap.index(4, (0, 1))] = 0
        far = vmap.index(4, (2, 1))
        x[far] = 1
        state = decode(x, vmap, seq)
        assert state.is_valid_chain  # (2,1) is adjacent to (1,1)
        x[far] = 0
        # bead 2 three steps from bead 1 instead
        x[vmap.index(2, (1, 0))] = 0
        x[vmap.index(2, (2, 1))] = 1
        state = decode(x, vmap, seq)
        assert not state.is_valid_chain
        assert state.violations.broken_links == state.energies.e3 >= 1

    def test_valid_iff_constraints_vanish(self, s4):
        seq, model = s4
        from hpfold.encoding import term_energies_batch
        X = random_configs(model.num_vars, 300, seed=11)
        terms = term_energies_batch(seq, LatticeGrid(3, 2), X)
        for x, row in zip(X, terms):
            state = decode(x, model.vmap, seq)
            constraints_zero = row[1] == 0 and row[2] == 0 and row[3] == 0
            assert state.is_valid_chain == constraints_zero
            if state.is_valid_chain:
                assert hp_energy(seq, state.conformation).e_hp == row[0]

    def test_s30_ground_state_decodes_to_minus_15(self):
        grid = LatticeGrid(10, 10)
        seq = get_sequence("S30")
        assert hp_energy(seq, S30_GROUND).e_hp == -15
        conf = anchor_to_grid(S30_GROUND, grid)
        model = encode(seq, grid, LAMBDA_STAR)
        x = spin_config_from_conformation(conf, model.vmap)
        state = decode(x, model.vmap, seq)
        assert state.is_valid_chain
        assert state.energies.e_hp == -15
        assert hit_test(state, seq)


class TestHitTest:
    def test_valid_at_e_min(self, s4):
        seq, model = s4
        conf = Conformation(((0, 0), (1, 0), (1, 1), (0, 1)))
        state = decode(spin_config_from_conformation(conf, model.vmap), model.vmap, seq)
        assert hit_test(state, seq)

    def test_valid_above_e_min(self, s4):
        seq, model = s4
        rod = Conformation(((0, 0), (1, 0), (2, 0), (2, 1)))
        state = decode(spin_config_from_conformation(rod, model.vmap), model.vmap, seq)
        assert state.is_valid_chain
        assert not hit_test(state, seq)

    def test_invalid_never_hits_even_below_e_min(self, s4):
        # constraint-broken states can push e_hp below the true minimum;
        # those never count as hits
        seq, model = s4
        vmap = model.vmap
        x = np.zeros(model.num_vars, dtype=np.uint8)
        for f in (1, 3):
            for site in vmap.sites_for_bead(f):
                x[vmap.index(f, site)] = 1
        for f in (2, 4):
            for site in vmap.sites_for_bead(f):
                x[vmap.index(f, site)] = 1
        state = decode(x, vmap, seq)
        assert state.energies.e_hp < -1
        assert not state.is_valid_chain
        assert not hit_test(state, seq)

    def test_unknown_e_min_raises(self):
        seq = parse_sequence("HPHP")  # not a registry label
        model = encode(seq, LatticeGrid(3, 2), LAMBDA_STAR)
        conf = Conformation(((0, 0), (1, 0), (1, 1), (0, 1)))
        state = decode(spin_config_from_conformation(conf, model.vmap), model.vmap, seq)
        with pytest.raises(EminUnknownError):
            hit_test(state, seq)
        assert hit_test(state, seq, e_min=state.energies.e_hp)
