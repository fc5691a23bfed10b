"""Acceptance suite: every criterion from the build contract, each printing
one PASS/FAIL line (visible with `pytest -rA` or `-s`).

Criteria 5-7 and 9 are statistical experiments at the published protocol
scale (hundreds of full annealing runs; several CPU-hours when the results
cache is cold).  They are marked `heavy`; `scripts/run_experiments.py`
fills the cache so the suite replays them quickly.  A quick pass that
skips them: `pytest -m "not heavy"`.
"""

import time
from fractions import Fraction

import numpy as np
import pytest

from hpfold import (LatticeGrid, brute_force_qubo, count_conformations,
                    decode, encode, enumerate_ground_states, flip_delta,
                    get_entry, get_sequence, local_fields, qubo_energy)
from hpfold import bench, sa_chain, sa_qubo
from hpfold.bench import VARIABLE_COUNT_CASES
from hpfold.encoding import (LambdaParams, build_variable_map,
                             qubo_energy_batch, term_energies_batch)

from conftest import LAMBDA_STAR, random_configs

heavy = pytest.mark.heavy


def report(criterion: int, passed: bool, detail: str) -> None:
    print(f"[CRITERION {criterion:2d}] {'PASS' if passed else 'FAIL'} - {detail}")


# -- criterion 1: oracle ground truth -----------------------------------------

def test_criterion_1_oracle_ground_truth():
    t0 = time.perf_counter()
    lines = []
    ok = True
    for label in ("S4", "S6", "S7", "S8", "S9", "S10", "S14"):
        entry = get_entry(label)
        res = enumerate_ground_states(entry.sequence)
        good = res.e_min == entry.e_min and res.unique
        ok &= good
        lines.append(f"{label}:{res.e_min}{'' if good else '!'}")
    dt14 = time.perf_counter() - t0
    ok &= dt14 < 60
    t0 = time.perf_counter()
    s18 = get_entry("S18")
    res18 = enumerate_ground_states(s18.sequence)
    dt18 = time.perf_counter() - t0
    ok &= res18.e_min == s18.e_min and res18.unique and dt18 < 1800
    detail = (f"e_min exact and unique for {' '.join(lines)} in {dt14:.1f}s; "
              f"S18:{res18.e_min} unique={res18.unique} in {dt18:.1f}s")
    report(1, ok, detail)
    assert ok, detail


# -- criterion 2: variable counts ---------------------------------------------

def test_criterion_2_variable_counts():
    got = [build_variable_map(get_sequence(l), LatticeGrid(*g)).num_vars
           for l, g, _ in VARIABLE_COUNT_CASES]
    expected = [e for _, _, e in VARIABLE_COUNT_CASES]
    ok = got == expected
    report(2, ok, f"all {len(expected)} benchmark instances match: {got}")
    assert ok, (got, expected)


# -- criterion 3: encoder soundness by brute force ----------------------------

@pytest.mark.parametrize("label", ["S4", "S6"])
def test_criterion_3_encoder_soundness(label):
    t0 = time.perf_counter()
    seq = get_sequence(label)
    grid = LatticeGrid(3, 2)
    model = encode(seq, grid, LAMBDA_STAR)
    oracle = enumerate_ground_states(seq)
    res = brute_force_qubo(model)
    ok_min = res.min_energy == pytest.approx(oracle.e_min, abs=1e-9)
    ok_chains = all(decode(x, model.vmap, seq).is_valid_chain for x in res.argmins)

    # constraint non-negativity over the entire state space
    n = model.num_vars
    codes = np.arange(1 << n, dtype=np.uint64)
    X = ((codes[:, None] >> np.arange(n, dtype=np.uint64)[None, :]) & 1).astype(np.uint8)
    terms = term_energies_batch(seq, grid, X)
    ok_nonneg = bool(np.all(terms[:, 1:] >= 0))
    dt = time.perf_counter() - t0
    ok = ok_min and ok_chains and ok_nonneg and dt < 60
    report(3, ok, f"{label}/3x2: min {res.min_energy} == oracle {oracle.e_min}; "
                  f"{res.argmin_count} argmins all valid chains; "
                  f"E1,E2,E3 >= 0 over all 2^{n} states [{dt:.1f}s]")
    assert ok


# -- criterion 4: energy equivalence ------------------------------------------

def test_criterion_4_energy_equivalence():
    t0 = time.perf_counter()
    worst = 0.0
    n_configs = 0
    for label, grid, _ in VARIABLE_COUNT_CASES:
        seq = get_sequence(label)
        g = LatticeGrid(*grid)
        model = encode(seq, g, LAMBDA_STAR)
        X = random_configs(model.num_vars, 10_000, seed=hash((label, grid)) % 2**32)
        qe = qubo_energy_batch(model, X)
        terms = term_energies_batch(seq, g, X)
        recombined = (terms[:, 0] + 2.1 * terms[:, 1] + 2.4 * terms[:, 2]
                      + 3.0 * terms[:, 3])
        worst = max(worst, float(np.max(np.abs(qe - recombined))))
        n_configs += len(X)
        # the model's integer components equal the independent occupancy
        # evaluation exactly (spot checks; full identity is float-bounded)
        for x in X[:25]:
            comp = model.component_energies(x)
            assert [comp["e_hp"], comp["e1"], comp["e2"], comp["e3"]] == \
                list(term_energies_batch(seq, g, x[None, :])[0])
    # with dyadic-rational penalties every coefficient and every sum is an
    # exact float64, so the recombination identity holds with equality
    seq = get_sequence("S6")
    g = LatticeGrid(3, 3)
    dyadic = encode(seq, g, LambdaParams(2.5, 0.25, 3.0))
    X = random_configs(dyadic.num_vars, 10_000, seed=606)
    terms = term_energies_batch(seq, g, X)
    exact = terms[:, 0] + 2.5 * terms[:, 1] + 0.25 * terms[:, 2] + 3.0 * terms[:, 3]
    exactly_equal = bool(np.all(qubo_energy_batch(dyadic, X) == exact))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and exactly_equal and dt < 60
    report(4, ok, f"{n_configs} random configs over {len(VARIABLE_COUNT_CASES)} "
                  f"instances; max |qubo - recombined| = {worst:.2e}; dyadic-"
                  f"rational identity exact: {exactly_equal} [{dt:.1f}s]")
    assert ok


# -- heavy batches (cached) ----------------------------------------------------

@pytest.fixture(scope="session")
def qubo_batches():
    return {label: bench.run_batch_cached(bench.qubo_hitrate_config(label, workers=2))
            for label in bench.HITRATE_SEQUENCES}


@pytest.fixture(scope="session")
def chain_batches():
    return {label: bench.run_batch_cached(bench.chain_hitrate_config(label, workers=2))
            for label in bench.HITRATE_SEQUENCES}


# -- criterion 5: spin-anneal hit rates ----------------------------------------

@heavy
def test_criterion_5_qubo_hit_rates(qubo_batches):
    lines = []
    ok = True
    for label, summary in qubo_batches.items():
        floor = 0.05
        good = summary.hit_rate >= floor and summary.config.n_runs >= 200
        ok &= good
        lines.append(f"{label}:{summary.hit_rate:.3f}{'' if good else '!'}")
    s30 = qubo_batches["S30"]
    in_band = 0.12 <= s30.hit_rate <= 0.35 and s30.config.n_runs >= 500
    ok &= in_band
    detail = (f"rates {' '.join(lines)} (floor 0.05 at >=200 runs); "
              f"S30 {s30.hit_rate:.3f}+-{s30.std_error:.3f} at {s30.config.n_runs} "
              f"runs in [0.12, 0.35]")
    report(5, ok, detail)
    assert ok, detail


# -- criterion 6: explicit-chain anneal dominates ------------------------------

@heavy
def test_criterion_6_solver_ordering(qubo_batches, chain_batches):
    lines = []
    ok = True
    for label in bench.HITRATE_SEQUENCES:
        q, c = qubo_batches[label], chain_batches[label]
        slack = 2 * np.hypot(q.std_error, c.std_error)
        good = c.hit_rate >= q.hit_rate - slack
        ok &= good
        lines.append(f"{label}:{c.hit_rate:.2f}>={q.hit_rate:.2f}-{slack:.2f}"
                     f"{'' if good else '!'}")
    detail = "chain vs spin hit rates: " + " ".join(lines)
    report(6, ok, detail)
    assert ok, detail


# -- criterion 7: lambda sensitivity -------------------------------------------

@heavy
def test_criterion_7_lambda_sensitivity():
    big2 = bench.run_batch_cached(bench.lambda_case_config("lambda2=100", workers=2))
    big3 = bench.run_batch_cached(bench.lambda_case_config("lambda3=100", workers=2))
    low1 = bench.run_batch_cached(bench.lambda_case_config("lambda1=0.5", workers=2))
    ok = (big2.hit_rate >= 0.05 and big2.config.n_runs >= 500
          and big3.hit_rate >= 0.02 and big3.config.n_runs >= 500
          and low1.hit_rate < 0.01)
    detail = (f"lambda2=100: {big2.hit_rate:.3f} (>=0.05); "
              f"lambda3=100: {big3.hit_rate:.3f} (>=0.02); "
              f"lambda1=0.5: {low1.hit_rate:.3f} (<0.01)")
    report(7, ok, detail)
    assert ok, detail


# -- criterion 8: conformation count -------------------------------------------

def test_criterion_8_conformation_count():
    grid = LatticeGrid(4, 4)
    t0 = time.perf_counter()
    counts = {sym: count_conformations(14, grid, symmetry=sym)
              for sym in ("none", "translation", "point_group", "point_group_reversal")}
    anchored = count_conformations(14, grid, symmetry="none", anchor_parity=True)
    dt = time.perf_counter() - t0
    got = counts["point_group"]
    ok = got == 416 and dt < 300
    detail = (f"point-group orbits = {got}, publication quotes 416; full "
              f"convention table: raw={counts['none']} parity-anchored={anchored} "
              f"translation={counts['translation']} point_group={counts['point_group']} "
              f"+reversal={counts['point_group_reversal']}; note raw = 7 x 416 "
              f"exactly [{dt:.1f}s]")
    report(8, ok, detail)
    assert ok, detail


def test_conformation_count_internal_consistency():
    """The achievable counts for the 14-bead/4x4 case, frozen from an
    independent enumeration, and their exact mutual relations."""
    grid = LatticeGrid(4, 4)
    raw = count_conformations(14, grid, symmetry="none")
    anchored = count_conformations(14, grid, symmetry="none", anchor_parity=True)
    pg = count_conformations(14, grid, symmetry="point_group")
    pgr = count_conformations(14, grid, symmetry="point_group_reversal")
    assert raw == 2912
    assert anchored == raw // 2 == 1456       # parity mirror halves exactly
    assert pg == raw // 8 == 364              # no walk is fixed by a symmetry
    assert pgr == 187                         # reversal-symmetric shapes exist
    assert raw == 7 * 416                     # the published figure times 7


# -- criterion 9: trace shape ---------------------------------------------------

@heavy
def test_criterion_9_trace_shape(qubo_batches):
    s30 = qubo_batches["S30"]
    assert s30.trace_terms is not None, "S30 batch must be trace-enabled"
    hits = [k for k, rec in enumerate(s30.records) if rec.hit]
    ok_n = len(hits) >= 50
    final_ok = all(s30.records[k].e_hp == -15 and s30.records[k].e1 == 0
                   and s30.records[k].e2 == 0 and s30.records[k].e3 == 0
                   for k in hits)
    # mid-run excursions below the true minimum (possible only while some
    # constraint is broken)
    dips = sum(bool((s30.trace_terms[k, :-1, 0] < -15).any()) for k in hits)
    frac = dips / max(1, len(hits))
    ok = ok_n and final_ok and frac >= 0.90
    detail = (f"{len(hits)} successful runs (>=50); finals all at "
              f"E_HP=-15 with zero constraints: {final_ok}; mid-run E_HP < -15 "
              f"in {frac:.0%} of them (>=90%)")
    report(9, ok, detail)
    assert ok, detail


@heavy
def test_constraint_relaxation_order(qubo_batches):
    # over many runs the self-avoidance term settles to zero well before
    # the one-site-per-bead and connectivity terms
    s30 = qubo_batches["S30"]
    terms = s30.trace_terms
    assert terms is not None

    def first_zero(series) -> int:
        idx = np.flatnonzero(series == 0)
        return int(idx[0]) if len(idx) else len(series)

    firsts = np.array([[first_zero(terms[r, :, k]) for k in (1, 2, 3)]
                       for r in range(terms.shape[0])])
    med_e1, med_e2, med_e3 = np.median(firsts, axis=0)
    assert terms.shape[0] >= 50
    assert med_e2 < med_e1 and med_e2 < med_e3, (med_e1, med_e2, med_e3)


# -- criterion 10: incremental correctness ---------------------------------------

def test_criterion_10_flip_delta_matches_recompute():
    t0 = time.perf_counter()
    total = 0
    worst = 0.0
    for label, grid in [("S10", (5, 3)), ("S8", (4, 4)), ("S7", (4, 3))]:
        seq = get_sequence(label)
        model = encode(seq, LatticeGrid(*grid), LAMBDA_STAR)
        n = model.num_vars
        dense = np.zeros((n, n))
        dense[model.quad.i, model.quad.j] = model.quad.value
        dense += dense.T
        X = random_configs(n, 5_000, seed=ord(label[1]))
        fields = X @ dense + model.linear          # local fields, all configs
        gen = np.random.Generator(np.random.PCG64(17))
        base = qubo_energy_batch(model, X)
        for rep in range(7):
            ii = gen.integers(0, n, size=len(X))
            rows = np.arange(len(X))
            deltas = (1.0 - 2.0 * X[rows, ii]) * fields[rows, ii]
            flipped = X.copy()
            flipped[rows, ii] ^= 1
            full = qubo_energy_batch(model, flipped) - base
            worst = max(worst, float(np.max(np.abs(deltas - full))))
            total += len(X)
        # the public single-flip API agrees with the vectorized identity
        x = X[0]
        i = int(gen.integers(0, n))
        assert flip_delta(model, x, i, local_fields(model, x)) == pytest.approx(
            (1.0 - 2.0 * x[i]) * fields[0, i], abs=1e-12)
    dt = time.perf_counter() - t0
    ok = total >= 100_000 and worst <= 1e-9
    report(10, ok, f"flip deltas: {total} randomized trials, max error {worst:.2e} "
                   f"[{dt:.0f}s]")
    assert ok


def test_criterion_10_chain_delta_matches_recompute():
    # the kernel cross-checks its incremental energy against a full contact
    # recount every sweep; any wrong move delta trips the error flag
    t0 = time.perf_counter()
    seq = get_sequence("S14")
    sched = sa_qubo.AnnealSchedule(betas=(0.5, 1.0, 2.0), sweeps_per_beta=1_400)
    moves = 0
    for seed in range(2):
        run = sa_chain.run_chain_sa(seq, sched, seed=seed, validate_every=1)
        moves += (2 * len(seq) - 2) * sched.total_sweeps
    # plus exact per-proposal recounts through the reference implementation
    from hpfold import hp_energy
    state = sa_chain.ChainState.straight_rod(seq)
    gen = np.random.Generator(np.random.PCG64(5))
    checked = 0
    for _ in range(1_500):
        prop = (sa_chain.one_bead_move(state, gen)
                or sa_chain.two_bead_move(state, gen)
                or sa_chain.pivot_move(state, gen))
        if prop is None:
            continue
        nxt = prop.apply(state)
        assert nxt.energy == hp_energy(seq, nxt.conformation).e_hp
        checked += 1
        state = nxt
    dt = time.perf_counter() - t0
    ok = moves >= 100_000 and checked >= 1_000
    report(10, ok, f"chain deltas: {moves} kernel moves validated per sweep plus "
                   f"{checked} exact proposal recounts [{dt:.0f}s]")
    assert ok


# -- stretch targets (non-binding) -----------------------------------------------

@pytest.mark.skip(reason="non-binding stretch experiment; run scripts/stretch_s48_s64.py")
def test_stretch_s48_s64():
    pass
