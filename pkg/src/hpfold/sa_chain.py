"""Conventional explicit-chain simulated annealing baseline.

The chain lives on the unbounded lattice, represented by bead coordinates
plus an occupancy index, and is annealed with the standard move set: end
rotations and interior corner flips (one-bead), crankshaft reflections
(two-bead), and tail pivots through the 7 nonidentity point-group
elements.  One sweep attempts N-1 one-bead, N-2 two-bead and 1 pivot
move, in an order shuffled per sweep.  Every accepted move preserves
self-avoidance by construction; the energy is plain E_HP.

Two engines are provided: pure-Python proposal functions operating on an
immutable ChainState (used by the reversibility and invariance tests and
available as a slow reference runner), and a jitted kernel used for the
production batches.  Both implement identical proposal distributions.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .hp import (Conformation, HpSequence, NEIGHBOR_STEPS, POINT_GROUP,
                 apply_symmetry, hp_energy, validate_conformation)
from .sa_qubo import (AnnealSchedule, U64, _rng_below, _rng_init, _rng_next,
                      _rng_uniform, default_schedule, derive_run_seed,
                      hit_rate_summary)

DEFAULT_CHAIN_SWEEPS_PER_BETA = 100_000


def default_chain_schedule(sweeps_per_beta: int = DEFAULT_CHAIN_SWEEPS_PER_BETA) -> AnnealSchedule:
    """Same 25 temperatures as the spin anneal, 10^5 sweeps at each."""
    return default_schedule(sweeps_per_beta=sweeps_per_beta)


# ---------------------------------------------------------------------------
# reference implementation on immutable states

@dataclass(frozen=True)
class ChainState:
    """A valid self-avoiding chain plus its occupancy index and energy."""

    seq: HpSequence
    conformation: Conformation
    energy: int

    @classmethod
    def from_conformation(cls, seq: HpSequence, conf: Conformation) -> "ChainState":
        return cls(seq=seq, conformation=conf, energy=hp_energy(seq, conf).e_hp)

    @classmethod
    def straight_rod(cls, seq: HpSequence) -> "ChainState":
        conf = Conformation(tuple((i, 0) for i in range(len(seq))))
        return cls(seq=seq, conformation=conf, energy=0)

    @property
    def occupancy(self) -> dict:
        return {c: i for i, c in enumerate(self.conformation.coords)}


@dataclass(frozen=True)
class Proposal:
    """A candidate move: new coordinates for a subset of beads (0-indexed)
    and the exact energy change it would cause."""

    moves: tuple[tuple[int, tuple[int, int]], ...]
    delta_e: int

    def apply(self, state: ChainState) -> ChainState:
        coords = list(state.conformation.coords)
        for bead, pos in self.moves:
            coords[bead] = pos
        return ChainState(seq=state.seq, conformation=Conformation(tuple(coords)),
                          energy=state.energy + self.delta_e)


def _contacts_at(state: ChainState, occ: dict, bead: int, pos: tuple[int, int],
                 moving: frozenset[int]) -> int:
    """H contacts bead would have at pos, ignoring beads in `moving` and
    chain neighbors."""
    if state.seq.beads[bead] != "H":
        return 0
    c = 0
    for dx, dy in NEIGHBOR_STEPS:
        j = occ.get((pos[0] + dx, pos[1] + dy))
        if j is not None and j not in moving and abs(j - bead) > 1 \
                and state.seq.beads[j] == "H":
            c += 1
    return c


def _delta_e(state: ChainState, occ: dict, moves: list[tuple[int, tuple[int, int]]]) -> int:
    moving = frozenset(b for b, _ in moves)
    old = sum(_contacts_at(state, occ, b, state.conformation.coords[b], moving)
              for b, _ in moves)
    new = sum(_contacts_at(state, occ, b, pos, moving) for b, pos in moves)
    return -(new - old)


def propose_one_bead(state: ChainState, bead: int, direction: int) -> Proposal | None:
    """End rotation (bead 0 or N-1, direction picks the anchor's neighbor)
    or interior corner flip (direction ignored).  None when the geometry
    admits no move or the target is occupied."""
    coords = state.conformation.coords
    n = len(coords)
    occ = state.occupancy
    if bead in (0, n - 1):
        anchor = coords[1] if bead == 0 else coords[n - 2]
        dx, dy = NEIGHBOR_STEPS[direction]
        target = (anchor[0] + dx, anchor[1] + dy)
        if target == coords[bead] or target in occ:
            return None
    else:
        prev, nxt = coords[bead - 1], coords[bead + 1]
        if abs(nxt[0] - prev[0]) != 1 or abs(nxt[1] - prev[1]) != 1:
            return None  # chain neighbors collinear: no corner here
        target = (prev[0] + nxt[0] - coords[bead][0], prev[1] + nxt[1] - coords[bead][1])
        if target in occ:
            return None
    moves = [(bead, target)]
    return Proposal(moves=tuple(moves), delta_e=_delta_e(state, occ, moves))


def propose_crankshaft(state: ChainState, i: int) -> Proposal | None:
    """Reflect the U formed by beads i..i+3 (when present) to its far side."""
    coords = state.conformation.coords
    if i < 0 or i + 3 >= len(coords):
        return None
    p0, p1, p2, p3 = coords[i], coords[i + 1], coords[i + 2], coords[i + 3]
    if (p1[0] - p0[0], p1[1] - p0[1]) != (p2[0] - p3[0], p2[1] - p3[1]):
        return None
    if abs(p3[0] - p0[0]) + abs(p3[1] - p0[1]) != 1:
        return None
    q1 = (2 * p0[0] - p1[0], 2 * p0[1] - p1[1])
    q2 = (2 * p3[0] - p2[0], 2 * p3[1] - p2[1])
    occ = state.occupancy
    if q1 in occ or q2 in occ:
        return None
    moves = [(i + 1, q1), (i + 2, q2)]
    return Proposal(moves=tuple(moves), delta_e=_delta_e(state, occ, moves))


def propose_pivot(state: ChainState, k: int, sym_index: int) -> Proposal | None:
    """Apply nonidentity point-group element sym_index (1..7) to the tail
    beads k+1..N-1 about bead k; None if the image hits the head."""
    coords = state.conformation.coords
    n = len(coords)
    if not 0 <= k < n - 1:
        return None
    if not 1 <= sym_index < 8:
        raise ValueError("sym_index must be 1..7 (identity excluded)")
    px, py = coords[k]
    rel = tuple((x - px, y - py) for x, y in coords[k + 1:])
    img = apply_symmetry(rel, POINT_GROUP[sym_index])
    occ = state.occupancy
    moves = []
    head = set(coords[:k + 1])
    for off, (rx, ry) in enumerate(img):
        q = (px + rx, py + ry)
        if q in head:
            return None
        moves.append((k + 1 + off, q))
    return Proposal(moves=tuple(moves), delta_e=_delta_e(state, occ, moves))


def one_bead_move(state: ChainState, rng: np.random.Generator) -> Proposal | None:
    bead = int(rng.integers(len(state.conformation.coords)))
    direction = int(rng.integers(4))
    return propose_one_bead(state, bead, direction)


def two_bead_move(state: ChainState, rng: np.random.Generator) -> Proposal | None:
    n = len(state.conformation.coords)
    if n < 4:
        return None
    return propose_crankshaft(state, int(rng.integers(n - 3)))


def pivot_move(state: ChainState, rng: np.random.Generator) -> Proposal | None:
    n = len(state.conformation.coords)
    k = int(rng.integers(n - 1))
    return propose_pivot(state, k, 1 + int(rng.integers(7)))


def run_chain_sa_reference(seq: HpSequence, schedule: AnnealSchedule,
                           seed: int = 0) -> ChainState:
    """Slow but transparent annealing loop over the reference moves; for
    tests and cross-validation on short chains."""
    rng = np.random.Generator(np.random.PCG64(seed))
    state = ChainState.straight_rod(seq)
    n = len(seq)
    movers = [one_bead_move] * (n - 1) + [two_bead_move] * (n - 2) + [pivot_move]
    for beta in schedule.betas:
        for _ in range(schedule.sweeps_per_beta):
            order = rng.permutation(len(movers))
            for m in order:
                prop = movers[m](state, rng)
                if prop is None:
                    continue
                if prop.delta_e <= 0 or rng.random() < np.exp(-beta * prop.delta_e):
                    state = prop.apply(state)
    return state


# ---------------------------------------------------------------------------
# jitted engine

_SYMS = np.array(POINT_GROUP, dtype=np.int64)  # (8, 4) as (a, b, c, d)


@njit(cache=True, inline="always")
def _kcontacts(occ, hp, bead, x, y, n):
    c = 0
    for d in range(4):
        dx = (1, -1, 0, 0)[d]
        dy = (0, 0, 1, -1)[d]
        o = occ[x + dx, y + dy]
        if o != 0:
            j = o - 1
            if (j < bead - 1 or j > bead + 1) and hp[j]:
                c += 1
    return c


@njit(cache=True, nogil=True)
def _chain_kernel(n, hp, betas, sweeps_per_beta, seed, trace_every, validate_every):
    """Anneal one chain; returns final coords, energy, E_HP trace, move
    acceptance count, and an error flag (nonzero if a consistency check
    failed)."""
    m = 4 * n + 10
    margin = n + 2
    rng = _rng_init(seed)
    occ = np.zeros((m, m), dtype=np.int32)
    xs = np.empty(n, dtype=np.int64)
    ys = np.empty(n, dtype=np.int64)
    x0 = (m - n) // 2
    y0 = m // 2
    for i in range(n):
        xs[i] = x0 + i
        ys[i] = y0
        occ[x0 + i, y0] = i + 1
    minx, maxx, miny, maxy = x0, x0 + n - 1, y0, y0
    energy = np.int64(0)

    n_tags = 2 * n - 2
    tags = np.empty(n_tags, dtype=np.int8)
    total_sweeps = len(betas) * sweeps_per_beta
    n_trace = total_sweeps // trace_every if trace_every > 0 else 0
    trace_sweep = np.zeros(n_trace, dtype=np.int64)
    trace_e = np.zeros(n_trace, dtype=np.int64)
    trace_k = 0
    qx = np.empty(n, dtype=np.int64)
    qy = np.empty(n, dtype=np.int64)
    accepted = np.int64(0)
    err = 0
    sweep_count = 0

    for bi in range(len(betas)):
        beta = betas[bi]
        for _ in range(sweeps_per_beta):
            # shuffled move-type order with counts (n-1, n-2, 1)
            t = 0
            for _i in range(n - 1):
                tags[t] = 0
                t += 1
            for _i in range(n - 2):
                tags[t] = 1
                t += 1
            tags[t] = 2
            for t in range(n_tags - 1, 0, -1):
                r = _rng_below(rng, t + 1)
                tmp = tags[t]
                tags[t] = tags[r]
                tags[r] = tmp

            for t in range(n_tags):
                tag = tags[t]
                if tag == 0:
                    # one-bead: end rotation or corner flip
                    b = _rng_below(rng, n)
                    if b == 0 or b == n - 1:
                        a = 1 if b == 0 else n - 2
                        d = _rng_below(rng, 4)
                        dx = (1, -1, 0, 0)[d]
                        dy = (0, 0, 1, -1)[d]
                        tx = xs[a] + dx
                        ty = ys[a] + dy
                        if (tx == xs[b] and ty == ys[b]) or occ[tx, ty] != 0:
                            continue
                    else:
                        ddx = xs[b + 1] - xs[b - 1]
                        ddy = ys[b + 1] - ys[b - 1]
                        if ddx * ddx != 1 or ddy * ddy != 1:
                            continue
                        tx = xs[b - 1] + xs[b + 1] - xs[b]
                        ty = ys[b - 1] + ys[b + 1] - ys[b]
                        if occ[tx, ty] != 0:
                            continue
                    de = np.int64(0)
                    if hp[b]:
                        old_c = _kcontacts(occ, hp, b, xs[b], ys[b], n)
                        new_c = _kcontacts(occ, hp, b, tx, ty, n)
                        de = -(new_c - old_c)
                    if de <= 0 or (beta * de < 45.0 and _rng_uniform(rng) < np.exp(-beta * de)):
                        occ[xs[b], ys[b]] = 0
                        occ[tx, ty] = b + 1
                        xs[b] = tx
                        ys[b] = ty
                        energy += de
                        accepted += 1
                        if tx < minx: minx = tx
                        if tx > maxx: maxx = tx
                        if ty < miny: miny = ty
                        if ty > maxy: maxy = ty
                elif tag == 1:
                    # crankshaft on beads i..i+3
                    if n < 4:
                        continue
                    i = _rng_below(rng, n - 3)
                    if xs[i + 1] - xs[i] != xs[i + 2] - xs[i + 3] or \
                       ys[i + 1] - ys[i] != ys[i + 2] - ys[i + 3]:
                        continue
                    bdx = xs[i + 3] - xs[i]
                    bdy = ys[i + 3] - ys[i]
                    if bdx * bdx + bdy * bdy != 1:
                        continue
                    q1x = 2 * xs[i] - xs[i + 1]
                    q1y = 2 * ys[i] - ys[i + 1]
                    q2x = 2 * xs[i + 3] - xs[i + 2]
                    q2y = 2 * ys[i + 3] - ys[i + 2]
                    if occ[q1x, q1y] != 0 or occ[q2x, q2y] != 0:
                        continue
                    de = np.int64(0)
                    if hp[i + 1]:
                        de -= _kcontacts(occ, hp, i + 1, q1x, q1y, n) \
                            - _kcontacts(occ, hp, i + 1, xs[i + 1], ys[i + 1], n)
                    if hp[i + 2]:
                        de -= _kcontacts(occ, hp, i + 2, q2x, q2y, n) \
                            - _kcontacts(occ, hp, i + 2, xs[i + 2], ys[i + 2], n)
                    if de <= 0 or (beta * de < 45.0 and _rng_uniform(rng) < np.exp(-beta * de)):
                        occ[xs[i + 1], ys[i + 1]] = 0
                        occ[xs[i + 2], ys[i + 2]] = 0
                        occ[q1x, q1y] = i + 2
                        occ[q2x, q2y] = i + 3
                        xs[i + 1] = q1x
                        ys[i + 1] = q1y
                        xs[i + 2] = q2x
                        ys[i + 2] = q2y
                        energy += de
                        accepted += 1
                        if q1x < minx or q2x < minx: minx = min(q1x, q2x, minx)
                        if q1x > maxx or q2x > maxx: maxx = max(q1x, q2x, maxx)
                        if q1y < miny or q2y < miny: miny = min(q1y, q2y, miny)
                        if q1y > maxy or q2y > maxy: maxy = max(q1y, q2y, maxy)
                else:
                    # pivot: symmetry g applied to tail k+1..n-1 about bead k
                    k = _rng_below(rng, n - 1)
                    g = 1 + _rng_below(rng, 7)
                    sa = _SYMS[g, 0]
                    sb = _SYMS[g, 1]
                    sc = _SYMS[g, 2]
                    sd = _SYMS[g, 3]
                    px = xs[k]
                    py = ys[k]
                    collision = False
                    old_ht = np.int64(0)
                    new_ht = np.int64(0)
                    for j in range(k + 1, n):
                        rx = xs[j] - px
                        ry = ys[j] - py
                        qx[j] = px + sa * rx + sb * ry
                        qy[j] = py + sc * rx + sd * ry
                        o = occ[qx[j], qy[j]]
                        if o != 0 and o - 1 <= k:
                            collision = True
                            break
                    if collision:
                        continue
                    for j in range(k + 1, n):
                        if not hp[j]:
                            continue
                        for d in range(4):
                            dx = (1, -1, 0, 0)[d]
                            dy = (0, 0, 1, -1)[d]
                            o = occ[xs[j] + dx, ys[j] + dy]
                            if o != 0 and o - 1 <= k and o - 1 < j - 1 and hp[o - 1]:
                                old_ht += 1
                            o = occ[qx[j] + dx, qy[j] + dy]
                            if o != 0 and o - 1 <= k and o - 1 < j - 1 and hp[o - 1]:
                                new_ht += 1
                    de = -(new_ht - old_ht)
                    if de <= 0 or (beta * de < 45.0 and _rng_uniform(rng) < np.exp(-beta * de)):
                        for j in range(k + 1, n):
                            occ[xs[j], ys[j]] = 0
                        for j in range(k + 1, n):
                            occ[qx[j], qy[j]] = j + 1
                            xs[j] = qx[j]
                            ys[j] = qy[j]
                            if qx[j] < minx: minx = qx[j]
                            if qx[j] > maxx: maxx = qx[j]
                            if qy[j] < miny: miny = qy[j]
                            if qy[j] > maxy: maxy = qy[j]
                        energy += de
                        accepted += 1
                # recenter when the conservative bounding box nears the edge
                if minx < margin or miny < margin or maxx >= m - margin or maxy >= m - margin:
                    for j in range(n):
                        occ[xs[j], ys[j]] = 0
                    minx = maxx = xs[0]
                    miny = maxy = ys[0]
                    for j in range(n):
                        if xs[j] < minx: minx = xs[j]
                        if xs[j] > maxx: maxx = xs[j]
                        if ys[j] < miny: miny = ys[j]
                        if ys[j] > maxy: maxy = ys[j]
                    sx = m // 2 - (minx + maxx) // 2
                    sy = m // 2 - (miny + maxy) // 2
                    for j in range(n):
                        xs[j] += sx
                        ys[j] += sy
                        occ[xs[j], ys[j]] = j + 1
                    minx += sx
                    maxx += sx
                    miny += sy
                    maxy += sy

            sweep_count += 1
            if validate_every > 0 and sweep_count % validate_every == 0:
                full = np.int64(0)
                for b in range(n):
                    if hp[b]:
                        full += _kcontacts(occ, hp, b, xs[b], ys[b], n)
                full = -(full // 2)
                if full != energy:
                    err = 1
                for b in range(n - 1):
                    dd = abs(xs[b + 1] - xs[b]) + abs(ys[b + 1] - ys[b])
                    if dd != 1:
                        err = 2
                for b in range(n):
                    if occ[xs[b], ys[b]] != b + 1:
                        err = 3
            if trace_every > 0 and sweep_count % trace_every == 0 and trace_k < n_trace:
                trace_sweep[trace_k] = sweep_count
                trace_e[trace_k] = energy
                trace_k += 1
    coords = np.empty((n, 2), dtype=np.int64)
    for i in range(n):
        coords[i, 0] = xs[i]
        coords[i, 1] = ys[i]
    return coords, energy, trace_sweep[:trace_k], trace_e[:trace_k], accepted, err


@dataclass(frozen=True)
class ChainSaRun:
    """One explicit-chain annealing trajectory."""

    seed: int
    final: Conformation
    final_energy: int
    trace_sweeps: np.ndarray
    trace_e_hp: np.ndarray
    wall_time: float
    accepted_moves: int


def run_chain_sa(seq: HpSequence, schedule: AnnealSchedule | None = None,
                 seed: int = 0, trace_every: int = 1_000,
                 validate_every: int = 0) -> ChainSaRun:
    """One annealing run from a straight rod.  The returned conformation is
    translation-normalized to the origin."""
    if len(seq) < 3:
        raise ValueError("chain annealing needs N >= 3")
    if schedule is None:
        schedule = default_chain_schedule()
    hp = np.array([b == "H" for b in seq.beads], dtype=np.uint8)
    t0 = time.perf_counter()
    coords, energy, tr_s, tr_e, accepted, err = _chain_kernel(
        len(seq), hp, np.asarray(schedule.betas, dtype=np.float64),
        schedule.sweeps_per_beta, U64(seed % (1 << 64)), trace_every,
        validate_every)
    wall = time.perf_counter() - t0
    if err:
        raise ArithmeticError(f"chain kernel consistency check failed (code {err})")
    conf = Conformation(tuple((int(x), int(y)) for x, y in coords))
    conf = conf.translated(-min(c[0] for c in conf.coords),
                           -min(c[1] for c in conf.coords))
    final = ChainSaRun(seed=int(seed), final=conf, final_energy=int(energy),
                       trace_sweeps=tr_s, trace_e_hp=tr_e, wall_time=wall,
                       accepted_moves=int(accepted))
    assert validate_conformation(conf).valid
    return final


@dataclass(frozen=True)
class ChainBatchResult:
    runs: tuple[ChainSaRun, ...]
    n_runs: int
    hits: int
    hit_rate: float
    std_error: float
    base_seed: int


def chain_batch(seq: HpSequence, e_min: int, schedule: AnnealSchedule | None = None,
                n_runs: int = 100, base_seed: int = 0, parallelism: int = 1,
                trace_every: int = 0) -> ChainBatchResult:
    """n_runs independent chain anneals with derived per-run seeds; a hit is
    a final conformation at the known minimum energy."""
    if schedule is None:
        schedule = default_chain_schedule()
    seeds = [derive_run_seed(base_seed, r) for r in range(n_runs)]

    def one(seed: int) -> ChainSaRun:
        return run_chain_sa(seq, schedule, seed=seed, trace_every=trace_every)

    if parallelism <= 1:
        runs = [one(s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            runs = list(pool.map(one, seeds))
    hits = sum(r.final_energy == e_min for r in runs)
    p, se = hit_rate_summary(hits, n_runs)
    return ChainBatchResult(runs=tuple(runs), n_runs=n_runs, hits=hits,
                            hit_rate=p, std_error=se, base_seed=base_seed)
