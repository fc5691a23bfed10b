"""Ground truth by exhaustive search.

Three oracles back the rest of the toolkit:

* depth-first self-avoiding-walk enumeration (free lattice or
  grid-confined) for exact minimum energies and ground-state degeneracies,
* conformation counting on finite grids under explicit symmetry
  conventions,
* brute-force minimization of small QUBO instances by Gray-code scan over
  the full spin space.

Free-lattice enumeration fixes the first step to +x and the first turn to
+y, which visits exactly one representative per point-group orbit of
directed walks (the straight rod, which never turns, also appears once).
The pruning bound is optimistic (each future H bead can gain at most 3
contacts), hence never discards an optimal or optimum-tying branch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .encoding import QuboModel, SpinConfig
from .hp import (Conformation, HpSequence, LatticeGrid, NEIGHBOR_STEPS,
                 canonical_form)


class OracleCapError(ValueError):
    """Requested exhaustive computation exceeds the configured cap."""


@dataclass(frozen=True)
class EnumerationResult:
    """Exhaustive-search outcome for one sequence.

    ground_states holds one canonical conformation per point-group orbit;
    degeneracy is their count (chain reversal not quotiented).
    """

    e_min: int
    ground_states: tuple[Conformation, ...]
    degeneracy: int
    states_explored: int

    @property
    def unique(self) -> bool:
        return self.degeneracy == 1

    def degeneracy_mod_reversal(self) -> int:
        """Ground-state count when a chain and its reverse are identified."""
        return len({canonical_form(c, include_reversal=True).coords
                    for c in self.ground_states})


def enumerate_ground_states(seq: HpSequence, grid: LatticeGrid | None = None,
                            cap: int = 18) -> EnumerationResult:
    """Exact minimum energy and ground states of a sequence.

    Without a grid, walks are enumerated on the unbounded lattice with
    symmetry fixing; with a grid, every placement is enumerated and
    ground states are deduplicated by canonical form.
    """
    n = len(seq)
    if grid is None:
        if n > cap:
            raise OracleCapError(
                f"free-lattice enumeration capped at N={cap} (N={n} would visit "
                f"~{3 ** (n - 2) // 8:.1e} walks); raise cap explicitly to force")
        return _enumerate_free(seq)
    est = grid.n_sites * 3 ** min(n - 1, grid.n_sites)
    if est > 1e9:
        raise OracleCapError(
            f"grid enumeration of N={n} on {grid} would visit ~{est:.1e} states")
    return _enumerate_grid(seq, grid)


def _enumerate_free(seq: HpSequence) -> EnumerationResult:
    n = len(seq)
    hp = [seq.is_hydrophobic(f) for f in range(1, n + 1)]
    h_remaining = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        h_remaining[i] = h_remaining[i + 1] + (1 if hp[i] else 0)

    best = [1]          # any real energy is <= 0
    ground: list[tuple] = []
    explored = [0]
    occ: dict[tuple, int] = {(0, 0): 0, (1, 0): 1}
    coords: list[tuple] = [(0, 0), (1, 0)] + [None] * (n - 2)

    def contacts(idx: int, x: int, y: int) -> int:
        c = 0
        for dx, dy in NEIGHBOR_STEPS:
            j = occ.get((x + dx, y + dy))
            if j is not None and j < idx - 1 and hp[j]:
                c += 1
        return c

    def dfs(idx: int, e: int, turned: bool):
        explored[0] += 1
        if idx == n:
            if e < best[0]:
                best[0] = e
                ground.clear()
            if e == best[0]:
                ground.append(tuple(coords))
            return
        if e - 3 * h_remaining[idx] > best[0]:
            return
        x0, y0 = coords[idx - 1]
        for dx, dy in NEIGHBOR_STEPS:
            if not turned and (dx < 0 or dy < 0):
                continue  # fix the first turn to +y
            x, y = x0 + dx, y0 + dy
            if (x, y) in occ:
                continue
            de = -contacts(idx, x, y) if hp[idx] else 0
            occ[(x, y)] = idx
            coords[idx] = (x, y)
            dfs(idx + 1, e + de, turned or dy != 0)
            del occ[(x, y)]

    if n == 2:
        ground.append(tuple(coords[:2]))
        best[0] = 0
        explored[0] = 1
    else:
        dfs(2, 0, False)
    states = tuple(canonical_form(Conformation(c)) for c in ground)
    return EnumerationResult(e_min=best[0], ground_states=states,
                             degeneracy=len(states), states_explored=explored[0])


def _enumerate_grid(seq: HpSequence, grid: LatticeGrid) -> EnumerationResult:
    n = len(seq)
    hp = [seq.is_hydrophobic(f) for f in range(1, n + 1)]
    h_remaining = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        h_remaining[i] = h_remaining[i + 1] + (1 if hp[i] else 0)
    best = [1]
    ground: set[tuple] = set()
    explored = [0]
    occ: dict[tuple, int] = {}
    coords: list = [None] * n

    def contacts(idx, x, y):
        c = 0
        for dx, dy in NEIGHBOR_STEPS:
            j = occ.get((x + dx, y + dy))
            if j is not None and j < idx - 1 and hp[j]:
                c += 1
        return c

    def dfs(idx, e):
        explored[0] += 1
        if idx == n:
            if e < best[0]:
                best[0] = e
                ground.clear()
            if e == best[0]:
                ground.add(canonical_form(Conformation(tuple(coords))).coords)
            return
        if e - 3 * h_remaining[idx] > best[0]:
            return
        x0, y0 = coords[idx - 1]
        for dx, dy in NEIGHBOR_STEPS:
            x, y = x0 + dx, y0 + dy
            if not grid.contains((x, y)) or (x, y) in occ:
                continue
            de = -contacts(idx, x, y) if hp[idx] else 0
            occ[(x, y)] = idx
            coords[idx] = (x, y)
            dfs(idx + 1, e + de)
            del occ[(x, y)]

    for start in grid.sites():
        occ[start] = 0
        coords[0] = start
        dfs(1, 0)
        del occ[start]
    return EnumerationResult(e_min=best[0], ground_states=tuple(Conformation(c) for c in sorted(ground)),
                             degeneracy=len(ground), states_explored=explored[0])


def enumerate_walks_free(n: int, symmetry_fixed: bool = True):
    """All n-bead self-avoiding walks on the unbounded lattice, as coordinate
    tuples anchored at the origin with first step +x.

    With symmetry_fixed=True the first turn is restricted to +y, yielding
    exactly one walk per point-group orbit.  With symmetry_fixed=False the
    first turn is free (both mirror senses appear); the full directed count
    from a fixed origin is 4x this, by rotating the first step.
    """
    walks: list[tuple] = []
    occ = {(0, 0): 0, (1, 0): 1}
    coords = [(0, 0), (1, 0)] + [None] * (n - 2)

    def dfs(idx, turned):
        if idx == n:
            walks.append(tuple(coords))
            return
        x0, y0 = coords[idx - 1]
        for dx, dy in NEIGHBOR_STEPS:
            if symmetry_fixed and not turned and (dx < 0 or dy < 0):
                continue
            x, y = x0 + dx, y0 + dy
            if (x, y) in occ:
                continue
            occ[(x, y)] = idx
            coords[idx] = (x, y)
            dfs(idx + 1, turned or dy != 0)
            del occ[(x, y)]

    if n == 2:
        return [tuple(coords[:2])]
    dfs(2, False)
    return walks


SYMMETRY_CONVENTIONS = ("none", "translation", "point_group", "point_group_reversal")


def count_conformations(n: int, grid: LatticeGrid, symmetry: str = "point_group",
                        anchor_parity: bool = False) -> int:
    """Count distinct n-bead conformations on a finite grid.

    symmetry selects the identification convention:
      * "none": directed placements (translated copies on the grid distinct),
      * "translation": shapes, translated copies identified,
      * "point_group": shapes modulo the 8 lattice symmetries,
      * "point_group_reversal": additionally identify a chain with its
        reverse.
    anchor_parity restricts bead 1 to even-parity sites, the state space
    the spin encoding can represent (only meaningful with symmetry="none").
    """
    if symmetry not in SYMMETRY_CONVENTIONS:
        raise ValueError(f"symmetry must be one of {SYMMETRY_CONVENTIONS}")
    est = grid.n_sites * 3 ** min(n - 1, grid.n_sites)
    if est > 1e9:
        raise OracleCapError(f"counting N={n} on {grid} would visit ~{est:.1e} states")

    raw = 0
    seen: set[tuple] = set()
    occ: set[tuple] = set()
    coords: list = [None] * n

    def record():
        nonlocal raw
        raw += 1
        if symmetry == "none":
            return
        conf = Conformation(tuple(coords))
        if symmetry == "translation":
            mx = min(x for x, _ in conf.coords)
            my = min(y for _, y in conf.coords)
            seen.add(tuple((x - mx, y - my) for x, y in conf.coords))
        else:
            seen.add(canonical_form(
                conf, include_reversal=(symmetry == "point_group_reversal")).coords)

    def dfs(idx):
        if idx == n:
            record()
            return
        x0, y0 = coords[idx - 1]
        for dx, dy in NEIGHBOR_STEPS:
            x, y = x0 + dx, y0 + dy
            if not grid.contains((x, y)) or (x, y) in occ:
                continue
            occ.add((x, y))
            coords[idx] = (x, y)
            dfs(idx + 1)
            occ.discard((x, y))

    for start in grid.sites():
        if anchor_parity and (start[0] + start[1]) % 2 != 0:
            continue
        occ.add(start)
        coords[0] = start
        if n == 1:
            record()
        else:
            dfs(1)
        occ.discard(start)
    return raw if symmetry == "none" else len(seen)


@njit(cache=True, nogil=True)
def _gray_scan(nvar, indptr, indices, comp_data, comp_lin, comp_off, weights,
               tol, max_store):
    """Gray-code sweep over all 2^nvar configurations with exact integer
    term bookkeeping; returns (best_energy, count, stored gray counters)."""
    n_comp = comp_lin.shape[0]
    x = np.zeros(nvar, dtype=np.uint8)
    fields = comp_lin.copy()            # (n_comp, nvar) int64
    terms = comp_off.copy()             # (n_comp,) int64
    energy = 0.0
    for c in range(n_comp):
        energy += weights[c] * terms[c]
    best = energy
    count = np.int64(1)
    stored = np.zeros(max_store, dtype=np.uint64)
    n_stored = 1
    stored[0] = np.uint64(0)
    total = np.uint64(1) << np.uint64(nvar)
    k = np.uint64(1)
    while k < total:
        kk = k
        bit = 0
        while (kk & np.uint64(1)) == np.uint64(0):
            kk >>= np.uint64(1)
            bit += 1
        sign = np.int64(1) if x[bit] == 0 else np.int64(-1)
        x[bit] ^= np.uint8(1)
        energy = 0.0
        for c in range(n_comp):
            terms[c] += sign * fields[c, bit]
            energy += weights[c] * terms[c]
        for p in range(indptr[bit], indptr[bit + 1]):
            j = indices[p]
            for c in range(n_comp):
                fields[c, j] += sign * comp_data[p, c]
        if energy < best - tol:
            best = energy
            count = np.int64(1)
            n_stored = 0
            if max_store > 0:
                stored[0] = k
                n_stored = 1
        elif energy <= best + tol:
            count += 1
            if n_stored < max_store:
                stored[n_stored] = k
                n_stored += 1
        k += np.uint64(1)
    return best, count, stored[:n_stored]


@dataclass(frozen=True)
class BruteForceResult:
    min_energy: float
    argmin_count: int
    argmins: tuple[SpinConfig, ...]  # up to max_argmins of them

    @property
    def truncated(self) -> bool:
        return len(self.argmins) < self.argmin_count


def brute_force_qubo(model: QuboModel, cap: int = 26, tol: float = 1e-9,
                     max_argmins: int = 4096) -> BruteForceResult:
    """Exhaustive scan over all 2^num_vars configurations.

    Exact: term energies are tracked as integers and recombined with the
    lambda weights at every step, so there is no float drift regardless of
    scan length.
    """
    n = model.num_vars
    if n > cap:
        raise OracleCapError(f"brute force over 2^{n} states exceeds cap 2^{cap}")
    names = ("e_hp", "e1", "e2", "e3")
    comps = [model.components[name] for name in names]
    weights = np.array([1.0, *model.lambdas.as_tuple()], dtype=np.float64)
    comp_lin = np.stack([c.linear for c in comps]).astype(np.int64)
    comp_off = np.array([c.offset for c in comps], dtype=np.int64)

    # one symmetric CSR over the union of sparsity patterns, with one
    # integer value column per component
    pair_vals: dict[tuple[int, int], list[int]] = {}
    for ci, c in enumerate(comps):
        for i, j, v in zip(c.quad.i, c.quad.j, c.quad.value):
            key = (int(i), int(j))
            if key not in pair_vals:
                pair_vals[key] = [0, 0, 0, 0]
            pair_vals[key][ci] += int(v)
    if pair_vals:
        pairs = np.array(sorted(pair_vals), dtype=np.int64)
        vals = np.array([pair_vals[tuple(p)] for p in pairs], dtype=np.int64)
    else:
        pairs = np.empty((0, 2), dtype=np.int64)
        vals = np.empty((0, 4), dtype=np.int64)
    rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
    data = np.concatenate([vals, vals])
    order = np.argsort(rows, kind="stable")
    rows, cols, data = rows[order], cols[order], data[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    indptr = np.cumsum(indptr)

    best, count, stored = _gray_scan(n, indptr, cols.astype(np.int64), data,
                                     comp_lin, comp_off, weights, tol, max_argmins)
    argmins = []
    for k in stored:
        gray = int(k) ^ (int(k) >> 1)
        bits = [(gray >> b) & 1 for b in range(n)]
        argmins.append(SpinConfig(bits=tuple(bits)))
    return BruteForceResult(min_energy=float(best), argmin_count=int(count),
                            argmins=tuple(argmins))


@dataclass(frozen=True)
class DesignabilityResult:
    """Exhaustive design study over all 2^n H/P sequences of length n."""

    n: int
    n_structures: int                       # point-group classes of directed walks
    sequence_e_min: np.ndarray              # (2^n,) int64, indexed by H-bitmask
    sequence_degeneracy: np.ndarray         # (2^n,) int64
    designability: dict[int, int]           # structure id -> #designing sequences
    structures: tuple[Conformation, ...]    # canonical conformation per id

    def mask_of(self, seq: HpSequence) -> int:
        if len(seq) != self.n:
            raise ValueError(f"sequence length {len(seq)} != scan length {self.n}")
        return sum(1 << i for i, b in enumerate(seq.beads) if b == "H")

    @property
    def unique_fraction(self) -> float:
        return float(np.mean(self.sequence_degeneracy == 1))


def designability_scan(n: int, cap: int = 12) -> DesignabilityResult:
    """Ground-state energy and degeneracy for every H/P sequence of length
    n, plus per-structure designing-sequence counts.

    Walk shapes are enumerated once; each sequence's energies over all
    shapes follow from the shapes' contact maps via bitmask arithmetic.
    """
    if n > cap:
        raise OracleCapError(f"designability scan of 2^{n} sequences exceeds cap n={cap}")
    walks = enumerate_walks_free(n)
    masks = np.arange(1 << n, dtype=np.int64)
    best = np.ones(1 << n, dtype=np.int64)
    deg = np.zeros(1 << n, dtype=np.int64)
    argmin = np.full(1 << n, -1, dtype=np.int64)
    for sid, coords in enumerate(walks):
        index_of = {c: i for i, c in enumerate(coords)}
        contacts = []
        for i, (x, y) in enumerate(coords):
            for dx, dy in ((1, 0), (0, 1)):
                j = index_of.get((x + dx, y + dy))
                if j is not None and abs(j - i) > 1:
                    contacts.append((i, j))
        e = np.zeros(1 << n, dtype=np.int64)
        for i, j in contacts:
            e -= (masks >> i) & (masks >> j) & 1
        better = e < best
        tie = e == best
        best[better] = e[better]
        deg[better] = 1
        argmin[better] = sid
        deg[tie] += 1
    designability: dict[int, int] = {}
    unique = deg == 1
    for sid in argmin[unique]:
        designability[int(sid)] = designability.get(int(sid), 0) + 1
    structures = tuple(canonical_form(Conformation(w)) for w in walks)
    return DesignabilityResult(n=n, n_structures=len(walks), sequence_e_min=best,
                               sequence_degeneracy=deg, designability=designability,
                               structures=structures)
