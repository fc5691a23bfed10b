"""Distributed binary encoding of HP folding as a QUBO.

One binary variable per (bead, matching-parity site) pair.  The total
energy is

    E = E_HP + lambda1*E1 + lambda2*E2 + lambda3*E3

where E_HP counts H-H contacts (negatively), E1 forces each bead onto
exactly one site, E2 penalizes two same-parity beads sharing a site, and
E3 penalizes chain links whose endpoints are not lattice neighbors.  All
three constraint energies are non-negative for every spin configuration,
physical or not.

The assembled model keeps the four terms as separate integer-coefficient
components ("provenance"), so term energies can be recovered from the
model and the model can be re-weighted without rebuilding.  Since sigma^2
= sigma for binary variables, all diagonal quadratic mass is folded into
the linear coefficients; the expansion of E1 leaves a constant offset of
+1 per bead, tracked explicitly so reported energies are the true values,
not just argmin-equivalent ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .hp import Conformation, HpSequence, LatticeGrid, Coord, bead_parity, site_parity

TERM_NAMES = ("e_hp", "e1", "e2", "e3")


class EncodingError(ValueError):
    """Raised when a (sequence, grid) pair admits no valid variable map."""


class ContractError(ValueError):
    """Raised on caller contract violations such as length mismatches."""


@dataclass(frozen=True)
class LambdaParams:
    """Penalty strengths for the three constraint energies."""

    lambda1: float
    lambda2: float
    lambda3: float

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.lambda1, self.lambda2, self.lambda3)


@dataclass(frozen=True)
class VariableMap:
    """Bijection between (bead f, site s of matching parity) and a dense
    variable index.

    Ordering is bead-major (f = 1..N), sites row-major within each bead's
    parity class, so bead f's variables occupy the contiguous block
    [bead_start[f-1], bead_start[f]).
    """

    seq_len: int
    grid: LatticeGrid
    even_sites: tuple[Coord, ...]
    odd_sites: tuple[Coord, ...]
    bead_start: tuple[int, ...]  # length seq_len + 1

    @property
    def num_vars(self) -> int:
        return self.bead_start[-1]

    def sites_for_bead(self, f: int) -> tuple[Coord, ...]:
        """Sites available to 1-indexed bead f."""
        return self.even_sites if bead_parity(f) == 0 else self.odd_sites

    def index(self, f: int, site: Coord) -> int:
        """Variable index of (1-indexed bead f, site)."""
        if bead_parity(f) != site_parity(site):
            raise ContractError(f"bead {f} parity != site {site} parity")
        sites = self.sites_for_bead(f)
        try:
            local = sites.index(site)
        except ValueError:
            raise ContractError(f"site {site} not on grid {self.grid}") from None
        return self.bead_start[f - 1] + local

    def entry(self, index: int) -> tuple[int, Coord]:
        """Inverse lookup: variable index -> (1-indexed bead, site)."""
        if not 0 <= index < self.num_vars:
            raise ContractError(f"variable index {index} out of range")
        f = int(np.searchsorted(np.asarray(self.bead_start), index, side="right"))
        local = index - self.bead_start[f - 1]
        return f, self.sites_for_bead(f)[local]

    def entries(self):
        """Iterate (bead, site, index) in index order."""
        for f in range(1, self.seq_len + 1):
            base = self.bead_start[f - 1]
            for local, site in enumerate(self.sites_for_bead(f)):
                yield f, site, base + local


def build_variable_map(seq: HpSequence, grid: LatticeGrid) -> VariableMap:
    """Construct the variable map; errors out if a parity class is empty."""
    even_sites = tuple(grid.sites(parity=0))
    odd_sites = tuple(grid.sites(parity=1))
    if not even_sites or not odd_sites:
        raise EncodingError(
            f"grid {grid} has an empty parity class; need sites of both parities")
    n = len(seq)
    starts = [0]
    for f in range(1, n + 1):
        block = len(even_sites) if bead_parity(f) == 0 else len(odd_sites)
        starts.append(starts[-1] + block)
    return VariableMap(seq_len=n, grid=grid, even_sites=even_sites,
                       odd_sites=odd_sites, bead_start=tuple(starts))


@lru_cache(maxsize=64)
def _cached_variable_map(seq: HpSequence, grid: LatticeGrid) -> VariableMap:
    return build_variable_map(seq, grid)


@dataclass(frozen=True)
class SpinConfig:
    """Assignment of {0,1} to every variable of a map."""

    bits: tuple[int, ...]

    @classmethod
    def from_array(cls, arr) -> "SpinConfig":
        return cls(bits=tuple(int(b) for b in arr))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.bits, dtype=np.uint8)

    def __len__(self) -> int:
        return len(self.bits)


@dataclass(frozen=True)
class QuadTerms:
    """Sparse symmetric quadratic form over unordered pairs, stored as COO
    triplets with i < j, sorted by (i, j); no diagonal entries."""

    i: np.ndarray
    j: np.ndarray
    value: np.ndarray

    @property
    def nnz(self) -> int:
        return len(self.value)


@dataclass(frozen=True)
class TermComponent:
    """One integer-coefficient energy term (lambda-free)."""

    linear: np.ndarray           # int64, per-variable
    quad: QuadTerms              # int64 values
    offset: int

    def energy(self, x: np.ndarray) -> int:
        x = np.asarray(x)
        e = int(self.linear @ x.astype(np.int64)) + self.offset
        if self.quad.nnz:
            both = x[self.quad.i].astype(np.int64) * x[self.quad.j]
            e += int(both @ self.quad.value)
        return e


@dataclass(frozen=True)
class QuboModel:
    """Assembled quadratic binary model with per-term provenance.

    energy(x) = linear . x + sum_{i<j} quad_ij x_i x_j + offset, which for
    any x equals e_hp(x) + lambda1*e1(x) + lambda2*e2(x) + lambda3*e3(x)
    with the component terms evaluated from `components`.
    """

    vmap: VariableMap
    lambdas: LambdaParams
    linear: np.ndarray           # float64
    quad: QuadTerms              # float64 values
    offset: float
    components: dict[str, TermComponent]
    sequence: HpSequence

    @property
    def num_vars(self) -> int:
        return self.vmap.num_vars

    def component_energies(self, x) -> dict[str, int]:
        """Exact integer energies of the four terms for one configuration."""
        x = _as_bits(x, self.num_vars)
        return {name: comp.energy(x) for name, comp in self.components.items()}

    def symmetric_csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(indptr, indices, data) of the symmetrized coupling matrix, for
        incremental-update solvers."""
        return _symmetric_csr(self.num_vars, self.quad)


def _as_bits(x, num_vars: int) -> np.ndarray:
    if isinstance(x, SpinConfig):
        arr = x.as_array()
    else:
        arr = np.asarray(x, dtype=np.uint8)
    if arr.shape != (num_vars,):
        raise ContractError(f"config length {arr.shape} != num_vars {num_vars}")
    return arr


def _sorted_coo(i: np.ndarray, j: np.ndarray, v: np.ndarray, dtype) -> QuadTerms:
    lo = np.minimum(i, j).astype(np.int64)
    hi = np.maximum(i, j).astype(np.int64)
    if np.any(lo == hi):
        raise AssertionError("diagonal quadratic term generated")
    order = np.lexsort((hi, lo))
    lo, hi, v = lo[order], hi[order], np.asarray(v, dtype=dtype)[order]
    # merge duplicate pairs (none are expected from the builder, but keep
    # the representation canonical regardless)
    if len(lo):
        key_new = np.empty(len(lo), dtype=bool)
        key_new[0] = True
        key_new[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])
        if not key_new.all():
            group = np.cumsum(key_new) - 1
            summed = np.zeros(group[-1] + 1, dtype=dtype)
            np.add.at(summed, group, v)
            lo, hi, v = lo[key_new], hi[key_new], summed
    return QuadTerms(i=lo, j=hi, value=v)


@lru_cache(maxsize=64)
def _grid_geometry(grid: LatticeGrid):
    """Per-grid arrays: local site coordinates per parity plus the adjacent
    and non-adjacent (even-local, odd-local) site-pair lists."""
    even = np.array(grid.sites(parity=0), dtype=np.int64)
    odd = np.array(grid.sites(parity=1), dtype=np.int64)
    if len(even) == 0 or len(odd) == 0:
        raise EncodingError(f"grid {grid} has an empty parity class")
    dist = np.abs(even[:, None, 0] - odd[None, :, 0]) + np.abs(even[:, None, 1] - odd[None, :, 1])
    adj = np.argwhere(dist == 1)       # Manhattan distance 1: lattice neighbors
    nonadj = np.argwhere(dist > 1)
    return even, odd, adj, nonadj


def encode(seq: HpSequence, grid: LatticeGrid, lambdas: LambdaParams) -> QuboModel:
    """Build the QUBO for a sequence on a grid with the given penalties."""
    vmap = build_variable_map(seq, grid)
    n_beads = len(seq)
    nvar = vmap.num_vars
    base = np.asarray(vmap.bead_start, dtype=np.int64)
    _, _, adj, nonadj = _grid_geometry(grid)
    n_even, n_odd = len(vmap.even_sites), len(vmap.odd_sites)
    hp = np.array([b == "H" for b in seq.beads])

    def block_size(f: int) -> int:
        return n_even if bead_parity(f) == 0 else n_odd

    # E1: (sum_s sigma - 1)^2 per bead = -sum_s sigma + 2 sum_{s<t} sigma sigma + 1
    e1_lin = np.full(nvar, -1, dtype=np.int64)
    ii, jj = [], []
    for f in range(1, n_beads + 1):
        s_idx, t_idx = np.triu_indices(block_size(f), k=1)
        ii.append(base[f - 1] + s_idx)
        jj.append(base[f - 1] + t_idx)
    e1_i = np.concatenate(ii) if ii else np.empty(0, dtype=np.int64)
    e1_j = np.concatenate(jj) if jj else np.empty(0, dtype=np.int64)
    e1 = TermComponent(linear=e1_lin,
                       quad=_sorted_coo(e1_i, e1_j, np.full(len(e1_i), 2), np.int64),
                       offset=n_beads)

    # E2: one unit per unordered same-parity bead pair sharing a site
    ii, jj = [], []
    for parity in (0, 1):
        beads = [f for f in range(1, n_beads + 1) if bead_parity(f) == parity]
        ns = n_even if parity == 0 else n_odd
        locs = np.arange(ns, dtype=np.int64)
        for a in range(len(beads)):
            for b in range(a + 1, len(beads)):
                ii.append(base[beads[a] - 1] + locs)
                jj.append(base[beads[b] - 1] + locs)
    e2_i = np.concatenate(ii) if ii else np.empty(0, dtype=np.int64)
    e2_j = np.concatenate(jj) if jj else np.empty(0, dtype=np.int64)
    e2 = TermComponent(linear=np.zeros(nvar, dtype=np.int64),
                       quad=_sorted_coo(e2_i, e2_j, np.ones(len(e2_i)), np.int64),
                       offset=0)

    # E3: one unit per chain link on a non-neighbor site pair
    ii, jj = [], []
    for f in range(1, n_beads):
        if bead_parity(f) == 0:
            e_loc, o_loc = nonadj[:, 0], nonadj[:, 1]
            ii.append(base[f - 1] + e_loc)
            jj.append(base[f] + o_loc)
        else:
            e_loc, o_loc = nonadj[:, 0], nonadj[:, 1]
            ii.append(base[f] + e_loc)
            jj.append(base[f - 1] + o_loc)
    e3_i = np.concatenate(ii) if ii else np.empty(0, dtype=np.int64)
    e3_j = np.concatenate(jj) if jj else np.empty(0, dtype=np.int64)
    e3 = TermComponent(linear=np.zeros(nvar, dtype=np.int64),
                       quad=_sorted_coo(e3_i, e3_j, np.ones(len(e3_i)), np.int64),
                       offset=0)

    # E_HP: -1 per nearest-neighbor site pair occupied by an H-H bead pair
    # with chain separation > 1 (opposite bead parities by construction)
    ii, jj = [], []
    for f in range(1, n_beads + 1):
        for g in range(f + 2, n_beads + 1):
            if bead_parity(f) == bead_parity(g) or not (hp[f - 1] and hp[g - 1]):
                continue
            ev, od = (f, g) if bead_parity(f) == 0 else (g, f)
            ii.append(base[ev - 1] + adj[:, 0])
            jj.append(base[od - 1] + adj[:, 1])
    hp_i = np.concatenate(ii) if ii else np.empty(0, dtype=np.int64)
    hp_j = np.concatenate(jj) if jj else np.empty(0, dtype=np.int64)
    e_hp = TermComponent(linear=np.zeros(nvar, dtype=np.int64),
                         quad=_sorted_coo(hp_i, hp_j, np.full(len(hp_i), -1), np.int64),
                         offset=0)

    components = {"e_hp": e_hp, "e1": e1, "e2": e2, "e3": e3}
    weights = {"e_hp": 1.0, "e1": lambdas.lambda1, "e2": lambdas.lambda2,
               "e3": lambdas.lambda3}
    linear = np.zeros(nvar, dtype=np.float64)
    offset = 0.0
    all_i, all_j, all_v = [], [], []
    for name, comp in components.items():
        w = weights[name]
        linear += w * comp.linear
        offset += w * comp.offset
        if comp.quad.nnz:
            all_i.append(comp.quad.i)
            all_j.append(comp.quad.j)
            all_v.append(w * comp.quad.value.astype(np.float64))
    if all_i:
        quad = _sorted_coo(np.concatenate(all_i), np.concatenate(all_j),
                           np.concatenate(all_v), np.float64)
    else:
        quad = QuadTerms(i=np.empty(0, dtype=np.int64), j=np.empty(0, dtype=np.int64),
                         value=np.empty(0, dtype=np.float64))
    return QuboModel(vmap=vmap, lambdas=lambdas, linear=linear, quad=quad,
                     offset=float(offset), components=components, sequence=seq)


def _symmetric_csr(nvar: int, quad: QuadTerms):
    rows = np.concatenate([quad.i, quad.j])
    cols = np.concatenate([quad.j, quad.i])
    vals = np.concatenate([quad.value, quad.value]).astype(np.float64)
    order = np.argsort(rows, kind="stable")
    rows, cols, vals = rows[order], cols[order], vals[order]
    indptr = np.zeros(nvar + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    return np.cumsum(indptr), cols.astype(np.int64), vals


def qubo_energy(model: QuboModel, x) -> float:
    """Evaluate the assembled quadratic form on one configuration."""
    bits = _as_bits(x, model.num_vars)
    xf = bits.astype(np.float64)
    e = float(model.linear @ xf) + model.offset
    if model.quad.nnz:
        e += float((xf[model.quad.i] * xf[model.quad.j]) @ model.quad.value)
    return e


def qubo_energy_batch(model: QuboModel, configs: np.ndarray) -> np.ndarray:
    """Vectorized qubo_energy over a (batch, num_vars) uint8 array."""
    X = np.asarray(configs, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.num_vars:
        raise ContractError(f"batch shape {X.shape} incompatible with {model.num_vars} vars")
    e = X @ model.linear + model.offset
    if model.quad.nnz:
        chunk = max(1, int(4e7) // max(1, model.quad.nnz))
        for lo in range(0, len(X), chunk):
            hi = lo + chunk
            e[lo:hi] += (X[lo:hi, model.quad.i] * X[lo:hi, model.quad.j]) @ model.quad.value
    return e


@dataclass(frozen=True)
class TermEnergies:
    e_hp: int
    e1: int
    e2: int
    e3: int

    def total(self, lambdas: LambdaParams) -> float:
        return (self.e_hp + lambdas.lambda1 * self.e1 + lambdas.lambda2 * self.e2
                + lambdas.lambda3 * self.e3)

    def as_dict(self) -> dict[str, int]:
        return {"e_hp": self.e_hp, "e1": self.e1, "e2": self.e2, "e3": self.e3}


def term_energies(seq: HpSequence, grid: LatticeGrid, x) -> TermEnergies:
    """Reference evaluation of the four energy terms straight from bead/site
    occupancies, independent of any assembled coefficient matrix.

    E1 and E2 count per-bead and per-site multiplicities; E3 counts, for
    every chain link, the occupied site pairs that are not lattice
    neighbors; E_HP counts occupied neighbor site pairs over H-H bead
    pairs with chain separation > 1.  All values are integers, with E1,
    E2, E3 >= 0 and E_HP <= 0.
    """
    vmap = _cached_variable_map(seq, grid)
    bits = _as_bits(x, vmap.num_vars)
    return _term_energies_from_bits(seq, vmap, bits)


def _term_energies_from_bits(seq: HpSequence, vmap: VariableMap, bits: np.ndarray) -> TermEnergies:
    n_beads = len(seq)
    occupied: list[list[Coord]] = []
    for f in range(1, n_beads + 1):
        lo, hi = vmap.bead_start[f - 1], vmap.bead_start[f]
        sites = vmap.sites_for_bead(f)
        occupied.append([sites[k] for k in np.flatnonzero(bits[lo:hi])])

    e1 = sum((len(occ) - 1) ** 2 for occ in occupied)

    site_load: dict[Coord, int] = {}
    for occ in occupied:
        for s in occ:
            site_load[s] = site_load.get(s, 0) + 1
    e2 = sum(k * (k - 1) // 2 for k in site_load.values())

    e3 = 0
    for f in range(n_beads - 1):
        for (x0, y0) in occupied[f]:
            for (x1, y1) in occupied[f + 1]:
                if abs(x1 - x0) + abs(y1 - y0) > 1:
                    e3 += 1

    n_hh = 0
    for f in range(1, n_beads + 1):
        if not seq.is_hydrophobic(f):
            continue
        for g in range(f + 2, n_beads + 1):
            if bead_parity(f) == bead_parity(g) or not seq.is_hydrophobic(g):
                continue
            for (x0, y0) in occupied[f - 1]:
                for (x1, y1) in occupied[g - 1]:
                    if abs(x1 - x0) + abs(y1 - y0) == 1:
                        n_hh += 1
    return TermEnergies(e_hp=-n_hh, e1=int(e1), e2=int(e2), e3=int(e3))


def term_energies_batch(seq: HpSequence, grid: LatticeGrid, configs: np.ndarray) -> np.ndarray:
    """Vectorized term_energies over a (batch, num_vars) array.

    Returns an int64 array of shape (batch, 4) ordered (e_hp, e1, e2, e3).
    Uses the same occupancy-based formulas as :func:`term_energies`, cast
    as matrix products against precomputed site-pair indicator matrices.
    """
    vmap = _cached_variable_map(seq, grid)
    X = np.asarray(configs, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] != vmap.num_vars:
        raise ContractError(f"batch shape {X.shape} incompatible with {vmap.num_vars} vars")
    even, odd, adj, nonadj = _grid_geometry(grid)
    n_even, n_odd = len(even), len(odd)
    n_beads = len(seq)
    base = vmap.bead_start
    B = len(X)

    adj_m = np.zeros((n_even, n_odd), dtype=np.int64)
    adj_m[adj[:, 0], adj[:, 1]] = 1
    nonadj_m = 1 - adj_m

    blocks = [X[:, base[f - 1]:base[f]] for f in range(1, n_beads + 1)]
    counts = np.stack([b.sum(axis=1) for b in blocks], axis=1)  # (B, n_beads)
    e1 = ((counts - 1) ** 2).sum(axis=1)

    e2 = np.zeros(B, dtype=np.int64)
    for parity, ns in ((0, n_even), (1, n_odd)):
        beads = [f for f in range(1, n_beads + 1) if bead_parity(f) == parity]
        load = np.zeros((B, ns), dtype=np.int64)
        for f in beads:
            load += blocks[f - 1]
        e2 += (load * (load - 1) // 2).sum(axis=1)

    e3 = np.zeros(B, dtype=np.int64)
    for f in range(1, n_beads):
        u, v = blocks[f - 1], blocks[f]
        m = nonadj_m if bead_parity(f) == 0 else nonadj_m.T
        e3 += ((u @ m) * v).sum(axis=1)

    n_hh = np.zeros(B, dtype=np.int64)
    for f in range(1, n_beads + 1):
        if not seq.is_hydrophobic(f):
            continue
        for g in range(f + 2, n_beads + 1):
            if bead_parity(f) == bead_parity(g) or not seq.is_hydrophobic(g):
                continue
            u, v = blocks[f - 1], blocks[g - 1]
            m = adj_m if bead_parity(f) == 0 else adj_m.T
            n_hh += ((u @ m) * v).sum(axis=1)

    return np.stack([-n_hh, e1, e2, e3], axis=1)


def spin_config_from_conformation(conf: Conformation, vmap: VariableMap) -> SpinConfig:
    """One-hot placement of a grid-anchored conformation, the inverse of
    decoding a valid chain."""
    if len(conf) != vmap.seq_len:
        raise ContractError(f"conformation length {len(conf)} != {vmap.seq_len} beads")
    bits = np.zeros(vmap.num_vars, dtype=np.uint8)
    for f, site in enumerate(conf.coords, start=1):
        bits[vmap.index(f, site)] = 1
    return SpinConfig.from_array(bits)


def suggest_grid(seq: HpSequence, mode: str = "safe", margin: int = 2) -> LatticeGrid:
    """Pick a grid for a sequence.

    "safe" gives an N x N grid, always large enough for any conformation.
    "compact" exploits that minimum-energy structures are dense and fit a
    square of side about sqrt(N); the side is ceil(sqrt(N)) + margin.
    """
    n = len(seq)
    if mode == "safe":
        return LatticeGrid(lx=n, ly=n)
    if mode == "compact":
        side = math.isqrt(n - 1) + 1 + margin  # ceil(sqrt(n)) + margin
        return LatticeGrid(lx=side, ly=side)
    raise ValueError(f"unknown grid mode {mode!r}; use 'safe' or 'compact'")
