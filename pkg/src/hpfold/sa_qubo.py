"""Classical simulated annealing over the binary model.

Single-spin-flip Metropolis with a geometric inverse-temperature schedule
(25 values from beta = 1, ratio 1.05, 10^4 sweeps each).  One sweep makes
num_vars flip attempts at uniformly random variables, so on average each
spin is attempted once per sweep; a deterministic-scan mode is available
for A/B comparisons.

The jitted kernel keeps a local field h_i = linear_i + sum_j q_ij x_j per
variable, making the flip energy (1 - 2 x_i) h_i an O(1) read; rejected
attempts cost O(1) and accepted flips cost O(degree).  Energies are
re-derived from scratch at every temperature boundary to bound float
drift.  Each run owns a counter-seeded xoshiro256++ stream, so batches are
reproducible for any worker count.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .decoding import DecodedState, decode, hit_test
from .encoding import ContractError, QuboModel, SpinConfig, TermEnergies, _as_bits
from .hp import HpSequence

U64 = np.uint64

DEFAULT_N_BETAS = 25
DEFAULT_BETA0 = 1.0
DEFAULT_BETA_RATIO = 1.05
DEFAULT_SWEEPS_PER_BETA = 10_000
DEFAULT_TRACE_EVERY = 1_000
_MAX_EXP_ARG = 45.0  # exp(-45) ~ 3e-20: acceptance never fires below this


@dataclass(frozen=True)
class AnnealSchedule:
    """Ordered inverse temperatures and the sweep count spent at each."""

    betas: tuple[float, ...]
    sweeps_per_beta: int

    def __post_init__(self):
        if len(self.betas) == 0:
            raise ValueError("schedule needs at least one beta")
        if any(b2 <= b1 for b1, b2 in zip(self.betas, self.betas[1:])):
            raise ValueError("betas must be strictly increasing")
        if self.sweeps_per_beta < 1:
            raise ValueError("sweeps_per_beta must be >= 1")

    @property
    def total_sweeps(self) -> int:
        return len(self.betas) * self.sweeps_per_beta


def default_schedule(sweeps_per_beta: int = DEFAULT_SWEEPS_PER_BETA,
                     n_betas: int = DEFAULT_N_BETAS,
                     beta0: float = DEFAULT_BETA0,
                     ratio: float = DEFAULT_BETA_RATIO) -> AnnealSchedule:
    """Geometric schedule; defaults reproduce the 25-temperature protocol."""
    betas = tuple(beta0 * ratio ** k for k in range(n_betas))
    return AnnealSchedule(betas=betas, sweeps_per_beta=sweeps_per_beta)


# ---------------------------------------------------------------------------
# counter-seeded xoshiro256++ (full 64-bit seeding, stable across platforms)

@njit(cache=True, inline="always")
def _splitmix64(z):
    z = (z + U64(0x9E3779B97F4A7C15))
    z = (z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)
    return z ^ (z >> U64(31))


@njit(cache=True, inline="always")
def _rng_init(seed):
    s = np.empty(4, dtype=np.uint64)
    z = U64(seed)
    for k in range(4):
        z = _splitmix64(z)
        s[k] = z
    return s


@njit(cache=True, inline="always")
def _rng_next(s):
    tmp = s[0] + s[3]
    result = ((tmp << U64(23)) | (tmp >> U64(41))) + s[0]
    t = s[1] << U64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = (s[3] << U64(45)) | (s[3] >> U64(19))
    return result


@njit(cache=True, inline="always")
def _rng_uniform(s):
    return (_rng_next(s) >> U64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True, inline="always")
def _rng_below(s, n):
    return np.int64(_rng_next(s) % np.uint64(n))


def derive_run_seed(base_seed: int, run_index: int) -> int:
    """Deterministic 64-bit stream seed for run run_index of a batch."""
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(run_index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# ---------------------------------------------------------------------------
# kernel

@njit(cache=True, nogil=True)
def _recompute(nvar, lin, indptr, indices, data, offset, x, fields):
    e = offset
    for i in range(nvar):
        fields[i] = lin[i]
    for i in range(nvar):
        if x[i]:
            e += lin[i]
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                if x[j] and j > np.int64(i):
                    e += data[k]
                fields[j] += data[k]
    return e


@njit(cache=True, nogil=True)
def _term_counts(x, bead_start, site_of_var, n_sites, site_scratch,
                 hp_i, hp_j, e3_i, e3_j):
    """Integer term energies straight from the current configuration."""
    e1 = np.int64(0)
    for f in range(len(bead_start) - 1):
        c = np.int64(0)
        for v in range(bead_start[f], bead_start[f + 1]):
            c += x[v]
        e1 += (c - 1) * (c - 1)
    for s in range(n_sites):
        site_scratch[s] = 0
    for v in range(len(x)):
        if x[v]:
            site_scratch[site_of_var[v]] += 1
    e2 = np.int64(0)
    for s in range(n_sites):
        k = site_scratch[s]
        e2 += k * (k - 1) // 2
    n_hh = np.int64(0)
    for k in range(len(hp_i)):
        if x[hp_i[k]] and x[hp_j[k]]:
            n_hh += 1
    e3 = np.int64(0)
    for k in range(len(e3_i)):
        if x[e3_i[k]] and x[e3_j[k]]:
            e3 += 1
    return -n_hh, e1, e2, e3


@njit(cache=True, nogil=True)
def _sa_kernel(nvar, lin, indptr, indices, data, offset,
               bead_start, site_of_var, n_sites, hp_i, hp_j, e3_i, e3_j,
               betas, sweeps_per_beta, seed, trace_every, sequential_scan,
               validate_every):
    """Run one annealing trajectory; returns the final configuration, its
    energy, the term-energy trace, acceptance counters, and a drift flag."""
    rng = _rng_init(seed)
    x = np.zeros(nvar, dtype=np.uint8)
    for i in range(nvar):
        if _rng_next(rng) >> U64(63):
            x[i] = 1
    fields = np.empty(nvar, dtype=np.float64)
    energy = _recompute(nvar, lin, indptr, indices, data, offset, x, fields)

    total_sweeps = len(betas) * sweeps_per_beta
    n_trace = total_sweeps // trace_every if trace_every > 0 else 0
    trace_sweep = np.zeros(n_trace, dtype=np.int64)
    trace_terms = np.zeros((n_trace, 4), dtype=np.int64)
    site_scratch = np.zeros(n_sites, dtype=np.int64)
    trace_k = 0

    pos_attempts = np.int64(0)
    pos_accepts = np.int64(0)
    accepted = np.int64(0)
    drift_flag = 0
    sweep_count = 0

    for bi in range(len(betas)):
        beta = betas[bi]
        for _ in range(sweeps_per_beta):
            for a in range(nvar):
                if sequential_scan:
                    i = a
                else:
                    i = _rng_below(rng, nvar)
                d = fields[i] if x[i] == 0 else -fields[i]
                acc = False
                if d <= 0.0:
                    acc = True
                else:
                    pos_attempts += 1
                    bd = beta * d
                    if bd < _MAX_EXP_ARG and _rng_uniform(rng) < np.exp(-bd):
                        acc = True
                        pos_accepts += 1
                if acc:
                    accepted += 1
                    energy += d
                    if x[i] == 0:
                        x[i] = 1
                        for k in range(indptr[i], indptr[i + 1]):
                            fields[indices[k]] += data[k]
                    else:
                        x[i] = 0
                        for k in range(indptr[i], indptr[i + 1]):
                            fields[indices[k]] -= data[k]
            sweep_count += 1
            if validate_every > 0 and sweep_count % validate_every == 0:
                check = _recompute(nvar, lin, indptr, indices, data, offset,
                                   x, np.empty(nvar, dtype=np.float64))
                scale = max(1.0, abs(check))
                if abs(check - energy) > 1e-6 * scale:
                    drift_flag = 1
            if trace_every > 0 and sweep_count % trace_every == 0 and trace_k < n_trace:
                e_hp, e1, e2, e3 = _term_counts(x, bead_start, site_of_var,
                                                n_sites, site_scratch,
                                                hp_i, hp_j, e3_i, e3_j)
                trace_sweep[trace_k] = sweep_count
                trace_terms[trace_k, 0] = e_hp
                trace_terms[trace_k, 1] = e1
                trace_terms[trace_k, 2] = e2
                trace_terms[trace_k, 3] = e3
                trace_k += 1
        # temperature boundary: re-derive fields and energy exactly
        energy = _recompute(nvar, lin, indptr, indices, data, offset, x, fields)
    return (x, energy, trace_sweep[:trace_k], trace_terms[:trace_k],
            pos_attempts, pos_accepts, accepted, drift_flag)


# ---------------------------------------------------------------------------
# python-level API

@dataclass
class _KernelArgs:
    """Prebuilt arrays shared read-only by all runs over one model."""

    nvar: int
    lin: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    offset: float
    bead_start: np.ndarray
    site_of_var: np.ndarray
    n_sites: int
    hp_i: np.ndarray
    hp_j: np.ndarray
    e3_i: np.ndarray
    e3_j: np.ndarray


def _kernel_args(model: QuboModel) -> _KernelArgs:
    vmap = model.vmap
    indptr, indices, data = model.symmetric_csr()
    site_of_var = np.empty(vmap.num_vars, dtype=np.int64)
    grid = vmap.grid
    for f, (sx, sy), idx in vmap.entries():
        site_of_var[idx] = sy * grid.lx + sx
    hp_q = model.components["e_hp"].quad
    e3_q = model.components["e3"].quad
    return _KernelArgs(
        nvar=vmap.num_vars, lin=model.linear, indptr=indptr, indices=indices,
        data=data, offset=model.offset,
        bead_start=np.asarray(vmap.bead_start, dtype=np.int64),
        site_of_var=site_of_var, n_sites=grid.n_sites,
        hp_i=hp_q.i, hp_j=hp_q.j, e3_i=e3_q.i, e3_j=e3_q.j)


@dataclass(frozen=True)
class SaRun:
    """One annealing trajectory: seed, sampled trace, decoded final state."""

    seed: int
    trace_sweeps: np.ndarray          # (T,)
    trace_terms: np.ndarray           # (T, 4): e_hp, e1, e2, e3
    final: DecodedState
    final_energy: float
    wall_time: float
    pos_attempts: int = 0
    pos_accepts: int = 0
    accepted_flips: int = 0

    @property
    def final_terms(self) -> TermEnergies:
        return self.final.energies


def local_fields(model: QuboModel, x) -> np.ndarray:
    """h_i = linear_i + sum_j q_ij x_j for every variable."""
    bits = _as_bits(x, model.num_vars)
    fields = model.linear.copy()
    xf = bits.astype(np.float64)
    q = model.quad
    np.add.at(fields, q.i, q.value * xf[q.j])
    np.add.at(fields, q.j, q.value * xf[q.i])
    return fields


def flip_delta(model: QuboModel, x, i: int, fields: np.ndarray | None = None) -> float:
    """Energy change from flipping bit i; O(1) given cached local fields."""
    bits = _as_bits(x, model.num_vars)
    if not 0 <= i < model.num_vars:
        raise ContractError(f"variable index {i} out of range")
    if fields is None:
        fields = local_fields(model, bits)
    return float(fields[i]) if bits[i] == 0 else -float(fields[i])


def run(model: QuboModel, schedule: AnnealSchedule | None = None,
        seed: int = 0, trace_every: int = DEFAULT_TRACE_EVERY,
        sequential_scan: bool = False, validate_every: int = 0,
        _args: _KernelArgs | None = None) -> SaRun:
    """One annealing run from an i.i.d. fair-bit initial configuration.

    Deterministic given the seed: the same seed reproduces the trajectory
    bit for bit, independent of batch context or worker scheduling.
    """
    if schedule is None:
        schedule = default_schedule()
    ka = _args or _kernel_args(model)
    t0 = time.perf_counter()
    (x, energy, tr_sweeps, tr_terms, pos_att, pos_acc, accepted,
     drift) = _sa_kernel(
        ka.nvar, ka.lin, ka.indptr, ka.indices, ka.data, ka.offset,
        ka.bead_start, ka.site_of_var, ka.n_sites,
        ka.hp_i, ka.hp_j, ka.e3_i, ka.e3_j,
        np.asarray(schedule.betas, dtype=np.float64), schedule.sweeps_per_beta,
        U64(seed % (1 << 64)), trace_every, sequential_scan, validate_every)
    wall = time.perf_counter() - t0
    if drift:
        raise ArithmeticError(
            "incremental energy drifted from full recomputation beyond 1e-6")
    final = decode(x, model.vmap, model.sequence)
    return SaRun(seed=int(seed), trace_sweeps=tr_sweeps, trace_terms=tr_terms,
                 final=final, final_energy=float(energy), wall_time=wall,
                 pos_attempts=int(pos_att), pos_accepts=int(pos_acc),
                 accepted_flips=int(accepted))


@dataclass(frozen=True)
class BatchResult:
    """Outcome of n independent runs plus the hit-rate summary."""

    runs: tuple[SaRun, ...]
    n_runs: int
    hits: int
    hit_rate: float
    std_error: float
    base_seed: int

    @property
    def total_wall_time(self) -> float:
        return sum(r.wall_time for r in self.runs)


def hit_rate_summary(hits: int, n: int) -> tuple[float, float]:
    """Binomial point estimate and standard error sqrt(p(1-p)/n)."""
    p = hits / n
    return p, float(np.sqrt(p * (1.0 - p) / n))


def batch(model: QuboModel, schedule: AnnealSchedule | None = None,
          n_runs: int = 100, base_seed: int = 0, parallelism: int = 1,
          trace_every: int = DEFAULT_TRACE_EVERY, e_min: int | None = None,
          sequential_scan: bool = False) -> BatchResult:
    """n_runs independent annealing runs with derived per-run seeds.

    Results are identical for any parallelism because every run's RNG
    stream depends only on (base_seed, run_index).
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    if schedule is None:
        schedule = default_schedule()
    ka = _kernel_args(model)
    seeds = [derive_run_seed(base_seed, r) for r in range(n_runs)]

    def one(seed: int) -> SaRun:
        return run(model, schedule, seed=seed, trace_every=trace_every,
                   sequential_scan=sequential_scan, _args=ka)

    if parallelism <= 1:
        runs = [one(s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            runs = list(pool.map(one, seeds))
    hits = sum(hit_test(r.final, model.sequence, e_min=e_min) for r in runs)
    p, se = hit_rate_summary(hits, n_runs)
    return BatchResult(runs=tuple(runs), n_runs=n_runs, hits=hits,
                       hit_rate=p, std_error=se, base_seed=base_seed)
