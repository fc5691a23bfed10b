"""Core HP-model objects: sequences, lattice grids, chain conformations,
and the hydrophobic contact energy.

The HP model represents a protein as a self-avoiding chain of hydrophobic
(H) or polar (P) beads on the square lattice.  Two beads are in contact if
they sit on nearest-neighbor sites without being adjacent along the chain,
and the energy is -1 per H-H contact.  Everything in this module is
immutable and pure, so objects can be shared freely across worker threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

Coord = tuple[int, int]

# The 8 point-group elements of the square lattice as 2x2 integer matrices
# (a, b, c, d) acting as (x, y) -> (a x + b y, c x + d y).  Index 0 is the
# identity; 1..3 are rotations by 90/180/270 degrees; 4..7 are the mirror
# images (x-axis, y-axis, main diagonal, anti-diagonal).
POINT_GROUP: tuple[tuple[int, int, int, int], ...] = (
    (1, 0, 0, 1),
    (0, -1, 1, 0),
    (-1, 0, 0, -1),
    (0, 1, -1, 0),
    (1, 0, 0, -1),
    (-1, 0, 0, 1),
    (0, 1, 1, 0),
    (0, -1, -1, 0),
)

NEIGHBOR_STEPS: tuple[Coord, ...] = ((1, 0), (-1, 0), (0, 1), (0, -1))


class SequenceError(ValueError):
    """Raised for malformed H/P sequence strings."""


class ConformationError(ValueError):
    """Raised when an operation requires a valid chain and got an invalid one."""


@dataclass(frozen=True)
class HpSequence:
    """An ordered chain of H/P bead types.

    Beads are 1-indexed in the physics convention; internally tuples are
    0-indexed.  Bead f has parity (f - 1) mod 2, so bead 1 is "even".
    """

    beads: tuple[str, ...]
    label: str = ""

    def __post_init__(self):
        if len(self.beads) < 2:
            raise SequenceError(f"sequence needs at least 2 beads, got {len(self.beads)}")
        for pos, b in enumerate(self.beads, start=1):
            if b not in ("H", "P"):
                raise SequenceError(f"invalid bead type {b!r} at position {pos}")

    def __len__(self) -> int:
        return len(self.beads)

    def __str__(self) -> str:
        return "".join(self.beads)

    @property
    def n_even_beads(self) -> int:
        """Beads 1, 3, 5, ... (parity 0)."""
        return (len(self.beads) + 1) // 2

    @property
    def n_odd_beads(self) -> int:
        return len(self.beads) // 2

    def is_hydrophobic(self, f: int) -> bool:
        """Whether 1-indexed bead f is of type H."""
        return self.beads[f - 1] == "H"

    @property
    def is_palindromic(self) -> bool:
        return self.beads == self.beads[::-1]


def parse_sequence(text: str, label: str = "") -> HpSequence:
    """Parse an H/P string (case-insensitive) into an :class:`HpSequence`.

    Raises :class:`SequenceError` naming the first offending position for
    any character outside {H, P}.
    """
    if not text:
        raise SequenceError("empty sequence")
    beads = []
    for pos, ch in enumerate(text, start=1):
        up = ch.upper()
        if up not in ("H", "P"):
            raise SequenceError(f"invalid character {ch!r} at position {pos}")
        beads.append(up)
    return HpSequence(beads=tuple(beads), label=label or text)


@dataclass(frozen=True)
class LatticeGrid:
    """A finite rectangular grid of lx * ly sites with checkerboard parity.

    Site (x, y) has parity (x + y) mod 2; adjacent sites always have
    opposite parity, which is what lets even/odd beads be restricted to
    even/odd sites.
    """

    lx: int
    ly: int

    def __post_init__(self):
        if self.lx < 1 or self.ly < 1:
            raise ValueError(f"grid dimensions must be positive, got {self.lx}x{self.ly}")

    @property
    def n_sites(self) -> int:
        return self.lx * self.ly

    def contains(self, site: Coord) -> bool:
        x, y = site
        return 0 <= x < self.lx and 0 <= y < self.ly

    def sites(self, parity: int | None = None) -> list[Coord]:
        """All sites in row-major order (y outer, x inner), optionally
        filtered to one parity class."""
        out = []
        for y in range(self.ly):
            for x in range(self.lx):
                if parity is None or (x + y) % 2 == parity:
                    out.append((x, y))
        return out

    def __str__(self) -> str:
        return f"{self.lx}x{self.ly}"


def site_parity(site: Coord) -> int:
    return (site[0] + site[1]) % 2


def bead_parity(f: int) -> int:
    """Parity of 1-indexed bead f; bead 1 is even (parity 0)."""
    return (f - 1) % 2


@dataclass(frozen=True)
class Conformation:
    """Ordered lattice coordinates of all beads of a chain.

    Coordinates may be arbitrary integers (grid-free) or anchored to a
    :class:`LatticeGrid`.  Validity (connectivity, self-avoidance) is not
    enforced by the constructor; use :func:`validate_conformation`.
    """

    coords: tuple[Coord, ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple((int(x), int(y)) for x, y in self.coords))

    def __len__(self) -> int:
        return len(self.coords)

    def translated(self, dx: int, dy: int) -> "Conformation":
        return Conformation(tuple((x + dx, y + dy) for x, y in self.coords))


@dataclass(frozen=True)
class ContactEnergy:
    """HP contact energy: e_hp = -n_hh where n_hh counts H-H contacts."""

    n_hh: int

    @property
    def e_hp(self) -> int:
        return -self.n_hh


@dataclass(frozen=True)
class ValidityReport:
    """Outcome of :func:`validate_conformation`; valid iff all lists empty.

    Indices are 1-based bead/step numbers to match the physics convention.
    """

    connectivity: tuple[int, ...] = ()       # steps i where |c[i+1]-c[i]| != 1
    self_intersections: tuple[int, ...] = () # beads that revisit an occupied site
    out_of_grid: tuple[int, ...] = ()        # beads outside the grid
    parity: tuple[int, ...] = ()             # beads violating the parity convention

    @property
    def valid(self) -> bool:
        return not (self.connectivity or self.self_intersections
                    or self.out_of_grid or self.parity)

    def first_violation(self) -> str:
        for name in ("connectivity", "self_intersections", "out_of_grid", "parity"):
            items = getattr(self, name)
            if items:
                return f"{name} at bead/step {items[0]}"
        return ""


def validate_conformation(conf: Conformation, grid: LatticeGrid | None = None) -> ValidityReport:
    """Check chain connectivity, self-avoidance, and (when a grid is given)
    grid membership plus the bead-parity convention parity(coords[f]) =
    (f-1) mod 2."""
    coords = conf.coords
    connectivity = []
    for i in range(len(coords) - 1):
        (x0, y0), (x1, y1) = coords[i], coords[i + 1]
        if abs(x1 - x0) + abs(y1 - y0) != 1:
            connectivity.append(i + 1)
    seen: set[Coord] = set()
    self_intersections = []
    for i, c in enumerate(coords):
        if c in seen:
            self_intersections.append(i + 1)
        seen.add(c)
    out_of_grid = []
    parity = []
    if grid is not None:
        for i, c in enumerate(coords):
            if not grid.contains(c):
                out_of_grid.append(i + 1)
            if site_parity(c) != i % 2:
                parity.append(i + 1)
    return ValidityReport(
        connectivity=tuple(connectivity),
        self_intersections=tuple(self_intersections),
        out_of_grid=tuple(out_of_grid),
        parity=tuple(parity),
    )


def hp_energy(seq: HpSequence, conf: Conformation) -> ContactEnergy:
    """Count H-H contacts of a valid conformation.

    A contact is an unordered pair of beads on lattice-adjacent sites with
    chain separation |f - f'| > 1; each pair is counted once.
    """
    if len(conf) != len(seq):
        raise ConformationError(
            f"conformation length {len(conf)} != sequence length {len(seq)}")
    report = validate_conformation(conf)
    if not report.valid:
        raise ConformationError(f"invalid conformation: {report.first_violation()}")
    index_of = {c: i for i, c in enumerate(conf.coords)}
    hp = [seq.beads[i] == "H" for i in range(len(seq))]
    n_hh = 0
    for i, (x, y) in enumerate(conf.coords):
        if not hp[i]:
            continue
        # look only right/up so each unordered pair is seen once
        for dx, dy in ((1, 0), (0, 1)):
            j = index_of.get((x + dx, y + dy))
            if j is not None and abs(j - i) > 1 and hp[j]:
                n_hh += 1
    return ContactEnergy(n_hh=n_hh)


def _normalize(coords: tuple[Coord, ...]) -> tuple[Coord, ...]:
    mx = min(x for x, _ in coords)
    my = min(y for _, y in coords)
    return tuple((x - mx, y - my) for x, y in coords)


def apply_symmetry(coords: tuple[Coord, ...], sym: tuple[int, int, int, int]) -> tuple[Coord, ...]:
    a, b, c, d = sym
    return tuple((a * x + b * y, c * x + d * y) for x, y in coords)


def canonical_form(conf: Conformation, include_reversal: bool = False) -> Conformation:
    """Translation-normalized, lexicographically minimal image of a
    conformation over the 8 square-lattice point-group symmetries.

    Chain reversal is not quotiented by default, since sequence direction
    matters for non-palindromic sequences; pass include_reversal=True for
    degeneracy counts that identify a chain with its reverse.
    Deterministic and idempotent.
    """
    report = validate_conformation(conf)
    if not report.valid:
        raise ConformationError(f"invalid conformation: {report.first_violation()}")
    candidates = [conf.coords]
    if include_reversal:
        candidates.append(conf.coords[::-1])
    best: tuple[Coord, ...] | None = None
    for coords in candidates:
        for sym in POINT_GROUP:
            img = _normalize(apply_symmetry(coords, sym))
            if best is None or img < best:
                best = img
    assert best is not None
    return Conformation(best)
