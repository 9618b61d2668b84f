"""Substitution systems on lattices.

A system is a matrix of digit sets D_ij together with a common expansion Q:
color j contributes Q*Lambda_j + D_ij to color i.  The fixed-point multiset is
grown from a seed cluster; everything downstream (coincidence search, windows,
statistics) reads either the digit data symbolically or patches of the fixed
point.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import BudgetExceeded, DisjointnessViolation, LatticeError
from .lattice import (
    ExpansionMatrix,
    LatticeBasis,
    SubgroupHNF,
    Vec,
    hnf,
    is_expansive,
    mat_vec,
)

DEFAULT_POINT_BUDGET = 4_000_000


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in lattice coordinates, bounds inclusive."""

    lo: Vec
    hi: Vec

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise LatticeError("box bounds differ in dimension")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise LatticeError("box is empty")

    def __contains__(self, pt) -> bool:
        return all(a <= x <= b for x, a, b in zip(pt, self.lo, self.hi))

    def points(self):
        ranges = [range(a, b + 1) for a, b in zip(self.lo, self.hi)]
        return itertools.product(*ranges)

    def volume_points(self) -> int:
        n = 1
        for a, b in zip(self.lo, self.hi):
            n *= b - a + 1
        return n

    def shrink(self, margin: int) -> "Box":
        return Box(
            tuple(a + margin for a in self.lo), tuple(b - margin for b in self.hi)
        )


@dataclass(frozen=True)
class Cluster:
    """Finite colored point configuration: one sorted tuple of points per color."""

    points: tuple  # per color: tuple of integer coordinate tuples

    @classmethod
    def build(cls, lists) -> "Cluster":
        return cls(
            tuple(
                tuple(sorted({tuple(int(x) for x in p) for p in color}))
                for color in lists
            )
        )

    @property
    def m(self) -> int:
        return len(self.points)

    @property
    def counts(self):
        return tuple(len(c) for c in self.points)

    @property
    def total(self) -> int:
        return sum(self.counts)

    def is_empty(self) -> bool:
        return self.total == 0

    def translate(self, v: Vec) -> "Cluster":
        return Cluster(
            tuple(
                tuple(tuple(a + b for a, b in zip(p, v)) for p in color)
                for color in self.points
            )
        )

    def restrict(self, box: Box) -> "Cluster":
        return Cluster(
            tuple(tuple(p for p in color if p in box) for color in self.points)
        )

    def contains(self, other: "Cluster") -> bool:
        """Color-wise subset test."""
        return all(
            set(o) <= set(s) for o, s in zip(other.points, self.points)
        )

    def point_colors(self) -> dict:
        """Map point -> color index (colors assumed disjoint; later wins otherwise)."""
        out = {}
        for i, color in enumerate(self.points):
            for p in color:
                out[p] = i
        return out

    def support_box(self) -> Box | None:
        pts = [p for color in self.points for p in color]
        if not pts:
            return None
        dim = len(pts[0])
        lo = tuple(min(p[k] for p in pts) for k in range(dim))
        hi = tuple(max(p[k] for p in pts) for k in range(dim))
        return Box(lo, hi)


@dataclass(frozen=True)
class SubstitutionSystem:
    """Lattice substitution data: basis, expansion, m x m digit sets, seed.

    `seed_power` declares the least N with seed contained in the N-th image of
    itself; systems whose natural two-sided fixed point only exists for a
    power of the substitution (period doubling, Thue-Morse) carry N = 2.
    """

    name: str
    dim: int
    colors: tuple
    lattice: LatticeBasis
    expansion: ExpansionMatrix
    digits: tuple  # digits[i][j]: tuple of integer d-vectors
    seed: Cluster
    seed_power: int = 1

    @property
    def m(self) -> int:
        return len(self.colors)

    def digit_count(self) -> int:
        return sum(len(d) for row in self.digits for d in row)

    def validate(self) -> list:
        """All structural violations, not just the first."""
        problems = []
        m, d = self.m, self.dim
        if m < 1:
            problems.append("system needs at least one color")
        if self.lattice.dim != d:
            problems.append("lattice basis dimension mismatch")
        if self.expansion.dim != d:
            problems.append("expansion matrix dimension mismatch")
        if len(self.digits) != m or any(len(row) != m for row in self.digits):
            problems.append("digit array is not m x m")
        else:
            for i, row in enumerate(self.digits):
                for j, dset in enumerate(row):
                    for v in dset:
                        if len(v) != d:
                            problems.append(
                                f"digit {v} in D[{i}][{j}] has dimension != {d}"
                            )
                    if len(set(dset)) != len(dset):
                        problems.append(f"duplicate digit in D[{i}][{j}]")
        if self.seed.m != m:
            problems.append("seed color count mismatch")
        seen = {}
        for i, color in enumerate(self.seed.points):
            for p in color:
                if len(p) != d:
                    problems.append(f"seed point {p} has dimension != {d}")
                elif p in seen:
                    problems.append(
                        f"seed point {p} carries two colors ({seen[p]} and {i})"
                    )
                else:
                    seen[p] = i
        if self.expansion.dim == d:
            if self.expansion.absdet < 2:
                problems.append("expansion must have |det| >= 2")
            rep = is_expansive(self.expansion)
            if not rep.expansive:
                problems.append(
                    f"expansion is not expansive (margin {rep.margin:.3g})"
                )
        if self.seed_power < 1:
            problems.append("seed_power must be >= 1")
        return problems


# ---------------------------------------------------------------------------
# substitution matrix and Perron-Frobenius data


def substitution_matrix(sys: SubstitutionSystem):
    """S_ij = number of digits in D_ij."""
    return tuple(tuple(len(d) for d in row) for row in sys.digits)


@dataclass(frozen=True)
class PrimitivityReport:
    primitive: bool
    witness_power: int | None


def is_primitive(matrix) -> PrimitivityReport:
    """Least l with S^l > 0 entrywise, searched up to the Wielandt bound."""
    m = len(matrix)
    bound = m * m - 2 * m + 2 if m > 1 else 1
    power = np.eye(m, dtype=object)
    s = np.array(matrix, dtype=object)
    for l in range(1, bound + 1):
        power = power @ s
        if all(x > 0 for x in power.flat):
            return PrimitivityReport(True, l)
    return PrimitivityReport(False, None)


@dataclass(frozen=True)
class PFData:
    eigenvalue: float
    left_vector: tuple  # tile volumes up to scale, sums to 1
    right_vector: tuple  # relative frequencies, sums to 1
    residual: float


def pf_data(matrix, expansion: ExpansionMatrix, tol: float = 1e-12):
    """Power-iteration PF eigenpair of a primitive matrix.

    Returns (PFData, consistent) with consistent = |eigenvalue - |det Q||
    within 1e-6, the sanity identity for substitution matrices.
    """
    rep = is_primitive(matrix)
    if not rep.primitive:
        raise ValueError("matrix is not primitive")
    s = np.array(matrix, dtype=float)
    m = len(matrix)

    def dominant(a):
        v = np.full(m, 1.0 / m)
        lam = 0.0
        for _ in range(10_000):
            w = a @ v
            lam = float(v @ w)
            w_norm = np.linalg.norm(w)
            v = w / w_norm
            if np.linalg.norm(a @ v - lam * v) < tol * max(1.0, lam):
                break
        return lam, np.abs(v)

    lam, right = dominant(s)
    _, left = dominant(s.T)
    right = right / right.sum()
    left = left / left.sum()
    residual = float(np.max(np.abs(s @ right - lam * right)))
    data = PFData(lam, tuple(float(x) for x in left), tuple(float(x) for x in right), residual)
    consistent = abs(lam - expansion.absdet) <= 1e-6
    return data, consistent


# ---------------------------------------------------------------------------
# applying the substitution


def apply(sys: SubstitutionSystem, cluster: Cluster) -> Cluster:
    """One substitution step; detects colliding branches within a color.

    For any sub-cluster of a valid fixed point the unions are disjoint, so a
    collision proves the input (or the digit sets) is corrupt.
    """
    q = sys.expansion
    out = []
    for i in range(sys.m):
        seen = {}
        for j in range(sys.m):
            digits = sys.digits[i][j]
            if not digits:
                continue
            for x in cluster.points[j]:
                qx = q.apply(x)
                for idx, a in enumerate(digits):
                    y = tuple(b + c for b, c in zip(qx, a))
                    witness = (j, idx, a, x)
                    if y in seen and seen[y] != witness:
                        raise DisjointnessViolation(i, y, seen[y], witness)
                    seen[y] = witness
        out.append(tuple(sorted(seen)))
    return Cluster(tuple(out))


def apply_n(sys: SubstitutionSystem, cluster: Cluster, n: int,
            max_points: int = DEFAULT_POINT_BUDGET) -> Cluster:
    for _ in range(n):
        cluster = apply(sys, cluster)
        if cluster.total > max_points:
            raise BudgetExceeded("patch points", max_points)
    return cluster


def verify_fixed_point(sys: SubstitutionSystem) -> bool:
    """Seed is a generating multiset: seed subset of Phi^N(seed), N = seed_power."""
    try:
        image = apply_n(sys, sys.seed, sys.seed_power)
    except DisjointnessViolation:
        return False
    return image.contains(sys.seed)


def generate_patch(
    sys: SubstitutionSystem,
    n: int,
    region: Box | None = None,
    max_points: int = DEFAULT_POINT_BUDGET,
) -> Cluster:
    """Phi^n(seed), optionally restricted to a box.

    Monotone along the seed_power chain: the patch for n contains the patch
    for n - seed_power on any fixed region.
    """
    patch = apply_n(sys, sys.seed, n, max_points=max_points)
    if region is not None:
        patch = patch.restrict(region)
    return patch


def filled_core_box(patch: Cluster) -> Box | None:
    """Largest centered box every lattice point of which carries exactly one color.

    Finite patches of a lattice system fill a growing core around the origin
    while their fringes stay ragged; windows and density comparisons must be
    confined to the core.  Returns None when even the origin is uncovered or
    some point carries two colors.
    """
    colors = {}
    total = 0
    for i, pts in enumerate(patch.points):
        for p in pts:
            colors[p] = i
            total += 1
    if len(colors) != total or not colors:
        return None
    dim = len(next(iter(colors)))
    if (0,) * dim not in colors:
        return None
    support = patch.support_box()
    max_r = max(
        max(abs(a), abs(b)) for a, b in zip(support.lo, support.hi)
    )

    def filled(r):
        return all(p in colors for p in Box((-r,) * dim, (r,) * dim).points())

    lo, hi = 0, max_r
    while lo < hi:  # largest r with filled(r), by binary search
        mid = (lo + hi + 1) // 2
        if filled(mid):
            lo = mid
        else:
            hi = mid - 1
    return Box((-lo,) * dim, (lo,) * dim)


# ---------------------------------------------------------------------------
# supertiles and legality


@lru_cache(maxsize=256)
def supertile(sys: SubstitutionSystem, color: int, power: int,
              max_points: int = DEFAULT_POINT_BUDGET) -> Cluster:
    """Phi^power applied to a single point of `color` at the origin."""
    start = Cluster.build(
        [[(0,) * sys.dim] if j == color else [] for j in range(sys.m)]
    )
    return apply_n(sys, start, power, max_points=max_points)


@dataclass(frozen=True)
class LegalityReport:
    found: bool
    color: int | None
    power: int | None
    translation: Vec | None
    searched_up_to: int

    def describe(self, sys: SubstitutionSystem | None = None) -> str:
        if self.found:
            name = sys.colors[self.color] if sys else str(self.color)
            return f"Legal(color {name}, power {self.power}, t={list(self.translation)})"
        return f"NotFoundUpTo({self.searched_up_to})"


def legality_check(
    sys: SubstitutionSystem,
    cluster: Cluster,
    k_max: int,
    max_points: int = DEFAULT_POINT_BUDGET,
) -> LegalityReport:
    """Search for the cluster as a translate inside some iterated single-point image.

    A hit certifies legality exactly; exhausting k_max is inconclusive, not a
    disproof (no effective bound on the power is available).
    """
    anchor_color = next(
        (i for i, pts in enumerate(cluster.points) if pts), None
    )
    if anchor_color is None:
        return LegalityReport(True, 0, 0, (0,) * sys.dim, k_max)
    anchor = cluster.points[anchor_color][0]
    for k in range(0, k_max + 1):
        for j in range(sys.m):
            try:
                st = supertile(sys, j, k, max_points=max_points)
            except BudgetExceeded:
                raise
            sets = [set(c) for c in st.points]
            for u in st.points[anchor_color]:
                t = tuple(a - b for a, b in zip(u, anchor))
                if all(
                    tuple(a + b for a, b in zip(p, t)) in sets[i]
                    for i, color in enumerate(cluster.points)
                    for p in color
                ):
                    return LegalityReport(True, j, k, t, k_max)
    return LegalityReport(False, None, None, None, k_max)


# ---------------------------------------------------------------------------
# the difference sublattice L'


@dataclass(frozen=True)
class LprimeReport:
    subgroup: SubgroupHNF
    stabilized: bool
    rounds: int
    inflation_compatible: bool  # Q L' contained in every per-color difference group


def compute_Lprime(
    sys: SubstitutionSystem,
    stabilization_window: int = 2,
    max_rounds: int = 14,
    max_points: int = DEFAULT_POINT_BUDGET,
) -> LprimeReport:
    """HNF of the group generated by same-color differences of growing patches.

    Accepts once the HNF is unchanged for `stabilization_window` consecutive
    iterations; the group is an increasing union, so stabilization is
    detectable but not provable at finite depth (hence the flag).
    """
    patch = sys.seed
    gens: list[Vec] = []
    per_color: list[list[Vec]] = [[] for _ in range(sys.m)]
    current = hnf([], sys.dim)
    color_groups = [hnf([], sys.dim) for _ in range(sys.m)]
    stable = 0
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        patch = apply(sys, patch)
        if patch.total > max_points:
            raise BudgetExceeded("patch points", max_points)
        new_gens = []
        new_color = [[] for _ in range(sys.m)]
        for i, pts in enumerate(patch.points):
            if len(pts) < 2:
                continue
            base = pts[0]
            for p in pts[1:]:
                new_color[i].append(tuple(a - b for a, b in zip(p, base)))
        for i in range(sys.m):
            per_color[i].extend(new_color[i])
            new_gens.extend(new_color[i])
        gens.extend(new_gens)
        nxt = hnf(gens, sys.dim)
        nxt_colors = [hnf(per_color[i], sys.dim) for i in range(sys.m)]
        if nxt == current and nxt_colors == color_groups and current.full_rank:
            stable += 1
            if stable >= stabilization_window:
                break
        else:
            stable = 0
        current, color_groups = nxt, nxt_colors
    stabilized = stable >= stabilization_window
    # sanity relation: Q L' contained in each color's difference group
    q_lprime = current.transform(sys.expansion.rows) if current.rank else current
    compatible = all(
        all(g.contains(row) for row in q_lprime.rows) for g in color_groups
    )
    return LprimeReport(current, stabilized, rounds, compatible)
