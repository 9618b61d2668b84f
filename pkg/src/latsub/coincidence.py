"""Modular coincidence and window machinery over finite quotients L / Q^M L'.

Everything in this module is symbolic: classes are computed from translation
parts of iterated maps and from the L'-coset of each color, never from
generated patches.  A level-M class collects the composite maps whose images
land in one coset of Q^M L'; a class contained entirely in one row is a
modular coincidence, and the IN/OUT/BOUNDARY classification of cosets per
color is the finite-level approximation of the windows (closures of the
colors in the inverse-limit group, which itself is never materialized).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .errors import BudgetExceeded, LatticeError
from .lattice import SubgroupHNF, Vec, mat_vec, quotient_index, reduce_mod, scaled_subgroup
from .substitution import (
    Box,
    Cluster,
    SubstitutionSystem,
    apply,
    compute_Lprime,
    filled_core_box,
    substitution_matrix,
)

DEFAULT_CLASS_BUDGET = 600_000


# ---------------------------------------------------------------------------
# shared context: L', per-color coset offsets, partition check


@dataclass(frozen=True)
class SystemContext:
    sys: SubstitutionSystem
    lprime: SubgroupHNF
    lprime_stabilized: bool
    offsets: tuple  # representative point of each color (defines its L'-coset)
    index0: int  # |L / L'|
    partition_ok: bool
    partition_box: Box | None


def _color_offsets(sys: SubstitutionSystem, max_rounds: int = 8):
    """A point of each color, from the smallest patch inhabiting all colors."""
    patch = sys.seed
    for _ in range(max_rounds):
        if all(pts for pts in patch.points):
            break
        patch = apply(sys, patch)
    if not all(pts for pts in patch.points):
        raise LatticeError("some color never becomes inhabited; system not primitive?")
    return tuple(pts[0] for pts in patch.points)


def partition_check(sys: SubstitutionSystem, rounds: int | None = None, min_radius: int = 3):
    """Verify L = union of the colors at patch scale.

    Grows a patch, locates the largest centered box that is covered exactly
    once per lattice point, and confirms the box expands when the patch is
    iterated once more (ruling out sets that merely cover a bounded region).
    Returns (ok, core box).
    """
    if rounds is None:
        # grow until the patch is comfortably past the fringe-dominated sizes
        patch = apply(sys, sys.seed)
        steps = 1
        while patch.total < 5000 and steps < 20 * sys.seed_power:
            patch = apply(sys, patch)
            steps += 1
        for _ in range(steps % sys.seed_power):
            patch = apply(sys, patch)
    else:
        patch = apply(sys, sys.seed)
        for _ in range(rounds - 1):
            patch = apply(sys, patch)
    core = filled_core_box(patch)
    if core is None or -core.lo[0] < min_radius:
        return False, core
    bigger = filled_core_box(apply(sys, patch))
    if bigger is None or bigger.lo[0] >= core.lo[0]:
        return False, core
    return True, core


@lru_cache(maxsize=32)
def build_context(sys: SubstitutionSystem) -> SystemContext:
    lrep = compute_Lprime(sys)
    if not lrep.subgroup.full_rank:
        raise LatticeError("difference lattice L' is not full rank")
    offsets = _color_offsets(sys)
    ok, box = partition_check(sys)
    return SystemContext(
        sys=sys,
        lprime=lrep.subgroup,
        lprime_stabilized=lrep.stabilized,
        offsets=offsets,
        index0=lrep.subgroup.index_in_lattice(),
        partition_ok=ok,
        partition_box=box,
    )


# ---------------------------------------------------------------------------
# residue class tables


@dataclass(frozen=True)
class ClassEntry:
    """One affine map of the iterated substitution, as seen by the table.

    source: the column (color the map acts on); translation: its translation
    part; rows: every row of the digit array hosting this map (exactly one
    for a healthy system; more means the digit is duplicated across rows).
    """

    source: int
    translation: Vec
    rows: tuple


@dataclass(frozen=True)
class ResidueClassTable:
    level: int
    modulus: SubgroupHNF  # Q^level L'
    entries: tuple  # sorted tuple of (coset rep, tuple of ClassEntry)
    total_maps: int

    def lookup(self) -> dict:
        return dict(self.entries)

    def class_rows(self, rep: Vec):
        rows = set()
        for entry in dict(self.entries)[rep]:
            rows.update(entry.rows)
        return rows

    def one_row_classes(self):
        """(rep, row) pairs where the whole class sits inside a single row."""
        out = []
        for rep, entries in self.entries:
            common = None
            for e in entries:
                common = set(e.rows) if common is None else common & set(e.rows)
                if not common:
                    break
            if common:
                for row in sorted(common):
                    out.append((rep, row))
        return out


def _iterated_maps(sys: SubstitutionSystem, level: int, budget: int):
    """Translation parts of Phi^level, grouped by (row, source color).

    maps[(i, j)] is the list of translations t with x -> Q^level x + t sending
    color j into color i.  Built by composing one step at a time.
    """
    q = sys.expansion
    maps = {
        (i, j): [tuple(t) for t in sys.digits[i][j]]
        for i in range(sys.m)
        for j in range(sys.m)
    }
    for _ in range(level - 1):
        nxt = {(i, j): [] for i in range(sys.m) for j in range(sys.m)}
        total = 0
        # compose: outer one-step map (i <- l), inner iterated map (l <- j)
        one_step = {
            (i, l): sys.digits[i][l] for i in range(sys.m) for l in range(sys.m)
        }
        for i in range(sys.m):
            for j in range(sys.m):
                acc = nxt[(i, j)]
                for l in range(sys.m):
                    outer = one_step[(i, l)]
                    inner = maps[(l, j)]
                    if not outer or not inner:
                        continue
                    for t_in in inner:
                        qt = q.apply(t_in)
                        for t_out in outer:
                            acc.append(tuple(a + b for a, b in zip(t_out, qt)))
                total += len(acc)
        if total > budget:
            raise BudgetExceeded("iterated substitution maps", budget)
        maps = nxt
    return maps


def residue_table(
    sys: SubstitutionSystem,
    level: int,
    ctx: SystemContext | None = None,
    budget: int = DEFAULT_CLASS_BUDGET,
) -> ResidueClassTable:
    """Classify every map of Phi^level by the coset of Q^level L' it fills.

    The class of a map with translation t acting on color j is
    Q^level * offset_j + t  modulo  Q^level L'; no patch is generated.
    """
    if level < 1:
        raise LatticeError("level must be >= 1")
    if ctx is None:
        ctx = build_context(sys)
    size = quotient_index(sys.lattice, ctx.lprime, sys.expansion, level)
    if size > budget:
        raise BudgetExceeded("quotient size", budget)
    maps = _iterated_maps(sys, level, budget)
    qk = sys.expansion.power(level)
    classes: dict = {}
    total = 0
    for (i, j), translations in maps.items():
        base = mat_vec(qk, ctx.offsets[j])
        for t in translations:
            total += 1
            rep = reduce_mod(
                tuple(a + b for a, b in zip(base, t)), ctx.lprime, sys.expansion, level
            ).rep
            key = (j, t)
            bucket = classes.setdefault(rep, {})
            bucket.setdefault(key, set()).add(i)
    entries = tuple(
        (
            rep,
            tuple(
                ClassEntry(source=j, translation=t, rows=tuple(sorted(rows)))
                for (j, t), rows in sorted(bucket.items())
            ),
        )
        for rep, bucket in sorted(classes.items())
    )
    return ResidueClassTable(
        level=level,
        modulus=scaled_subgroup(ctx.lprime, sys.expansion, level),
        entries=entries,
        total_maps=total,
    )


@lru_cache(maxsize=128)
def _cached_table(sys: SubstitutionSystem, level: int, budget: int) -> ResidueClassTable:
    return residue_table(sys, level, build_context(sys), budget)


# ---------------------------------------------------------------------------
# modular coincidence


@dataclass(frozen=True)
class CoincidenceReport:
    found: bool
    level: int | None
    witnesses: tuple  # ((coset rep, row index), ...)
    search_bound: int  # requested bound
    searched_to: int  # deepest level actually exhausted
    partition_ok: bool
    budget_exhausted: bool = False

    def describe(self, sys: SubstitutionSystem) -> str:
        if not self.found:
            note = " (stopped by budget)" if self.budget_exhausted else ""
            return f"no modular coincidence found up to M={self.searched_to}{note}"
        names = ", ".join(
            f"{list(rep)} mod Q^{self.level}L' -> row {sys.colors[row]}"
            for rep, row in self.witnesses
        )
        return f"modular coincidence at M={self.level}: {names}"


def find_modular_coincidence(
    sys: SubstitutionSystem,
    m_max: int = 8,
    ctx: SystemContext | None = None,
    budget: int = DEFAULT_CLASS_BUDGET,
) -> CoincidenceReport:
    """Scan levels 1..m_max for a residue class contained in a single row.

    Absence up to the bound is inconclusive (the guaranteed level, when the
    system is pure point, is existential with no effective bound); presence
    is an exact certificate.  Requires the colors to partition the lattice,
    which is verified at patch scale and reported.  Levels whose map count
    exceeds the budget end the scan gracefully with searched_to reduced.
    """
    if ctx is None:
        ctx = build_context(sys)
    searched = 0
    hit_budget = False
    for level in range(1, m_max + 1):
        try:
            table = _cached_table(sys, level, budget)
        except BudgetExceeded:
            hit_budget = True
            break
        searched = level
        witnesses = table.one_row_classes()
        if witnesses:
            return CoincidenceReport(
                found=True,
                level=level,
                witnesses=tuple(witnesses),
                search_bound=m_max,
                searched_to=level,
                partition_ok=ctx.partition_ok,
            )
    return CoincidenceReport(
        found=False,
        level=None,
        witnesses=(),
        search_bound=m_max,
        searched_to=searched,
        partition_ok=ctx.partition_ok,
        budget_exhausted=hit_budget,
    )


# ---------------------------------------------------------------------------
# window coset trees


IN, OUT, BOUNDARY = "IN", "OUT", "BOUNDARY"


@dataclass(frozen=True)
class WindowCosetTree:
    color: int
    depth: int
    classification: tuple  # sorted tuple of (coset rep, "IN"/"OUT"/"BOUNDARY")
    measure_in: Fraction
    measure_boundary: Fraction

    def lookup(self) -> dict:
        return dict(self.classification)

    @property
    def measure_out(self) -> Fraction:
        return 1 - self.measure_in - self.measure_boundary

    def in_cosets(self):
        return tuple(rep for rep, c in self.classification if c == IN)


def window_tree(
    sys: SubstitutionSystem,
    color: int,
    depth: int,
    ctx: SystemContext | None = None,
    budget: int = DEFAULT_CLASS_BUDGET,
) -> WindowCosetTree:
    """Classify all cosets of Q^depth L' against the window of one color.

    IN: every map filling the coset lies in this color's row (the full coset
    belongs to the color); OUT: none does; BOUNDARY: undecided at this depth.
    Measures are exact coset-counting rationals.
    """
    if ctx is None:
        ctx = build_context(sys)
    table = _cached_table(sys, depth, budget)
    size = quotient_index(sys.lattice, ctx.lprime, sys.expansion, depth)
    classification = []
    n_in = 0
    n_boundary = 0
    for rep, entries in table.entries:
        inside = all(color in e.rows for e in entries)
        touches = any(color in e.rows for e in entries)
        if inside:
            classification.append((rep, IN))
            n_in += 1
        elif touches:
            classification.append((rep, BOUNDARY))
            n_boundary += 1
        else:
            classification.append((rep, OUT))
    return WindowCosetTree(
        color=color,
        depth=depth,
        classification=tuple(classification),
        measure_in=Fraction(n_in, size),
        measure_boundary=Fraction(n_boundary, size),
    )


@dataclass(frozen=True)
class WindowMeasures:
    depth: int
    inner: tuple  # Fractions, per color
    outer: tuple  # Fractions, per color
    residual: Fraction  # max_i |outer_i - (1/q)(S outer)_i|


def window_measures(
    sys: SubstitutionSystem,
    depth: int,
    ctx: SystemContext | None = None,
    budget: int = DEFAULT_CLASS_BUDGET,
) -> WindowMeasures:
    """Two-sided window measure estimates plus the eigenvector residual.

    outer_i = measure(IN) + measure(BOUNDARY) and inner_i = measure(IN);
    the window measure vector itself satisfies w = (1/q) S w, so the
    residual of the outer estimate measures how far the finite depth is
    from resolving the windows.
    """
    if ctx is None:
        ctx = build_context(sys)
    trees = [window_tree(sys, i, depth, ctx, budget) for i in range(sys.m)]
    inner = tuple(t.measure_in for t in trees)
    outer = tuple(t.measure_in + t.measure_boundary for t in trees)
    s = substitution_matrix(sys)
    q = Fraction(sys.expansion.absdet)
    residual = max(
        abs(outer[i] - sum(Fraction(s[i][j]) * outer[j] for j in range(sys.m)) / q)
        for i in range(sys.m)
    )
    return WindowMeasures(depth=depth, inner=inner, outer=outer, residual=residual)


def interior_disjointness(
    sys: SubstitutionSystem,
    depth: int,
    ctx: SystemContext | None = None,
    budget: int = DEFAULT_CLASS_BUDGET,
):
    """No coset may be IN for two distinct colors.

    Returns (ok, violations) with violations a tuple of (rep, color, color).
    A violation requires a map hosted by two rows at once, i.e. corrupt input.
    """
    if ctx is None:
        ctx = build_context(sys)
    trees = [window_tree(sys, i, depth, ctx, budget) for i in range(sys.m)]
    in_sets = [dict(t.classification) for t in trees]
    violations = []
    for rep, _ in trees[0].classification:
        owners = [i for i in range(sys.m) if in_sets[i][rep] == IN]
        if len(owners) > 1:
            for a in range(len(owners)):
                for b in range(a + 1, len(owners)):
                    violations.append((rep, owners[a], owners[b]))
    return (not violations), tuple(violations)


# ---------------------------------------------------------------------------
# model set report


def model_set_report(
    sys: SubstitutionSystem,
    depth: int = 4,
    m_max: int = 8,
    ctx: SystemContext | None = None,
    budget: int = DEFAULT_CLASS_BUDGET,
    max_listed_cosets: int = 32,
) -> dict:
    """Structured cut-and-project description at finite depth.

    The internal group is described through its tower of finite quotients;
    windows are reported as unions of IN cosets plus a boundary bound.  The
    verdict block states which of the five equivalent pure-point criteria are
    certified/evidenced by the computed data.
    """
    if ctx is None:
        ctx = build_context(sys)
    coin = find_modular_coincidence(sys, m_max, ctx, budget)
    measures = window_measures(sys, depth, ctx, budget)
    disjoint_ok, violations = interior_disjointness(sys, depth, ctx, budget)
    trees = [window_tree(sys, i, depth, ctx, budget) for i in range(sys.m)]

    windows = []
    for i, tree in enumerate(trees):
        in_cosets = tree.in_cosets()
        windows.append(
            {
                "color": sys.colors[i],
                "depth": depth,
                "in_coset_count": len(in_cosets),
                "in_cosets": [list(r) for r in in_cosets[:max_listed_cosets]],
                "measure_in": str(tree.measure_in),
                "measure_boundary": str(tree.measure_boundary),
                "empty_interior_at_depth": len(in_cosets) == 0,
            }
        )

    if coin.found:
        verdict = "pure point / regular model set"
        status = "certified"
        detail = coin.describe(sys)
    else:
        verdict = f"no modular coincidence found up to M={coin.search_bound}"
        status = "inconclusive"
        detail = (
            "absence at finite level does not refute higher levels; "
            "pure-point criteria unverified by this check"
        )

    return {
        "cut_and_project": {
            "physical_space": f"R^{sys.dim}",
            "internal_group": (
                f"inverse limit of L/Q^k L' (represented to depth {depth})"
            ),
            "embedding": "t -> (t, t) on the diagonal of physical x internal",
            "index_L_over_Lprime": ctx.index0,
            "det_Q": sys.expansion.absdet,
        },
        "modular_coincidence": {
            "found": coin.found,
            "level": coin.level,
            "witnesses": [
                {"coset": list(rep), "row": sys.colors[row]}
                for rep, row in coin.witnesses
            ],
            "search_bound": coin.search_bound,
            "partition_verified": coin.partition_ok,
        },
        "windows": windows,
        "window_measures": {
            "depth": depth,
            "inner": [str(x) for x in measures.inner],
            "outer": [str(x) for x in measures.outer],
            "residual_outer": str(measures.residual),
            "residual_outer_float": float(measures.residual),
        },
        "interior_disjointness": {
            "depth": depth,
            "ok": disjoint_ok,
            "violations": [
                {"coset": list(rep), "colors": [sys.colors[a], sys.colors[b]]}
                for rep, a, b in violations
            ],
        },
        "verdict": {"status": status, "text": verdict, "detail": detail},
    }
