"""Exact integer lattice arithmetic.

Everything here works on integer coordinate vectors relative to a declared
lattice basis; the basis itself is the only rational object.  Subgroups are
canonicalized as Hermite normal forms over Python's arbitrary-precision
integers, so quotient arithmetic (cosets of Q^k L' inside L) stays exact no
matter how fast the entries grow.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import LatticeError

Vec = tuple[int, ...]


# ---------------------------------------------------------------------------
# small exact matrix helpers


def xgcd(a: int, b: int):
    """Return (g, x, y) with g = gcd(a, b) = x*a + y*b."""
    x, next_x = 1, 0
    y, next_y = 0, 1
    g, next_g = a, b
    while next_g:
        q = g // next_g
        x, next_x = next_x, x - q * next_x
        y, next_y = next_y, y - q * next_y
        g, next_g = next_g, g - q * next_g
    return g, x, y


def mat_vec(rows, v) -> Vec:
    return tuple(sum(r[k] * v[k] for k in range(len(v))) for r in rows)


def mat_mul(a, b):
    n, mid, m = len(a), len(b), len(b[0])
    return tuple(
        tuple(sum(a[i][k] * b[k][j] for k in range(mid)) for j in range(m))
        for i in range(n)
    )


def mat_pow(rows, k: int):
    d = len(rows)
    result = tuple(tuple(int(i == j) for j in range(d)) for i in range(d))
    base = rows
    while k:
        if k & 1:
            result = mat_mul(result, base)
        base = mat_mul(base, base)
        k >>= 1
    return result


def det_exact(rows):
    """Determinant by fraction-free elimination; exact for int or Fraction."""
    d = len(rows)
    m = [list(r) for r in rows]
    sign = 1
    prev = 1
    for k in range(d - 1):
        if m[k][k] == 0:
            for r in range(k + 1, d):
                if m[r][k] != 0:
                    m[k], m[r] = m[r], m[k]
                    sign = -sign
                    break
            else:
                return 0 * prev
        for i in range(k + 1, d):
            for j in range(k + 1, d):
                num = m[i][j] * m[k][k] - m[i][k] * m[k][j]
                if isinstance(num, int):
                    m[i][j] = num // prev
                else:
                    m[i][j] = num / prev
            m[i][k] = 0
        prev = m[k][k]
    return sign * m[d - 1][d - 1]


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class LatticeBasis:
    """A full-rank lattice in R^d; columns of `basis` are the basis vectors."""

    dim: int
    basis: tuple  # d x d matrix of Fractions, row-major

    def __post_init__(self):
        if len(self.basis) != self.dim or any(len(r) != self.dim for r in self.basis):
            raise LatticeError("lattice basis must be d x d")
        if det_exact(self.basis) == 0:
            raise LatticeError("lattice basis is singular")

    @classmethod
    def from_rows(cls, rows):
        frac = tuple(tuple(Fraction(x) for x in r) for r in rows)
        return cls(len(frac), frac)

    @classmethod
    def standard(cls, dim: int):
        return cls.from_rows(
            [[1 if i == j else 0 for j in range(dim)] for i in range(dim)]
        )

    def to_ambient(self, v: Vec):
        """Ambient coordinates of the lattice point with integer coordinates v."""
        return tuple(
            sum(self.basis[i][j] * v[j] for j in range(self.dim))
            for i in range(self.dim)
        )

    @property
    def covolume(self) -> Fraction:
        return abs(det_exact(self.basis))


@dataclass(frozen=True)
class ExpansionMatrix:
    """Integer matrix acting on lattice coordinates (the common linear part Q).

    The constructor only checks shape; expansivity and |det| >= 2 are system
    level requirements, enforced when a substitution system is validated, so
    that degenerate matrices can still be passed to the checking operations.
    """

    rows: tuple  # d x d, integer entries

    def __post_init__(self):
        d = len(self.rows)
        if any(len(r) != d for r in self.rows):
            raise LatticeError("expansion matrix must be square")
        if not all(isinstance(x, int) for r in self.rows for x in r):
            raise LatticeError("expansion matrix entries must be integers")

    @classmethod
    def from_rows(cls, rows):
        return cls(tuple(tuple(int(x) for x in r) for r in rows))

    @property
    def dim(self) -> int:
        return len(self.rows)

    @property
    def absdet(self) -> int:
        return abs(det_exact(self.rows))

    def apply(self, v: Vec) -> Vec:
        return mat_vec(self.rows, v)

    def power(self, k: int):
        return mat_pow(self.rows, k)


@dataclass(frozen=True)
class SubgroupHNF:
    """Canonical Hermite-form basis of a subgroup of Z^d.

    Internally rows are echelon generators (pivot per row, pivots positive,
    entries above each pivot reduced into [0, pivot)).  `basis` exposes the
    column-style d x rank matrix whose columns are the basis vectors.
    """

    dim: int
    rows: tuple  # rank x dim echelon generator rows
    pivots: tuple  # pivot column index per row

    @property
    def rank(self) -> int:
        return len(self.rows)

    @property
    def basis(self):
        """Column-style HNF matrix (d x rank)."""
        return tuple(
            tuple(self.rows[j][i] for j in range(self.rank)) for i in range(self.dim)
        )

    @property
    def full_rank(self) -> bool:
        return self.rank == self.dim

    def index_in_lattice(self) -> int:
        """[Z^d : subgroup] for full-rank subgroups."""
        if not self.full_rank:
            raise LatticeError("subgroup is not full rank")
        prod = 1
        for i, p in enumerate(self.pivots):
            prod *= self.rows[i][p]
        return prod

    def reduce(self, v: Vec) -> Vec:
        """Canonical representative of v modulo the subgroup."""
        if len(v) != self.dim:
            raise LatticeError("vector has wrong dimension")
        w = list(v)
        for row, p in zip(self.rows, self.pivots):
            q = w[p] // row[p]
            if q:
                for k in range(p, self.dim):
                    w[k] -= q * row[k]
        return tuple(w)

    def contains(self, v: Vec) -> bool:
        return all(x == 0 for x in self.reduce(v))

    def transform(self, matrix_rows) -> "SubgroupHNF":
        """Image subgroup under an injective integer matrix (e.g. Q^k)."""
        return hnf([mat_vec(matrix_rows, r) for r in self.rows], self.dim)

    def sum_with(self, other: "SubgroupHNF") -> "SubgroupHNF":
        return hnf(list(self.rows) + list(other.rows), self.dim)


def hnf(generators, dim: int) -> SubgroupHNF:
    """Canonical Hermite normal form of the subgroup generated by `generators`.

    Any two generator lists with the same integer span map to the identical
    SubgroupHNF.  The empty list generates the trivial subgroup (rank 0).
    """
    rows: list[list[int]] = []
    pivots: list[int] = []
    for gen in generators:
        if len(gen) != dim:
            raise LatticeError(f"generator {gen} has dimension != {dim}")
        vec = [int(x) for x in gen]
        j = 0
        while j < dim:
            if vec[j] == 0:
                j += 1
                continue
            try:
                r = pivots.index(j)
            except ValueError:
                # becomes a new pivot row, keep rows ordered by pivot column
                where = sum(1 for p in pivots if p < j)
                rows.insert(where, vec)
                pivots.insert(where, j)
                break
            a, b = rows[r][j], vec[j]
            if b % a == 0:
                q = b // a
                for k in range(j, dim):
                    vec[k] -= q * rows[r][k]
            else:
                g, x, y = xgcd(a, b)
                ag, bg = a // g, b // g
                old = rows[r]
                rows[r] = [x * old[k] + y * vec[k] for k in range(dim)]
                vec = [-bg * old[k] + ag * vec[k] for k in range(dim)]
            # vec[j] is now 0; continue elimination at the same column
    # normalize: positive pivots, entries above each pivot reduced
    for r in range(len(rows)):
        if rows[r][pivots[r]] < 0:
            rows[r] = [-x for x in rows[r]]
    for r in range(len(rows)):
        p = pivots[r]
        for above in range(r):
            q = rows[above][p] // rows[r][p]
            if q:
                rows[above] = [
                    rows[above][k] - q * rows[r][k] for k in range(dim)
                ]
    return SubgroupHNF(dim, tuple(tuple(r) for r in rows), tuple(pivots))


# ---------------------------------------------------------------------------
# expansivity / inflation checks


@dataclass(frozen=True)
class ExpansivityReport:
    expansive: bool
    margin: float
    indeterminate: bool


def is_expansive(
    q: ExpansionMatrix, tol: float = 1e-9, indeterminate_margin: float = 1e-6
) -> ExpansivityReport:
    """Numeric check that all eigenvalues lie outside the closed unit disk.

    margin = min |eigenvalue| - 1.  Matrices within `indeterminate_margin` of
    the unit circle are rejected as indeterminate rather than guessed.
    """
    try:
        eigs = np.linalg.eigvals(np.array(q.rows, dtype=float))
        margin = float(min(abs(e) for e in eigs)) - 1.0
    except np.linalg.LinAlgError:
        return ExpansivityReport(False, float("-inf"), True)
    indeterminate = abs(margin) < indeterminate_margin
    return ExpansivityReport(margin > tol and not indeterminate, margin, indeterminate)


def charpoly_int(rows) -> list[int]:
    """Characteristic polynomial coefficients [1, c_{d-1}, ..., c_0], exact."""
    d = len(rows)
    frac = [[Fraction(x) for x in r] for r in rows]
    coeffs = [Fraction(1)]
    m = None
    for k in range(1, d + 1):
        if m is None:
            m = frac
        else:
            m = [
                [
                    sum(frac[i][t] * prev[t][j] for t in range(d))
                    for j in range(d)
                ]
                for i in range(d)
            ]
        trace = sum(m[i][i] for i in range(d))
        c = -trace / k
        coeffs.append(c)
        prev = [[m[i][j] + (c if i == j else 0) for j in range(d)] for i in range(d)]
    out = []
    for c in coeffs:
        if c.denominator != 1:
            raise LatticeError("characteristic polynomial is not integral")
        out.append(int(c))
    return out


def is_inflation(q: ExpansionMatrix, lattice: LatticeBasis | None = None) -> bool:
    """True iff det Q != 0 and the intersection of all Q^k Z^d is trivial.

    For expansive integer Q this is automatic and the check short-circuits.
    Otherwise the intersection is nontrivial exactly when the characteristic
    polynomial has an irreducible factor with constant term +-1 (Q restricts
    to an automorphism of some nonzero sublattice).  The declared lattice does
    not enter the computation: Q is already given in lattice coordinates.
    """
    if q.absdet == 0:
        return False
    rep = is_expansive(q)
    if rep.expansive:
        return True
    coeffs = charpoly_int(q.rows)
    import sympy

    x = sympy.Symbol("x")
    poly = sympy.Poly(coeffs, x)
    for factor, _mult in poly.factor_list()[1]:
        const = factor.eval(0)
        if abs(int(const)) == 1:
            return False
    return True


# ---------------------------------------------------------------------------
# quotients L / Q^k L'


@lru_cache(maxsize=512)
def scaled_subgroup(sub: SubgroupHNF, q: ExpansionMatrix, k: int) -> SubgroupHNF:
    """HNF of Q^k . sub (entries grow like |det Q|^k; stays exact)."""
    if k == 0:
        return sub
    return sub.transform(q.power(k))


def quotient_index(
    lattice: LatticeBasis, sub: SubgroupHNF, q: ExpansionMatrix, k: int
) -> int:
    """|L / Q^k L'| = |det Q|^k * |L / L'|, exactly."""
    if not sub.full_rank:
        raise LatticeError("quotient is infinite: subgroup not full rank")
    if k < 0:
        raise LatticeError("level must be nonnegative")
    return (q.absdet ** k) * sub.index_in_lattice()


@dataclass(frozen=True)
class Coset:
    """The coset rep + Q^level L' inside L, with its canonical representative."""

    level: int
    rep: Vec
    modulus: SubgroupHNF  # subgroup Q^level L'


def reduce_mod(x: Vec, sub: SubgroupHNF, q: ExpansionMatrix, k: int) -> Coset:
    """Canonical coset of x modulo Q^k L'; idempotent on representatives."""
    mod = scaled_subgroup(sub, q, k)
    return Coset(k, mod.reduce(tuple(int(v) for v in x)), mod)


class CosetRelation(enum.Enum):
    EQUAL = "equal"
    FIRST_IN_SECOND = "first_in_second"
    SECOND_IN_FIRST = "second_in_first"
    DISJOINT = "disjoint"


def coset_relation(c1: Coset, c2: Coset) -> CosetRelation:
    """Exact classification; cosets must be over the same L, L', Q.

    Two cosets of nested subgroups are either nested or disjoint; at equal
    level they are equal or disjoint.
    """
    diff = tuple(a - b for a, b in zip(c1.rep, c2.rep))
    if c1.level == c2.level and c1.modulus == c2.modulus:
        if all(d == 0 for d in c1.modulus.reduce(diff)):
            return CosetRelation.EQUAL
        return CosetRelation.DISJOINT
    coarse, fine_in_coarse = (
        (c1.modulus, CosetRelation.SECOND_IN_FIRST)
        if c1.level < c2.level
        else (c2.modulus, CosetRelation.FIRST_IN_SECOND)
    )
    if coarse.contains(diff):
        return fine_in_coarse
    return CosetRelation.DISJOINT
