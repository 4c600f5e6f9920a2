"""Exact rational linear programming (two-phase tableau simplex, Bland's rule)."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import DimensionMismatch, LPFailure

ZERO = Fraction(0)
ONE = Fraction(1)

RELATIONS = (">=", "<=", "=")


class Status(enum.Enum):
    OPTIMAL = "OPTIMAL"
    INFEASIBLE = "INFEASIBLE"
    UNBOUNDED = "UNBOUNDED"


@dataclass
class LinearProgram:
    """minimize ``objective . x`` subject to ``rows``.

    Each row is ``(coeffs, relation, rhs)`` with relation in ``>=, <=, =``.
    ``nonneg[j]`` marks ``x_j >= 0``; other variables are free.
    """

    objective: Sequence
    rows: list = field(default_factory=list)
    nonneg: Sequence[bool] | None = None

    @property
    def n(self) -> int:
        return len(self.objective)

    def add(self, coeffs, relation: str, rhs) -> None:
        self.rows.append((list(coeffs), relation, rhs))


@dataclass
class LPResult:
    status: Status
    x: list[Fraction] | None = None
    value: Fraction | None = None
    ray: list[Fraction] | None = None
    dual: list[Fraction] | None = None


def _frac(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


class _Tableau:
    def __init__(self, rows: list[list[Fraction]], rhs: list[Fraction], n_struct: int):
        self.rows = rows
        self.rhs = rhs
        self.n_struct = n_struct  # columns eligible to enter the basis
        self.m = len(rows)
        self.basis = [n_struct + i for i in range(self.m)]  # artificials

    def pivot(self, r: int, c: int) -> None:
        row = self.rows[r]
        piv = row[c]
        if piv != 1:
            inv = 1 / piv
            self.rows[r] = row = [v * inv for v in row]
            self.rhs[r] *= inv
        for i in range(self.m):
            if i == r:
                continue
            other = self.rows[i]
            k = other[c]
            if k:
                self.rows[i] = [a - k * b if b else a for a, b in zip(other, row)]
                self.rhs[i] -= k * self.rhs[r]
        self.basis[r] = c

    def reduced_costs(self, cost: list[Fraction]) -> list[Fraction]:
        ncol = len(self.rows[0]) if self.rows else len(cost)
        red = list(cost) + [ZERO] * (ncol - len(cost))
        for i, b in enumerate(self.basis):
            cb = red_cost_of(cost, b)
            if cb:
                row = self.rows[i]
                red = [r - cb * a if a else r for r, a in zip(red, row)]
        # basic columns have zero reduced cost by construction
        return red

    def run(self, cost: list[Fraction]):
        """Minimise ``cost`` over the current basis; returns None or the unbounded column."""
        while True:
            red = self.reduced_costs(cost)
            entering = next((j for j in range(self.n_struct) if red[j] < 0), None)
            if entering is None:
                return None
            best = None
            for i in range(self.m):
                a = self.rows[i][entering]
                if a > 0:
                    ratio = self.rhs[i] / a
                    key = (ratio, self.basis[i])
                    if best is None or key < best[0]:
                        best = (key, i)
            if best is None:
                return entering
            self.pivot(best[1], entering)


def red_cost_of(cost: list[Fraction], col: int) -> Fraction:
    return cost[col] if col < len(cost) else ZERO


def lp_solve(p: LinearProgram) -> LPResult:
    """Solve ``p`` exactly. UNBOUNDED results carry an improving ray in x-space."""
    n = p.n
    nonneg = list(p.nonneg) if p.nonneg is not None else [False] * n
    if len(nonneg) != n:
        raise DimensionMismatch("nonneg flags do not match the number of variables")
    c = [_frac(v) for v in p.objective]

    # column layout: one column per nonneg var, two per free var, then slacks
    col_of: list[tuple[int, int | None]] = []
    ncols = 0
    for j in range(n):
        if nonneg[j]:
            col_of.append((ncols, None))
            ncols += 1
        else:
            col_of.append((ncols, ncols + 1))
            ncols += 2
    n_slack = sum(1 for _, rel, _ in p.rows if rel != "=")
    width = ncols + n_slack
    m = len(p.rows)

    A: list[list[Fraction]] = []
    b: list[Fraction] = []
    signs: list[int] = []
    slack = ncols
    for coeffs, rel, rhs in p.rows:
        if len(coeffs) != n:
            raise DimensionMismatch(f"row has {len(coeffs)} coefficients, expected {n}")
        if rel not in RELATIONS:
            raise DimensionMismatch(f"unknown relation {rel!r}")
        row = [ZERO] * width
        for j, v in enumerate(coeffs):
            v = _frac(v)
            if not v:
                continue
            pos, neg = col_of[j]
            row[pos] = v
            if neg is not None:
                row[neg] = -v
        if rel == ">=":
            row[slack] = -ONE
            slack += 1
        elif rel == "<=":
            row[slack] = ONE
            slack += 1
        rhs = _frac(rhs)
        sign = 1
        if rhs < 0:
            row = [-v for v in row]
            rhs = -rhs
            sign = -1
        i = len(A)
        A.append(row + [ONE if k == i else ZERO for k in range(m)])
        b.append(rhs)
        signs.append(sign)

    tab = _Tableau(A, b, width)
    if m:
        phase1 = [ZERO] * width + [ONE] * m
        unb = tab.run(phase1)
        if unb is not None:  # pragma: no cover - phase one is bounded below by zero
            raise LPFailure("phase one reported unboundedness")
        infeas = sum((tab.rhs[i] for i in range(m) if tab.basis[i] >= width), ZERO)
        if infeas > 0:
            return LPResult(Status.INFEASIBLE)
        # drive zero-level artificials out where possible
        for i in range(m):
            if tab.basis[i] >= width:
                j = next((j for j in range(width) if tab.rows[i][j] != 0), None)
                if j is not None:
                    tab.pivot(i, j)

    cost = [ZERO] * width
    for j in range(n):
        pos, neg = col_of[j]
        cost[pos] = c[j]
        if neg is not None:
            cost[neg] = -c[j]
    entering = tab.run(cost)

    def to_x(y: list[Fraction]) -> list[Fraction]:
        out = []
        for j in range(n):
            pos, neg = col_of[j]
            out.append(y[pos] - (y[neg] if neg is not None else ZERO))
        return out

    y = [ZERO] * (width + m)
    for i, bv in enumerate(tab.basis):
        y[bv] = tab.rhs[i]

    if entering is not None:
        d = [ZERO] * (width + m)
        d[entering] = ONE
        for i, bv in enumerate(tab.basis):
            d[bv] = -tab.rows[i][entering]
        return LPResult(Status.UNBOUNDED, x=to_x(y), ray=to_x(d))

    x = to_x(y)
    value = sum((cj * xj for cj, xj in zip(c, x)), ZERO)
    # duals: c_B B^{-1}, read off the artificial block of the final tableau
    dual = []
    for k in range(m):
        acc = ZERO
        for i, bv in enumerate(tab.basis):
            cb = cost[bv] if bv < width else ZERO
            if cb:
                acc += cb * tab.rows[i][width + k]
        dual.append(acc * signs[k])
    return LPResult(Status.OPTIMAL, x=x, value=value, dual=dual)


@dataclass
class HullCertificate:
    member: bool
    weights: list[Fraction] | None = None
    separator: list[Fraction] | None = None
    margin: Fraction | None = None


def _hull_single(point: Sequence, generators: Sequence[Sequence]) -> HullCertificate:
    k = len(generators)
    dim = len(point)
    lp = LinearProgram([ZERO] * k, nonneg=[True] * k)
    lp.add([ONE] * k, "=", ONE)
    for d in range(dim):
        lp.add([g[d] for g in generators], "=", point[d])
    res = lp_solve(lp)
    if res.status is Status.OPTIMAL:
        return HullCertificate(True, weights=res.x)
    # separation: min <X,p> - t  s.t. <X,g_i> - t >= 0, -1 <= X_d <= 1
    sep = LinearProgram([_frac(v) for v in point] + [-ONE])
    for g in generators:
        sep.add([_frac(v) for v in g] + [-ONE], ">=", ZERO)
    for d in range(dim):
        unit = [ZERO] * (dim + 1)
        unit[d] = ONE
        sep.add(unit, "<=", ONE)
        sep.add(unit, ">=", -ONE)
    res = lp_solve(sep)
    if res.status is not Status.OPTIMAL or res.value >= 0:
        raise LPFailure("separation LP failed for a point outside the hull")
    X = res.x[:dim]
    return HullCertificate(False, separator=X, margin=-res.value)


def hull_membership(point: Sequence, generators: Sequence[Sequence], groups: Sequence[Sequence[int]] | None = None):
    """Is ``point`` a convex combination of ``generators``?

    With ``groups`` the test runs separately on each coordinate group (one
    group per conditioning atom) and the point is a member iff every group is.
    Returns ``(member, certificates)`` with one certificate per group.
    """
    if not generators:
        raise DimensionMismatch("need at least one generator")
    dim = len(point)
    if any(len(g) != dim for g in generators):
        raise DimensionMismatch("generators and point have different dimensions")
    if groups is None:
        groups = [list(range(dim))]
    certs = []
    for grp in groups:
        p = [point[d] for d in grp]
        gens = [[g[d] for d in grp] for g in generators]
        certs.append(_hull_single(p, gens))
    return all(c.member for c in certs), certs
