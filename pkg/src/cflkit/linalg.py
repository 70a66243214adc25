"""Exact linear algebra over the field of rational expressions.

Matrices are plain lists of rows of Expr (or anything as_expr accepts).
Elimination runs on normal forms, so ranks and nullspaces are exact over
the function field; generic_rank additionally cross-checks the symbolic
answer against numeric SVD ranks at random probe points and refuses to
return if a probe ever exceeds the symbolic rank, which would mean the
elimination lost a row.

Pivot selection is deterministic: among nonzero candidates in the current
column, take the entry of lowest total degree, breaking ties by the
canonical printed form.  Column order is the caller's; order columns to
control which generators a nullspace or RREF emits.
"""

from __future__ import annotations

from .symexpr import Expr, ProbeConfig, as_expr, eval_expr, expr_of_nf
from .symexpr.expr import NF_ONE, NF_ZERO, NormalForm
from .symexpr.poly import ExactDivisionError, Poly, poly_gcd
from .symexpr.probe import _probe_environments
from .symexpr import free_vars, opaque_symbols

_P_ONE = Poly.const(1)
_P_ZERO = Poly.zero()


class LinalgInconsistency(Exception):
    """Numeric probe rank exceeded the symbolic rank."""


def _to_nf_rows(rows) -> list:
    return [[as_expr(x).nf for x in row] for row in rows]


def _pivot_key(nf: NormalForm):
    deg = nf.num.total_degree() + nf.den.total_degree()
    return (deg, str(expr_of_nf(nf)))


def rref_nf(rows: list) -> tuple:
    """Reduced row echelon form of a matrix of NormalForm; returns
    (rref_rows, pivot_cols).  Destroys nothing; operates on copies."""
    mat = [list(r) for r in rows]
    nrows = len(mat)
    ncols = len(mat[0]) if nrows else 0
    pivots = []
    r = 0
    for c in range(ncols):
        if r >= nrows:
            break
        candidates = [i for i in range(r, nrows) if not mat[i][c].is_zero]
        if not candidates:
            continue
        pick = min(candidates, key=lambda i: _pivot_key(mat[i][c]))
        mat[r], mat[pick] = mat[pick], mat[r]
        inv = mat[r][c].inv()
        mat[r] = [x * inv for x in mat[r]]
        for i in range(nrows):
            if i != r and not mat[i][c].is_zero:
                f = mat[i][c]
                mat[i] = [a - f * b for a, b in zip(mat[i], mat[r])]
        pivots.append(c)
        r += 1
    return mat, pivots


def rref(rows) -> tuple:
    """RREF over Expr entries; returns (rows of Expr, pivot_cols)."""
    nf_rows, pivots = rref_nf(_to_nf_rows(rows))
    return [[expr_of_nf(x) for x in row] for row in nf_rows], pivots


def _clear_row(nf_row: list) -> list:
    """Scale a row of NormalForm by the lcm of its denominators; returns Poly."""
    lcm = _P_ONE
    for x in nf_row:
        if x.den.is_const:
            continue
        g = poly_gcd(lcm, x.den)
        lcm = lcm.exact_div(g) * x.den
    out = []
    for x in nf_row:
        if x.den.is_const:
            out.append(x.num * lcm)
        else:
            out.append(x.num * lcm.exact_div(x.den))
    return out


def _echelon_bareiss(mat: list) -> tuple:
    """Fraction-free row echelon form of a matrix of Poly.

    Bareiss one-step elimination: every division by the previous pivot is
    exact, so entries stay polynomial and no gcd reduction runs inside the
    elimination loop.  Returns (echelon_rows, pivot_cols); raises
    ExactDivisionError only if the divisibility invariant is violated,
    which callers treat as a cue to fall back to the NormalForm path.
    """
    rows = [list(r) for r in mat]
    nrows = len(rows)
    ncols = len(rows[0]) if nrows else 0
    pivots = []
    prev = _P_ONE
    r = 0
    for c in range(ncols):
        if r >= nrows:
            break
        candidates = [i for i in range(r, nrows) if not rows[i][c].is_zero]
        if not candidates:
            continue
        pick = min(
            candidates,
            key=lambda i: (rows[i][c].total_degree(), len(rows[i][c].terms)),
        )
        rows[r], rows[pick] = rows[pick], rows[r]
        piv = rows[r][c]
        for i in range(r + 1, nrows):
            f = rows[i][c]
            if f.is_zero:
                tail = [(piv * a).exact_div(prev) for a in rows[i][c + 1 :]]
            else:
                top = rows[r][c + 1 :]
                tail = [
                    (piv * a - f * b).exact_div(prev)
                    for a, b in zip(rows[i][c + 1 :], top)
                ]
            rows[i] = [_P_ZERO] * (c + 1) + tail
        pivots.append(c)
        prev = piv
        r += 1
    return rows, pivots


def rank(rows) -> int:
    """Exact symbolic rank (no numeric cross-check)."""
    if not rows:
        return 0
    nf_rows = _to_nf_rows(rows)
    try:
        _, pivots = _echelon_bareiss([_clear_row(row) for row in nf_rows])
        return len(pivots)
    except ExactDivisionError:
        _, pivots = rref_nf(nf_rows)
        return len(pivots)


def nullspace(rows) -> list:
    """Basis of the right nullspace, one vector per free column, exact.

    The free column's own coordinate is 1; vectors come out in free-column
    order, so callers control the result through column ordering.  Each
    basis vector is the unique nullspace element with that free coordinate
    1 and the other free coordinates 0, so the result does not depend on
    which elimination produced the echelon form.
    """
    if not rows:
        return []
    nf_rows = _to_nf_rows(rows)
    ncols = len(nf_rows[0])
    try:
        ech, pivots = _echelon_bareiss([_clear_row(row) for row in nf_rows])
        ech_nf = None
    except ExactDivisionError:
        ech_nf, pivots = rref_nf(nf_rows)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        vec = [NF_ZERO] * ncols
        vec[f] = NF_ONE
        if ech_nf is not None:
            for i, p in enumerate(pivots):
                vec[p] = -ech_nf[i][f]
        else:
            for i in reversed(range(len(pivots))):
                p = pivots[i]
                acc = NF_ZERO
                for c in range(p + 1, ncols):
                    if vec[c].is_zero or ech[i][c].is_zero:
                        continue
                    acc = acc + NormalForm.make(ech[i][c], _P_ONE) * vec[c]
                if acc.is_zero:
                    vec[p] = NF_ZERO
                else:
                    vec[p] = -(acc * NormalForm.make(ech[i][p], _P_ONE).inv())
        basis.append([expr_of_nf(x) for x in vec])
    return basis


def in_row_span(rows, vec) -> bool:
    """Whether vec lies in the row span of rows (exact)."""
    base = rank(rows)
    return rank(list(rows) + [list(vec)]) == base


def coordinates(rows, vec) -> list | None:
    """Coefficients expressing vec as a combination of independent rows.

    Returns lambda with sum(lambda_i * rows_i) == vec, or None when vec is
    outside the row span.  Solved through the nullspace of the transposed
    matrix augmented with vec as a final column.
    """
    e_rows = [[as_expr(x) for x in row] for row in rows]
    e_vec = [as_expr(x) for x in vec]
    n = len(e_rows)
    augmented = []
    for c in range(len(e_vec)):
        augmented.append([r[c] for r in e_rows] + [e_vec[c]])
    for gen in nullspace(augmented):
        last = gen[n]
        if last.is_zero:
            continue
        return [(-(g / last)).normalized() for g in gen[:n]]
    return None


def det(rows) -> Expr:
    """Determinant by cofactor expansion; meant for small matrices."""
    nf_rows = _to_nf_rows(rows)
    return expr_of_nf(_det_nf(nf_rows))


def _det_nf(m: list) -> NormalForm:
    n = len(m)
    if n == 0:
        return NF_ONE
    if n == 1:
        return m[0][0]
    if n == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    out = NF_ZERO
    sign = 1
    for j in range(n):
        a = m[0][j]
        if not a.is_zero:
            minor = [row[:j] + row[j + 1 :] for row in m[1:]]
            term = a * _det_nf(minor)
            out = out + (term if sign > 0 else -term)
        sign = -sign
    return out


def maximal_minors(rows) -> list:
    """All k x k minors for k = min(nrows, ncols), as Expr, in
    lexicographic order of the selected row/column index tuples."""
    from itertools import combinations

    nf_rows = _to_nf_rows(rows)
    nrows = len(nf_rows)
    ncols = len(nf_rows[0]) if nrows else 0
    k = min(nrows, ncols)
    out = []
    for ri in combinations(range(nrows), k):
        for ci in combinations(range(ncols), k):
            sub = [[nf_rows[i][j] for j in ci] for i in ri]
            out.append(expr_of_nf(_det_nf(sub)))
    return out


def generic_rank(rows, probe: ProbeConfig | None = None) -> int:
    """Rank over the function field, exact elimination cross-checked by SVD.

    Probes evaluate the matrix at random rational points and take the
    numeric rank from the singular value spectrum.  A probe rank above the
    symbolic rank is impossible for a correct elimination and raises
    LinalgInconsistency; probe ranks below it happen at special points and
    are ignored.
    """
    if not rows or not rows[0]:
        return 0
    exprs = [[as_expr(x) for x in row] for row in rows]
    r_sym = rank(exprs)
    cfg = probe or ProbeConfig()
    names = set()
    opaques = set()
    for row in exprs:
        for x in row:
            names |= free_vars(x)
            opaques |= opaque_symbols(x)
    if not names and not opaques:
        return r_sym

    import numpy as np

    rng = cfg.rng()
    accepted = 0
    attempts = 0
    budget = cfg.points * (cfg.retries + 1)
    while accepted < cfg.points and attempts < budget:
        attempts += 1
        env, oenv = _probe_environments(names, opaques, rng)
        try:
            num = np.array(
                [[eval_expr(x, env, oenv) for x in row] for row in exprs], dtype=float
            )
        except Exception:
            continue
        if not np.all(np.isfinite(num)):
            continue
        sv = np.linalg.svd(num, compute_uv=False)
        if sv.size == 0:
            r_num = 0
        else:
            cutoff = max(num.shape) * sv[0] * 1e-10 if sv[0] > 0 else 0.0
            r_num = int((sv > cutoff).sum())
        if r_num > r_sym:
            raise LinalgInconsistency(
                f"probe rank {r_num} exceeds symbolic rank {r_sym}"
            )
        accepted += 1
    return r_sym


def scale_row(row, factor) -> list:
    f = as_expr(factor)
    return [expr_of_nf((f * as_expr(x)).nf) for x in row]
