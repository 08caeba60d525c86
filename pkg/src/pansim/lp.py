"""Dense two-phase primal simplex with Bland's rule.

Small and exact on purpose: allocation instances are tiny (at most a few
hundred variables), vertex solutions make oracle comparison easy, and
Bland's rule rules out cycling. Variables are nonnegative; upper bounds
are expanded into rows at solve time.

Problems can be round-tripped through a plain text format::

    min                  # or max
    1.0 2.0              # objective coefficients
    1 1 <= 10            # one constraint per line
    1 0 >= 2
    bounds 5 inf         # optional upper bounds, inf allowed
    end
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_TOL = 1e-9
_FEAS_TOL = 1e-7

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class LPError(ValueError):
    pass


@dataclass
class LPProblem:
    """min (or max) c.x s.t. rows, 0 <= x <= upper."""

    c: np.ndarray
    rows: list[tuple[np.ndarray, str, float]] = field(default_factory=list)
    upper: np.ndarray | None = None
    sense: str = "min"

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        if self.sense not in ("min", "max"):
            raise LPError(f"sense must be min or max, got {self.sense!r}")
        if not np.isfinite(self.c).all():
            raise LPError("objective coefficients must be finite")
        if self.upper is not None:
            self.upper = np.asarray(self.upper, dtype=float)
            if len(self.upper) != len(self.c):
                raise LPError("upper bound vector length mismatch")

    def add_row(self, coeffs, sense: str, rhs: float) -> None:
        coeffs = np.asarray(coeffs, dtype=float)
        if len(coeffs) != len(self.c):
            raise LPError("constraint length mismatch")
        if sense not in ("<=", ">=", "="):
            raise LPError(f"unknown constraint sense {sense!r}")
        if not (np.isfinite(coeffs).all() and np.isfinite(rhs)):
            raise LPError("constraint coefficients must be finite")
        self.rows.append((coeffs, sense, float(rhs)))

    def expanded_rows(self) -> list[tuple[np.ndarray, str, float]]:
        """Structural rows plus one ``x_i <= u_i`` row per finite bound."""
        rows = list(self.rows)
        if self.upper is not None:
            n = len(self.c)
            for i, u in enumerate(self.upper):
                if np.isfinite(u):
                    e = np.zeros(n)
                    e[i] = 1.0
                    rows.append((e, "<=", float(u)))
        return rows


@dataclass
class LPSolution:
    status: str
    x: np.ndarray | None = None
    objective: float | None = None
    note: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def _pivot(T: np.ndarray, basis: list[int], row: int, col: int) -> None:
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and abs(T[r, col]) > 0.0:
            T[r] -= T[r, col] * T[row]
    basis[row] = col


def _bland_entering(obj_row: np.ndarray, allowed: int) -> int:
    for j in range(allowed):
        if obj_row[j] < -_TOL:
            return j
    return -1


def _bland_leaving(T: np.ndarray, basis: list[int], col: int, m: int) -> int:
    best_ratio = None
    best_row = -1
    for i in range(m):
        a = T[i, col]
        if a > _TOL:
            ratio = T[i, -1] / a
            if (best_ratio is None or ratio < best_ratio - _TOL
                    or (abs(ratio - best_ratio) <= _TOL and basis[i] < basis[best_row])):
                best_ratio = ratio
                best_row = i
    return best_row


def lp_solve(problem: LPProblem) -> LPSolution:
    """Solve to an optimal vertex, or report infeasible/unbounded.

    Optimal solutions satisfy every constraint within 1e-7; a violation
    after convergence is reported as a numerical-breakdown note.
    """
    c = problem.c if problem.sense == "min" else -problem.c
    n = len(c)
    rows = problem.expanded_rows()
    m = len(rows)

    if m == 0:
        # bounded below only by x >= 0
        if (c >= -_TOL).all():
            x = np.zeros(n)
            return LPSolution(OPTIMAL, x, float(problem.c @ x))
        return LPSolution(UNBOUNDED, note="negative cost with no constraints")

    A = np.array([r[0] for r in rows], dtype=float)
    senses = [r[1] for r in rows]
    b = np.array([r[2] for r in rows], dtype=float)

    flip = b < 0
    A[flip] *= -1.0
    b[flip] = -b[flip]
    senses = [
        {"<=": ">=", ">=": "<=", "=": "="}[s] if f else s
        for s, f in zip(senses, flip)
    ]

    n_slack = sum(1 for s in senses if s == "<=")
    n_surplus = sum(1 for s in senses if s == ">=")
    n_art = sum(1 for s in senses if s in (">=", "="))
    total = n + n_slack + n_surplus + n_art

    T = np.zeros((m + 1, total + 1))
    T[:m, :n] = A
    T[:m, -1] = b
    basis: list[int] = [0] * m
    s_at, p_at, a_at = n, n + n_slack, n + n_slack + n_surplus
    si = pi = ai = 0
    artificials: list[int] = []
    for i, s in enumerate(senses):
        if s == "<=":
            T[i, s_at + si] = 1.0
            basis[i] = s_at + si
            si += 1
        elif s == ">=":
            T[i, p_at + pi] = -1.0
            T[i, a_at + ai] = 1.0
            basis[i] = a_at + ai
            artificials.append(a_at + ai)
            pi += 1
            ai += 1
        else:
            T[i, a_at + ai] = 1.0
            basis[i] = a_at + ai
            artificials.append(a_at + ai)
            ai += 1

    # phase 1: minimize the sum of artificials
    if artificials:
        for j in artificials:
            T[m, j] = 1.0
        for i in range(m):
            if basis[i] in artificials:
                T[m] -= T[i]
        while True:
            col = _bland_entering(T[m, :total], total)
            if col == -1:
                break
            row = _bland_leaving(T, basis, col, m)
            if row == -1:
                return LPSolution(INFEASIBLE, note="phase-1 unbounded (degenerate input)")
            _pivot(T, basis, row, col)
        if -T[m, -1] > _FEAS_TOL:
            return LPSolution(INFEASIBLE, note=f"phase-1 optimum {-T[m, -1]:.3e} > 0")
        # drive leftover artificials out of the basis
        art_set = set(artificials)
        for i in range(m):
            if basis[i] in art_set:
                piv = next((j for j in range(total) if j not in art_set
                            and abs(T[i, j]) > _TOL), None)
                if piv is None:
                    T[i] = 0.0          # redundant row
                else:
                    _pivot(T, basis, i, piv)

    # phase 2: the real objective, with artificial columns frozen
    art_set = set(artificials)
    T[m] = 0.0
    T[m, :n] = c
    for i in range(m):
        if basis[i] < total and abs(T[m, basis[i]]) > 0.0:
            T[m] -= T[m, basis[i]] * T[i]
    allowed = total
    while True:
        col = -1
        for j in range(allowed):
            if j in art_set:
                continue
            if T[m, j] < -_TOL:
                col = j
                break
        if col == -1:
            break
        row = _bland_leaving(T, basis, col, m)
        if row == -1:
            return LPSolution(UNBOUNDED, note=f"column {col} unbounded")
        _pivot(T, basis, row, col)

    x = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = T[i, -1]
    x[np.abs(x) < _TOL] = 0.0

    residual = feasibility_residual(problem, x)
    if residual > _FEAS_TOL:
        return LPSolution(INFEASIBLE, x=x,
                          note=f"numerical breakdown: residual {residual:.3e}")
    return LPSolution(OPTIMAL, x, float(problem.c @ x))


def feasibility_residual(problem: LPProblem, x: np.ndarray) -> float:
    """Largest constraint violation of x, independent of the solver path."""
    worst = float(np.max(-x, initial=0.0))
    for coeffs, sense, rhs in problem.expanded_rows():
        lhs = float(coeffs @ x)
        if sense == "<=":
            worst = max(worst, lhs - rhs)
        elif sense == ">=":
            worst = max(worst, rhs - lhs)
        else:
            worst = max(worst, abs(lhs - rhs))
    return worst


def parse_lp(text: str) -> LPProblem:
    """Parse the plain-text row format documented in the module docstring."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.strip().splitlines()]
    lines = [ln for ln in lines if ln]
    if len(lines) < 2:
        raise LPError("LP text needs a sense line and an objective line")
    sense = lines[0].lower()
    if sense not in ("min", "max"):
        raise LPError(f"first line must be 'min' or 'max', got {lines[0]!r}")
    try:
        c = np.array([float(t) for t in lines[1].split()])
    except ValueError as exc:
        raise LPError(f"bad objective line: {exc}") from exc
    problem = LPProblem(c=c, sense=sense)
    for ln in lines[2:]:
        if ln.lower() == "end":
            break
        if ln.lower().startswith("bounds"):
            toks = ln.split()[1:]
            if len(toks) != len(c):
                raise LPError("bounds line length mismatch")
            problem.upper = np.array(
                [np.inf if t.lower() == "inf" else float(t) for t in toks])
            continue
        for op in ("<=", ">=", "="):
            if op in ln:
                left, rhs = ln.split(op, 1)
                try:
                    coeffs = [float(t) for t in left.split()]
                    problem.add_row(coeffs, op, float(rhs))
                except ValueError as exc:
                    raise LPError(f"bad constraint line {ln!r}: {exc}") from exc
                break
        else:
            raise LPError(f"constraint line {ln!r} has no <=, >= or =")
    return problem


def format_lp(problem: LPProblem) -> str:
    """Inverse of :func:`parse_lp`."""
    out = [problem.sense, " ".join(repr(v) for v in problem.c)]
    for coeffs, sense, rhs in problem.rows:
        out.append(f"{' '.join(repr(v) for v in coeffs)} {sense} {rhs!r}")
    if problem.upper is not None:
        out.append("bounds " + " ".join(
            "inf" if not np.isfinite(u) else repr(float(u)) for u in problem.upper))
    out.append("end")
    return "\n".join(out) + "\n"
