import logging
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg

from app.config.main import DENSE_SVD_LIMIT, POWER_ITERATION_MAX_ITER, POWER_ITERATION_TOL, SEED
from app.exceptions import InvalidInputError, ShapeMismatchError, UncertifiableWindowError
from app.sections.schema import Adjoint, Expr, FiniteSection, OperatorRule, Product, Scaled, SectionSummary, Sum
from app.series.service import conjugate_scalar, to_complex

logger = logging.getLogger(__name__)


def _add_opt(a: Optional[int], b: Optional[int]) -> Optional[int]:
    return None if a is None or b is None else a + b


def _max_opt(values: list[Optional[int]]) -> Optional[int]:
    return None if any(v is None for v in values) else max(values)


def _check_window(rows: int, cols: int) -> None:
    if rows < 1 or cols < 1:
        raise InvalidInputError(f"section window must be at least 1x1, got {rows}x{cols}")


def _close(mask: np.ndarray, axis: str) -> np.ndarray:
    """largest sub-mask closed under decreasing row (or column) index"""
    return np.logical_and.accumulate(mask, axis=0 if axis == "rows" else 1)


# rules

def materialize(rule: OperatorRule, rows: int, cols: int) -> FiniteSection:
    """rows x cols corner of the rule; every entry exact"""
    _check_window(rows, cols)
    m, l = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    entries = np.broadcast_to(np.asarray(rule.entry(m, l), dtype=complex), (rows, cols))
    return FiniteSection(
        entries=entries,
        exact=np.ones((rows, cols), dtype=bool),
        upper_bandwidth=rule.upper_bandwidth,
        lower_bandwidth=rule.lower_bandwidth,
        col_support=rule.col_support,
        row_support=rule.row_support,
        description=rule.description,
    )


def adjoint_rule(rule: OperatorRule) -> OperatorRule:
    exact_entry = None
    if rule.exact_entry is not None:
        inner = rule.exact_entry

        def exact_entry(m: int, l: int):
            return inner(l, m).conjugate()

    return OperatorRule(
        entry=lambda m, l: np.conj(rule.entry(l, m)),
        exact_entry=exact_entry,
        upper_bandwidth=rule.lower_bandwidth,
        lower_bandwidth=rule.upper_bandwidth,
        col_support=rule.row_support,
        row_support=rule.col_support,
        description=f"({rule.description})*",
    )


# expression metadata

def push_adjoint(expr: Expr) -> Expr:
    """move Adjoint nodes down to the leaves: (AB)* = B*A*, (cA)* = conj(c) A*"""
    if not isinstance(expr, Adjoint):
        return expr
    inner = expr.expr
    if isinstance(inner, Adjoint):
        return push_adjoint(inner.expr)
    if isinstance(inner, OperatorRule):
        return adjoint_rule(inner)
    if isinstance(inner, FiniteSection):
        return adjoint(inner)
    if isinstance(inner, Product):
        return Product(factors=[Adjoint(expr=f) for f in reversed(inner.factors)], cutoff=inner.cutoff)
    if isinstance(inner, Sum):
        return Sum(terms=[Adjoint(expr=t) for t in inner.terms])
    if isinstance(inner, Scaled):
        return Scaled(factor=conjugate_scalar(inner.factor), expr=Adjoint(expr=inner.expr))
    raise InvalidInputError(f"cannot take the adjoint of {type(inner).__name__}")


def bandwidths(expr: Expr) -> tuple[Optional[int], Optional[int]]:
    """(upper_bandwidth, col_support) of the infinite operator behind expr"""
    expr = push_adjoint(expr)
    if isinstance(expr, (OperatorRule, FiniteSection)):
        return expr.upper_bandwidth, expr.col_support
    if isinstance(expr, Product):
        parts = [bandwidths(f) for f in expr.factors]
        upper: Optional[int] = 0
        for u, _ in parts:
            upper = _add_opt(upper, u)
        return upper, parts[-1][1]
    if isinstance(expr, Sum):
        parts = [bandwidths(t) for t in expr.terms]
        return _max_opt([u for u, _ in parts]), _max_opt([c for _, c in parts])
    if isinstance(expr, Scaled):
        return bandwidths(expr.expr)
    raise InvalidInputError(f"unknown expression node {type(expr).__name__}")


def kmax(expr: Expr, m: np.ndarray) -> Optional[np.ndarray]:
    """last column that can be nonzero in row m, or None when unbounded"""
    upper, support = bandwidths(expr)
    if upper is None and support is None:
        return None
    if upper is None:
        return np.full_like(m, support)
    if support is None:
        return m + upper
    return np.minimum(m + upper, support)


def describe(expr: Expr) -> str:
    if isinstance(expr, (OperatorRule, FiniteSection)):
        return expr.description
    if isinstance(expr, Product):
        return " ".join(f"[{describe(f)}]" for f in expr.factors)
    if isinstance(expr, Sum):
        return " + ".join(describe(t) for t in expr.terms)
    if isinstance(expr, Scaled):
        return f"({expr.factor})*[{describe(expr.expr)}]"
    if isinstance(expr, Adjoint):
        return f"[{describe(expr.expr)}]*"
    return repr(expr)


# section algebra

def _replace(section: FiniteSection, **changes) -> FiniteSection:
    """validated copy of a section with some fields replaced"""
    fields = {name: getattr(section, name) for name in FiniteSection.model_fields}
    fields.update(changes)
    return FiniteSection(**fields)


def _restrict(section: FiniteSection, rows: int, cols: int) -> FiniteSection:
    if rows > section.rows or cols > section.cols:
        raise ShapeMismatchError(
            f"section of shape {section.shape} cannot supply a {rows}x{cols} window"
        )
    return _replace(section, entries=section.entries[:rows, :cols], exact=section.exact[:rows, :cols])


def add(a: FiniteSection, b: FiniteSection) -> FiniteSection:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"cannot add sections of shapes {a.shape} and {b.shape}")
    axis = a.window_axis if a.window_axis == b.window_axis else "rows"
    return FiniteSection(
        entries=a.entries + b.entries,
        exact=_close(a.exact & b.exact, axis),
        upper_bandwidth=_max_opt([a.upper_bandwidth, b.upper_bandwidth]),
        lower_bandwidth=_max_opt([a.lower_bandwidth, b.lower_bandwidth]),
        col_support=_max_opt([a.col_support, b.col_support]),
        row_support=_max_opt([a.row_support, b.row_support]),
        description=f"{a.description} + {b.description}",
        window_axis=axis,
    )


def scale(factor: complex, a: FiniteSection) -> FiniteSection:
    return _replace(a, entries=factor * a.entries, description=f"({factor})*[{a.description}]")


def subtract(a: FiniteSection, b: FiniteSection) -> FiniteSection:
    return add(a, scale(-1, b))


def adjoint(a: FiniteSection) -> FiniteSection:
    """conjugate transpose, certificate transposed"""
    return FiniteSection(
        entries=a.entries.conj().T,
        exact=a.exact.T,
        upper_bandwidth=a.lower_bandwidth,
        lower_bandwidth=a.upper_bandwidth,
        col_support=a.row_support,
        row_support=a.col_support,
        description=f"({a.description})*",
        window_axis="cols" if a.window_axis == "rows" else "rows",
    )


def compose(*factors: Expr, rows: int, cols: int, cutoff: Optional[int] = None) -> FiniteSection:
    """rows x cols section of factors[0] @ factors[1] @ ...

    The inner sum of row m runs over k <= kmax(m) of the left factor; an
    entry is certified when that range fits the inner dimension and every
    factor entry it touches is certified.
    """
    _check_window(rows, cols)
    if not factors:
        raise InvalidInputError("compose needs at least one factor")
    if len(factors) == 1:
        return evaluate(factors[0], rows, cols)

    left = push_adjoint(factors[0])
    rest = factors[1:]
    row_index = np.arange(rows)
    last_col = kmax(left, row_index)

    if last_col is None:
        if cutoff is None:
            raise UncertifiableWindowError(
                f"unbounded inner sum for [{describe(left)}] and no cutoff given"
            )
        inner = cutoff
    else:
        inner = max(int(last_col.max()) + 1, 1)
        if cutoff is not None:
            inner = min(inner, cutoff)
    if isinstance(left, FiniteSection):
        inner = min(inner, left.cols)
    for factor in rest[:1]:
        if isinstance(factor, FiniteSection):
            inner = min(inner, factor.rows)
    inner = max(inner, 1)
    logger.debug(f"compose {rows}x{cols} with inner dimension {inner} for [{describe(left)}]")

    a = evaluate(left, rows, inner, cutoff)
    b = compose(*rest, rows=inner, cols=cols, cutoff=cutoff)
    entries = a.entries @ b.entries

    if last_col is None:
        row_ok = np.zeros(rows, dtype=bool)
        reach = np.full(rows, inner - 1)
    else:
        row_ok = last_col <= inner - 1
        reach = np.clip(last_col, -1, inner - 1)

    # A(m, k) certified for every k <= reach(m)
    a_prefix = np.logical_and.accumulate(a.exact, axis=1)
    a_ok = np.where(reach >= 0, a_prefix[row_index, np.maximum(reach, 0)], True)
    # B(k, l) certified for every k <= reach(m)
    b_prefix = np.logical_and.accumulate(b.exact, axis=0)
    b_ok = np.where((reach >= 0)[:, None], b_prefix[np.maximum(reach, 0), :], True)

    exact = _close(row_ok[:, None] & a_ok[:, None] & b_ok, "rows")
    if not exact.all():
        logger.debug(f"compose certified {int(exact.sum())} of {exact.size} entries")

    upper, support = bandwidths(Product(factors=list(factors)))
    return FiniteSection(
        entries=entries,
        exact=exact,
        upper_bandwidth=upper,
        col_support=support,
        description=" ".join(f"[{describe(f)}]" for f in factors),
    )


def evaluate(expr: Expr, rows: int, cols: int, cutoff: Optional[int] = None) -> FiniteSection:
    """rows x cols section of an expression tree"""
    _check_window(rows, cols)
    expr = push_adjoint(expr)
    if isinstance(expr, OperatorRule):
        return materialize(expr, rows, cols)
    if isinstance(expr, FiniteSection):
        return _restrict(expr, rows, cols)
    if isinstance(expr, Product):
        return compose(*expr.factors, rows=rows, cols=cols, cutoff=expr.cutoff or cutoff)
    if isinstance(expr, Sum):
        total = evaluate(expr.terms[0], rows, cols, cutoff)
        for term in expr.terms[1:]:
            total = add(total, evaluate(term, rows, cols, cutoff))
        return total
    if isinstance(expr, Scaled):
        return scale(to_complex(expr.factor), evaluate(expr.expr, rows, cols, cutoff))
    raise InvalidInputError(f"unknown expression node {type(expr).__name__}")


# norms and application

def singular_values(a: FiniteSection) -> np.ndarray:
    """singular values in decreasing order"""
    return scipy.linalg.svdvals(a.entries)


def _power_norm(matrix: np.ndarray) -> float:
    rng = np.random.default_rng(SEED)
    v = rng.standard_normal(matrix.shape[1]) + 1j * rng.standard_normal(matrix.shape[1])
    v /= np.linalg.norm(v)
    estimate = 0.0
    for iteration in range(POWER_ITERATION_MAX_ITER):
        w = matrix.conj().T @ (matrix @ v)
        size = np.linalg.norm(w)
        if size == 0.0:
            return 0.0
        v = w / size
        if abs(size - estimate) <= POWER_ITERATION_TOL * size:
            logger.debug(f"power iteration converged after {iteration + 1} steps")
            return float(np.sqrt(size))
        estimate = size
    logger.warning(f"power iteration hit the {POWER_ITERATION_MAX_ITER} step cap")
    return float(np.sqrt(estimate))


def op_norm(a: FiniteSection) -> float:
    """largest singular value"""
    if not a.entries.any():
        return 0.0
    if max(a.shape) <= DENSE_SVD_LIMIT:
        return float(scipy.linalg.svdvals(a.entries)[0])
    return _power_norm(np.asarray(a.entries))


def apply(a: FiniteSection, vector) -> np.ndarray:
    """A @ f for a coefficient vector f, zero padded to the section width"""
    vector = np.asarray(vector, dtype=complex)
    if vector.ndim != 1 or len(vector) > a.cols:
        raise ShapeMismatchError(f"vector of shape {vector.shape} does not fit {a.cols} columns")
    padded = np.zeros(a.cols, dtype=complex)
    padded[: len(vector)] = vector
    return a.entries @ padded


def columns_from(a: FiniteSection, n: int) -> FiniteSection:
    """A (I - P_{n-1}): columns below n set to zero"""
    if n < 0:
        raise InvalidInputError(f"column cut must be >= 0, got {n}")
    entries = np.array(a.entries)
    entries[:, :n] = 0
    exact = np.array(a.exact)
    exact[:, :n] = True
    return _replace(a, entries=entries, exact=_close(exact, a.window_axis),
                    description=f"[{a.description}](I - P_{n - 1})")


def write_csv(a: FiniteSection, path: str | Path) -> Path:
    """dump the section as m,l,re,im rows"""
    path = Path(path)
    m, l = np.meshgrid(np.arange(a.rows), np.arange(a.cols), indexing="ij")
    table = np.column_stack([m.ravel(), l.ravel(), a.entries.real.ravel(), a.entries.imag.ravel()])
    np.savetxt(path, table, delimiter=",", header="m,l,re,im", comments="",
               fmt=["%d", "%d", "%.17g", "%.17g"])
    logger.info(f"wrote {a.rows}x{a.cols} section to {path}")
    return path


def summarize(a: FiniteSection) -> SectionSummary:
    return SectionSummary(
        description=a.description,
        rows=a.rows,
        cols=a.cols,
        fully_exact=a.fully_exact,
        uncertified=int(a.exact.size - a.exact.sum()),
        op_norm=op_norm(a),
        entries=a.entries.tolist(),
    )
