import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np
import sympy
from numpy.polynomial import Polynomial
from scipy import stats

from app.asymptotics.schema import (
    ConvergenceReport,
    DiagnosticSettings,
    DiagonalEstimate,
    SymbolExtraction,
    TestVectorFamily,
    TopologyTrace,
    Verdict,
)
from app.config.main import WORKERS
from app.exceptions import InvalidInputError
from app.operators.service import hankel, toeplitz
from app.sections.schema import FiniteSection, OperatorRule
from app.sections.service import apply, materialize, op_norm, subtract
from app.series.schema import BilateralCoeffs, SymbolSpec
from app.series.service import coeffs_of, describe_symbol

logger = logging.getLogger(__name__)


def _shift(value: Optional[int], n: int) -> Optional[int]:
    return None if value is None else value - n


def toeplitz_step_rule(T: OperatorRule, n: int) -> OperatorRule:
    """S*^n T S^n: entry(i, l) = T(i + n, l + n)"""
    if n < 0:
        raise InvalidInputError(f"n must be >= 0, got {n}")
    exact_entry = None
    if T.exact_entry is not None:
        exact_entry = lambda i, l: T.exact_entry(i + n, l + n)
    return OperatorRule(
        entry=lambda i, l: T.entry(np.asarray(i) + n, np.asarray(l) + n),
        exact_entry=exact_entry,
        upper_bandwidth=T.upper_bandwidth,
        lower_bandwidth=T.lower_bandwidth,
        col_support=_shift(T.col_support, n),
        row_support=_shift(T.row_support, n),
        description=f"S*^{n} [{T.description}] S^{n}",
    )


def hankel_step_rule(T: OperatorRule, n: int) -> OperatorRule:
    """H_n(T) = J_n T S^{n+1}: entry(i, l) = T(n - i, l + n + 1) for i <= n, else 0"""
    if n < 0:
        raise InvalidInputError(f"n must be >= 0, got {n}")

    def entry(i: np.ndarray, l: np.ndarray) -> np.ndarray:
        i, l = np.broadcast_arrays(np.asarray(i), np.asarray(l))
        inside = i <= n
        values = T.entry(np.where(inside, n - i, 0), l + n + 1)
        return np.where(inside, values, 0)

    exact_entry = None
    if T.exact_entry is not None:
        exact_entry = lambda i, l: T.exact_entry(n - i, l + n + 1) if i <= n else sympy.Integer(0)

    return OperatorRule(
        entry=entry,
        exact_entry=exact_entry,
        row_support=n,
        description=f"J_{n} [{T.description}] S^{n + 1}",
    )


def toeplitz_step(T: OperatorRule, n: int, rows: int, cols: int) -> FiniteSection:
    return materialize(toeplitz_step_rule(T, n), rows, cols)


def hankel_step(T: OperatorRule, n: int, cols: int, rows: Optional[int] = None) -> FiniteSection:
    return materialize(hankel_step_rule(T, n), rows or cols, cols)


def sat_defect_coefficient(l: int, n: int) -> sympy.Rational:
    """the single entry of e_l - S*^n V_{z^n} e_l, at position l"""
    if l < 0 or n < 1:
        raise InvalidInputError(f"need l >= 0 and n >= 1, got l={l}, n={n}")
    return sympy.Rational(l, n + l)


def loglog_slope(n_values: list[int], values: list[float]) -> Optional[float]:
    """least squares slope of log(value) against log(n), positive pairs only"""
    pairs = [(n, v) for n, v in zip(n_values, values) if n > 0 and v > 0]
    if len(pairs) < 2:
        return None
    x = np.log([n for n, _ in pairs])
    y = np.log([v for _, v in pairs])
    return float(stats.linregress(x, y).slope)


def fitted_rate(n_grid: list[int], distances: list[float]) -> Optional[float]:
    """log-log slope over the last half of the grid"""
    half = len(n_grid) // 2
    return loglog_slope(n_grid[half:], distances[half:])


# test vectors

def monomials(count: int, length: Optional[int] = None) -> TestVectorFamily:
    length = length or count
    vectors = [[1.0 if k == l else 0.0 for k in range(length)] for l in range(count)]
    return TestVectorFamily(vectors=vectors, labels=[f"e_{l}" for l in range(count)])


def random_polynomials(count: int, degree: int, seed: int) -> TestVectorFamily:
    rng = np.random.default_rng(seed)
    vectors = []
    for _ in range(count):
        v = rng.standard_normal(degree + 1) + 1j * rng.standard_normal(degree + 1)
        vectors.append((v / np.linalg.norm(v)).tolist())
    return TestVectorFamily(vectors=vectors, labels=[f"random_{seed}_{j}" for j in range(count)])


def from_symbols(symbols: list[SymbolSpec], order: int) -> TestVectorFamily:
    """normalized truncations of H^2 elements"""
    vectors, labels = [], []
    for symbol in symbols:
        v = np.asarray(coeffs_of(symbol, order).coeffs)
        size = np.linalg.norm(v)
        if size == 0:
            raise InvalidInputError(f"symbol {describe_symbol(symbol)} truncates to zero")
        vectors.append((v / size).tolist())
        labels.append(describe_symbol(symbol))
    return TestVectorFamily(vectors=vectors, labels=labels)


class AsymptoticsService:
    def __init__(self, settings: Optional[DiagnosticSettings] = None):
        self.settings = settings or DiagnosticSettings()

    # symbol extraction

    def _extrapolate(self, grid: list[int], values: list[complex]) -> complex:
        """value at 1/n = 0 of a low degree fit through the last points"""
        x = 1.0 / np.asarray(grid, dtype=float)
        y = np.asarray(values, dtype=complex)
        points = min(len(x), 6)
        x, y = x[-points:], y[-points:]
        degree = min(3, points - 1)
        if degree == 0:
            return complex(y[-1])
        real = Polynomial.fit(x, y.real, degree)(0.0)
        imag = Polynomial.fit(x, y.imag, degree)(0.0)
        return complex(real, imag)

    def _estimate(self, diagonal: int, grid: list[int], values: list[complex]) -> DiagonalEstimate:
        gap = abs(values[-1] - values[-2]) if len(values) > 1 else float("inf")
        if len(values) < 3:
            return DiagonalEstimate(diagonal=diagonal, n_grid=grid, values=values, cauchy_gap=gap, converged=False)
        full = self._extrapolate(grid, values)
        shorter = self._extrapolate(grid[:-1], values[:-1])
        converged = bool(np.isfinite(full) and abs(full - shorter) <= self.settings.symbol_tol)
        return DiagonalEstimate(
            diagonal=diagonal,
            n_grid=grid,
            values=values,
            extrapolated=full if converged else None,
            cauchy_gap=gap,
            converged=converged,
        )

    def extract_symbol(
        self,
        T: OperatorRule,
        diag_range: Optional[list[int]] = None,
        n_grid: Optional[list[int]] = None,
        kind: str = "toeplitz",
    ) -> SymbolExtraction:
        """Limits of the diagonals (toeplitz) or anti-diagonals (hankel) of the step sequence.

        Toeplitz diagonal d reads T(n + max(d, 0), n + max(-d, 0)) and estimates b(d).
        Hankel anti-diagonal s >= 0 reads H_n(T)(0, s) and estimates b(-(s + 1)).
        Only converged diagonals enter the symbol; the rest are flagged.
        """
        diag_range = diag_range if diag_range is not None else self.settings.diag_range
        grid = sorted(n_grid or self.settings.extract_grid)
        n = np.asarray(grid)
        estimates: list[DiagonalEstimate] = []
        symbol: dict[int, complex] = {}

        for d in diag_range:
            if kind == "toeplitz":
                values = T.entry(n + max(d, 0), n + max(-d, 0))
                key = d
            elif kind == "hankel":
                if d < 0:
                    continue
                values = T.entry(n, n + d + 1)
                key = -(d + 1)
            else:
                raise InvalidInputError(f"unknown step kind '{kind}'")
            values = [complex(v) for v in np.broadcast_to(values, n.shape)]
            estimate = self._estimate(key, grid, values)
            estimates.append(estimate)
            if estimate.converged and abs(estimate.extrapolated) > self.settings.symbol_tol:
                symbol[key] = estimate.extrapolated

        unconverged = [e.diagonal for e in estimates if not e.converged]
        if unconverged:
            logger.warning(f"diagonals {unconverged} of [{T.description}] did not stabilize")
        return SymbolExtraction(symbol=BilateralCoeffs(coeffs=symbol), diagonals=estimates)

    # diagnostics

    def _window(self, n_grid: list[int]) -> int:
        return self.settings.window or max(4 * max(n_grid), self.settings.weak_probe_count)

    def _probes(self, window: int) -> list[np.ndarray]:
        family = random_polynomials(
            self.settings.random_probe_count, self.settings.random_probe_degree, self.settings.seed
        )
        return [np.asarray(v[:window], dtype=complex) for v in family.vectors]

    def _distances(
        self, difference: FiniteSection, family: TestVectorFamily, probes: list[np.ndarray]
    ) -> tuple[float, float, float]:
        uniform = op_norm(difference)
        strong = max(
            (float(np.linalg.norm(apply(difference, np.asarray(f[: difference.cols])))) for f in family.vectors),
            default=0.0,
        )
        k = min(self.settings.weak_probe_count, difference.rows, difference.cols)
        weak = float(np.abs(difference.entries[:k, :k]).max(initial=0.0))
        for f in probes:
            image = apply(difference, f)
            for h in probes:
                weak = max(weak, float(abs(np.vdot(np.pad(h, (0, difference.rows - len(h))), image))))
        return uniform, strong, weak

    def _trace_verdict(self, n_grid: list[int], distances: list[float], rate: Optional[float]) -> str:
        """converges on a nonincreasing last half that is either below tol or
        decaying at least like n^-min_decay_rate; the distance itself may still
        exceed tol at the end of the grid"""
        s = self.settings
        final, initial = distances[-1], distances[0]
        tail = distances[len(distances) // 2:]
        nonincreasing = all(b <= a + s.slack for a, b in zip(tail, tail[1:]))
        decaying = rate is not None and rate <= -s.min_decay_rate
        if nonincreasing and (final <= s.tol or decaying):
            return "converges"
        if final > 0.1 * initial and (rate is None or rate > -s.min_decay_rate):
            return "diverges"
        return "inconclusive"

    @staticmethod
    def _overall(traces: list[TopologyTrace]) -> Verdict:
        verdicts = {t.topology: t.verdict for t in traces}
        if verdicts.get("uniform") == "converges":
            return "converges_uniform"
        if verdicts.get("strong") == "converges":
            return "converges_strong_only"
        if verdicts.get("weak") == "converges":
            return "converges_weak_only"
        if verdicts.get("weak") == "diverges":
            return "diverges"
        return "inconclusive"

    def _diagnose(
        self,
        T: OperatorRule,
        kind: str,
        family: TestVectorFamily,
        n_grid: list[int],
        candidate: Optional[OperatorRule],
    ) -> ConvergenceReport:
        if not n_grid or any(b <= a for a, b in zip(n_grid, n_grid[1:])) or n_grid[0] < 0:
            raise InvalidInputError(f"n_grid must be increasing and nonnegative, got {n_grid}")
        window = self._window(n_grid)
        # diagonals are read far past the window, on their own grid
        extraction_grid = sorted(self.settings.extract_grid)
        extraction = self.extract_symbol(T, n_grid=extraction_grid, kind=kind)

        if candidate is None:
            if not extraction.all_converged:
                logger.warning(f"no candidate limit for [{T.description}]; symbol did not stabilize")
                return ConvergenceReport(
                    operator=T.description, kind=kind, window=window, n_grid=n_grid,
                    candidate="none", traces=[], verdict="inconclusive",
                    extraction_grid=extraction_grid, diagonals=extraction.diagonals,
                )
            candidate = toeplitz(extraction.symbol) if kind == "toeplitz" else hankel(extraction.symbol)

        limit = materialize(candidate, window, window)
        probes = self._probes(window)
        step = toeplitz_step_rule if kind == "toeplitz" else hankel_step_rule

        def distances_at(n: int) -> tuple[float, float, float]:
            difference = subtract(materialize(step(T, n), window, window), limit)
            logger.debug(f"{kind} step n={n} on a {window}x{window} window")
            return self._distances(difference, family, probes)

        with ThreadPoolExecutor(max_workers=WORKERS) as pool:
            rows = list(pool.map(distances_at, n_grid))

        traces = []
        for index, topology in enumerate(("uniform", "strong", "weak")):
            distances = [row[index] for row in rows]
            rate = fitted_rate(n_grid, distances)
            traces.append(TopologyTrace(
                topology=topology,
                distances=distances,
                fitted_rate=rate,
                verdict=self._trace_verdict(n_grid, distances, rate),
            ))
        verdict = self._overall(traces)
        logger.info(f"{kind} diagnosis of [{T.description}]: {verdict}")
        return ConvergenceReport(
            operator=T.description,
            kind=kind,
            window=window,
            n_grid=n_grid,
            candidate=candidate.description,
            traces=traces,
            verdict=verdict,
            symbol_estimate=extraction.symbol if extraction.all_converged else None,
            extraction_grid=extraction_grid,
            diagonals=extraction.diagonals,
        )

    def diagnose_toeplitz(
        self,
        T: OperatorRule,
        family: TestVectorFamily,
        n_grid: list[int],
        candidate_limit: Optional[OperatorRule] = None,
    ) -> ConvergenceReport:
        return self._diagnose(T, "toeplitz", family, n_grid, candidate_limit)

    def diagnose_hankel(
        self,
        T: OperatorRule,
        family: TestVectorFamily,
        n_grid: list[int],
        candidate_limit: Optional[OperatorRule] = None,
    ) -> ConvergenceReport:
        return self._diagnose(T, "hankel", family, n_grid, candidate_limit)
