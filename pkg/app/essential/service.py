import logging
from typing import Optional

import numpy as np

from app.asymptotics.schema import DiagnosticSettings
from app.asymptotics.service import AsymptoticsService, hankel_step, loglog_slope, monomials
from app.essential.schema import (
    ClassificationEntry,
    ClassificationRecord,
    CompactnessEstimate,
    DefectKind,
    HankelLowerBound,
    LemmaCheck,
    LemmaEquivalenceReport,
    ProbeSettings,
    ProductCheck,
    ProductStructureReport,
)
from app.exceptions import InvalidInputError, UncertifiableWindowError
from app.operators.service import backshift_pow, mult, sg, shift_pow, volterra
from app.sections.schema import Expr, FiniteSection, Product, Scaled, Sum
from app.sections.service import columns_from, describe, evaluate, op_norm, singular_values
from app.series.schema import IN_BMOA_ONLY, IN_HINFTY, IN_QA, IN_VMOA, SymbolSpec
from app.series.service import class_flags, coeffs_of, describe_symbol

logger = logging.getLogger(__name__)


def _minus(a: Expr, b: Expr) -> Sum:
    return Sum(terms=[a, Scaled(factor=-1, expr=b)])


def defect_expression(T: Expr, kind: DefectKind) -> Sum:
    S, S_star = shift_pow(1), backshift_pow(1)
    if kind == DefectKind.left_commutator:
        return _minus(Product(factors=[S, T]), Product(factors=[T, S]))
    if kind == DefectKind.star_commutator:
        return _minus(Product(factors=[S_star, T]), Product(factors=[T, S_star]))
    if kind == DefectKind.hankel_defect:
        return _minus(T, Product(factors=[S, T, S]))
    if kind == DefectKind.hankel_defect_star:
        return _minus(T, Product(factors=[S_star, T, S_star]))
    if kind == DefectKind.toeplitz_defect:
        return _minus(Product(factors=[S_star, T, S]), T)
    raise InvalidInputError(f"unknown defect kind {kind}")


def geometric_cut_grid(window: int) -> list[int]:
    """N/64, N/32, ..., N/4 (dropping cuts below 1)"""
    return sorted({max(window // 2**k, 1) for k in range(6, 1, -1)})


def aitken_limit(tails: list[float]) -> tuple[float, float]:
    """geometric extrapolation of the last three tails and a quality score in [0, 1]"""
    if len(tails) < 3:
        return (tails[-1] if tails else 0.0), 0.0
    t1, t2, t3 = tails[-3:]
    if abs(t2 - t1) < 1e-15:
        return t3, 1.0 if abs(t3 - t2) < 1e-15 else 0.0
    ratio = (t3 - t2) / (t2 - t1)
    if not 0.0 <= ratio < 1.0:
        return t3, 0.0
    denominator = t3 - 2 * t2 + t1
    limit = t3 - (t3 - t2) ** 2 / denominator if denominator != 0 else t3
    limit = min(max(limit, 0.0), t3)
    quality = 1.0
    if len(tails) >= 4 and abs(tails[-3] - tails[-4]) > 1e-15:
        previous = (t2 - t1) / (tails[-3] - tails[-4])
        quality = max(0.0, 1.0 - abs(ratio - previous))
    return float(limit), float(quality)


class EssentialService:
    def __init__(self, settings: Optional[ProbeSettings] = None,
                 diagnostics: Optional[DiagnosticSettings] = None):
        self.settings = settings or ProbeSettings()
        self.asymptotics = AsymptoticsService(diagnostics)

    def defect(self, T: Expr, kind: DefectKind, window: int) -> FiniteSection:
        """certified window x window section of the requested defect"""
        section = evaluate(defect_expression(T, kind), window, window)
        if not section.fully_exact:
            uncertified = int(section.exact.size - section.exact.sum())
            logger.warning(f"{kind.value} of [{describe(T)}]: {uncertified} uncertified entries")
            raise UncertifiableWindowError(
                f"{kind.value} of [{describe(T)}] is not certified on a {window}x{window} window",
                details={"uncertified": uncertified},
            )
        return section

    def compactness_probe(
        self, T: Expr, window: Optional[int] = None, cut_grid: Optional[list[int]] = None
    ) -> CompactnessEstimate:
        s = self.settings
        window = window or s.window
        cut_grid = sorted(cut_grid or s.cut_grid or geometric_cut_grid(window))
        if 4 * max(cut_grid) > window:
            raise InvalidInputError(f"window {window} must be at least 4 * max(cut_grid) = {4 * max(cut_grid)}")

        section = evaluate(T, window, window) if not isinstance(T, FiniteSection) else T
        if not section.fully_exact:
            logger.warning(f"probing [{describe(T)}] on a partially certified window")

        tails = [op_norm(columns_from(section, n)) for n in cut_grid]
        for n, a, b in zip(cut_grid[1:], tails, tails[1:]):
            if b > a + s.slack:
                logger.warning(f"tail norm increased at cut {n}: {a} -> {b}")
        sigma = singular_values(section)
        sigma_tail = [float(sigma[k]) if k < len(sigma) else 0.0 for k in cut_grid]

        tail_rate = loglog_slope(cut_grid, tails)
        sigma_rate = loglog_slope(cut_grid, sigma_tail)
        ess_norm, quality = aitken_limit(tails)

        tail_compact = tails[-1] < s.tol or (tail_rate is not None and tail_rate <= -s.compact_rate)
        plateau = tails[-1] >= s.tol and (tail_rate is None or tail_rate >= -s.plateau_rate)
        sigma_decaying = sigma_tail[-1] < s.tol or (sigma_rate is not None and sigma_rate <= -s.sigma_rate)
        if tail_compact and sigma_decaying:
            verdict = "compact_like"
        elif plateau:
            verdict = "noncompact_like"
        else:
            verdict = "inconclusive"
        logger.debug(f"probe [{describe(T)}] tails={tails} verdict={verdict}")

        return CompactnessEstimate(
            operator=describe(T),
            window=window,
            cut_grid=cut_grid,
            tail_norms=tails,
            tail_rate=tail_rate,
            sigma_tail=sigma_tail,
            sigma_rate=sigma_rate,
            extrapolated_ess_norm=ess_norm,
            fit_quality=quality,
            tol=s.tol,
            verdict=verdict,
        )

    def estimate_defect(self, T: Expr, kind: DefectKind, window: Optional[int] = None) -> CompactnessEstimate:
        window = window or self.settings.window
        return self.compactness_probe(self.defect(T, kind, window), window)

    def hankel_lower_bound(self, g: SymbolSpec, window: Optional[int] = None) -> HankelLowerBound:
        """||(S_g - S S_g S) e_n|| for n in [N/2, N] against |a_k0|"""
        window = window or self.settings.window
        coeffs = np.asarray(coeffs_of(g, 64).coeffs)
        nonzero = np.flatnonzero(np.abs(coeffs) > 0)
        if not len(nonzero):
            raise InvalidInputError("the lower bound needs a nonzero symbol")
        k0 = int(nonzero[0])

        # rows beyond the window only truncate the columns, so the norms stay lower bounds
        rows = 2 * window + 8
        section = evaluate(defect_expression(sg(g), DefectKind.hankel_defect), rows, window + 1)
        n_values = list(range(window // 2, window + 1))
        norms = [float(np.linalg.norm(section.entries[:, n])) for n in n_values]
        return HankelLowerBound(
            symbol=describe_symbol(g),
            window=window,
            k0=k0,
            bound=float(abs(coeffs[k0])),
            n_values=n_values,
            norms=norms,
            min_norm=min(norms),
        )

    def lemma_equivalence(self, T: Expr, window: Optional[int] = None) -> LemmaEquivalenceReport:
        """both formulations of the ess-Hank and ess-Toep defects give the same verdict"""
        window = window or self.settings.window
        checks = []
        for first, second in (
            (DefectKind.hankel_defect, DefectKind.hankel_defect_star),
            (DefectKind.left_commutator, DefectKind.star_commutator),
        ):
            a = self.estimate_defect(T, first, window).verdict
            b = self.estimate_defect(T, second, window).verdict
            checks.append(LemmaCheck(first=first, second=second, first_verdict=a, second_verdict=b, agree=a == b))
        return LemmaEquivalenceReport(operator=describe(T), window=window, checks=checks)

    def product_structure_check(
        self, g: SymbolSpec, h: SymbolSpec, k: SymbolSpec, window: Optional[int] = None
    ) -> ProductStructureReport:
        """hankel defects of V_g V_k, V_k V_g and the commutator of V_g V_h"""
        window = window or self.settings.window
        Vg, Vh, Vk = volterra(g), volterra(h), volterra(k)
        cases = [
            ("V_g V_k", Product(factors=[Vg, Vk]), DefectKind.hankel_defect),
            ("V_k V_g", Product(factors=[Vk, Vg]), DefectKind.hankel_defect),
            ("V_g V_h", Product(factors=[Vg, Vh]), DefectKind.left_commutator),
        ]
        checks = [
            ProductCheck(label=label, defect=kind, estimate=self.estimate_defect(T, kind, window))
            for label, T, kind in cases
        ]
        return ProductStructureReport(
            symbols={"g": describe_symbol(g), "h": describe_symbol(h), "k": describe_symbol(k)},
            window=window,
            checks=checks,
        )

    # classification

    def _uah_zero(self, T, n_values: list[int]) -> bool:
        return all(not hankel_step(T, n, cols=n + 2).entries.any() for n in n_values)

    def classify(self, g: SymbolSpec, which: str, check_theorems: bool = True) -> ClassificationRecord:
        """Theorem-derived fields come from the registry flags; numeric probes fill
        the rest and only ever raise anomalies against theorem values."""
        if which not in ("volterra", "sg"):
            raise InvalidInputError(f"classify expects 'volterra' or 'sg', got '{which}'")
        flags = class_flags(g) or frozenset()
        window = self.settings.window
        T = volterra(g) if which == "volterra" else sg(g)
        probes: dict = {}
        anomalies: list[str] = []

        def theorem(value: bool, detail: str) -> ClassificationEntry:
            return ClassificationEntry(value=value, provenance="theorem", detail=detail)

        def numeric(verdict: str, detail: str) -> ClassificationEntry:
            value = {"compact_like": True, "noncompact_like": False}.get(verdict)
            return ClassificationEntry(value=value, provenance="numeric", detail=f"{detail}: {verdict}")

        symbol_detail = "symbol 0" if which == "volterra" else "symbol g"
        sat = theorem(True, f"always strongly asymptotically Toeplitz, {symbol_detail}")
        wat = theorem(True, f"weakly asymptotically Toeplitz, {symbol_detail}")
        uah = theorem(True, "uniformly asymptotically Hankel with symbol 0")
        ess_toep = theorem(True, "always essentially Toeplitz")

        if which == "volterra":
            if IN_VMOA in flags:
                uat = theorem(True, "g in VMOA: V_g compact")
            elif IN_BMOA_ONLY in flags:
                uat = theorem(False, "g in BMOA \\ VMOA: V_g not compact")
            else:
                uat = self._numeric_uat(T, None, probes)
            if IN_VMOA in flags:
                ess_hank = theorem(True, "V_g compact")
            else:
                estimate = self.estimate_defect(T, DefectKind.hankel_defect, window)
                probes["hankel_defect"] = estimate.model_dump(mode="json")
                ess_hank = numeric(estimate.verdict, "hankel defect probe")
        else:
            if IN_QA in flags:
                uat = theorem(True, "g in QA")
            elif IN_BMOA_ONLY in flags and IN_HINFTY not in flags:
                uat = ClassificationEntry(value=None, provenance="unknown", detail="g not in H^infty: S_g unbounded")
            else:
                uat = self._numeric_uat(T, mult(g), probes)
            bound = self.hankel_lower_bound(g, window)
            probes["hankel_lower_bound"] = bound.model_dump(mode="json")
            ess_hank = theorem(False, f"never essentially Hankel: min ||defect e_n|| = {bound.min_norm:.6g} >= |a_k0| = {bound.bound:.6g}")
            if bound.min_norm < bound.bound * (1 - 10 / window):
                anomalies.append(f"hankel lower bound {bound.min_norm} below |a_k0| = {bound.bound}")

        if check_theorems:
            self._check_theorems(T, which, g, ess_toep, ess_hank, uah, probes, anomalies)

        for message in anomalies:
            logger.warning(f"classify {describe_symbol(g)} / {which}: {message}")

        return ClassificationRecord(
            symbol=describe_symbol(g),
            operator=which,
            uat=uat,
            sat=sat,
            wat=wat,
            uah=uah,
            ess_toep=ess_toep,
            ess_hank=ess_hank,
            probes=probes,
            anomalies=anomalies,
        )

    def _numeric_uat(self, T, candidate, probes: dict) -> ClassificationEntry:
        report = self.asymptotics.diagnose_toeplitz(T, monomials(8), [8, 16, 32, 64], candidate)
        probes["uat"] = report.model_dump(mode="json")
        uniform = report.trace("uniform").verdict if report.traces else "inconclusive"
        value = {"converges": True, "diverges": False}.get(uniform)
        return ClassificationEntry(value=value, provenance="numeric", detail=f"uniform metric: {uniform}")

    def _check_theorems(self, T, which, g, ess_toep, ess_hank, uah, probes, anomalies) -> None:
        commutator = self.estimate_defect(T, DefectKind.left_commutator, self.settings.window)
        probes["left_commutator"] = commutator.model_dump(mode="json")
        if ess_toep.value and commutator.verdict == "noncompact_like":
            anomalies.append("left commutator probe looks noncompact against the ess-Toep theorem")

        if uah.value and not self._uah_zero(T, [0, 1, 7, 32]):
            anomalies.append("hankel steps are not zero against the UAH theorem")

        extraction = self.asymptotics.extract_symbol(T, diag_range=list(range(-4, 5)))
        expected = np.zeros(9, dtype=complex)
        if which == "sg":
            expected[4:] = coeffs_of(g, 4).coeffs
        found = np.array([extraction.symbol.coeffs.get(d, 0) for d in range(-4, 5)], dtype=complex)
        if not extraction.all_converged or np.abs(found - expected).max() > 1e-6:
            anomalies.append("extracted asymptotic symbol differs from the theorem symbol")

        if ess_hank.provenance == "theorem" and which == "volterra":
            estimate = self.estimate_defect(T, DefectKind.hankel_defect, self.settings.window)
            probes["hankel_defect"] = estimate.model_dump(mode="json")
            if estimate.verdict == "noncompact_like":
                anomalies.append("hankel defect probe looks noncompact against the ess-Hank theorem")
