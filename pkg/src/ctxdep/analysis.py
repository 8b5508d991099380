"""Context-dependence tests on probability tables.

All tests work on invariants of matrix products -- determinants and power
traces -- evaluated directly on the measured tables, so they are insensitive
to unknown linear state-preparation and measurement errors and never require
reconstructing the gates themselves:

* permutation test: ``log|det P(S)|`` must not depend on the arrangement of a
  fixed gate multiset;
* cyclic test: the power traces of ``P(S) P0^{-1}`` must not depend on
  rotations of the sequence (``P0`` is a short reference experiment);
* repetition test: ``log|det|`` must fall linearly with the repetition count
  of a fixed block, with slope ``log|det G|``.

Statistical significance under finite shots is judged against a parametric
bootstrap null (per-cell binomial resampling).
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .experiment import ProbabilityTable, resample_cells
from .noise import IDEAL_GATE_SET, gate_unitary
from .ptm import log_abs_det, log_abs_det_many, pauli_basis, vectorize_effect, vectorize_state

__all__ = [
    "IllConditioned",
    "NotTracePreserving",
    "SingularReference",
    "Verdict",
    "CalibrationMatrices",
    "RawEstimate",
    "TestReport",
    "ideal_calibration",
    "calibration_from_states_effects",
    "raw_estimate",
    "det_permutation_test",
    "cyclic_fidelity_test",
    "repetition_test",
    "unitarity_u",
    "unitarity_tilde",
    "accessible_volume",
    "cp_witness",
    "bootstrap_ci",
]

logger = logging.getLogger(__name__)

# Numerical floor distinguishing roundoff from signal in exact-table runs.
EXACT_SPREAD_TOL = 1e-9
# Residual 2-norm below which an exact-table decay series counts as linear.
LINEAR_RESIDUAL_TOL = 1e-8
# Reject solves against matrices more ill-conditioned than this.
CONDITION_LIMIT = 1e6


class IllConditioned(ValueError):
    """A calibration or reference matrix is too ill-conditioned to invert."""


class NotTracePreserving(ValueError):
    """A transfer matrix lacked the (1, 0, ..., 0) first row."""


class SingularReference(ValueError):
    """The reference-experiment table cannot be inverted."""


class Verdict(enum.Enum):
    CONTEXT_INDEPENDENT = "ContextIndependent"
    CONTEXT_DEPENDENT = "ContextDependent"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class CalibrationMatrices:
    """Nominal effect (B) and preparation (C) coordinate matrices.

    ``b[:, k]`` holds the coordinates of effect ``k``, ``c[:, i]`` those of
    preparation ``i``; a table satisfies ``P = B^T S C`` when the nominal
    descriptions are accurate.
    """

    b: np.ndarray
    c: np.ndarray
    cond_b: float
    cond_c: float

    @property
    def log_abs_det(self) -> float:
        return log_abs_det(self.b) + log_abs_det(self.c)


@dataclass(frozen=True)
class RawEstimate:
    """Uncorrected tomographic estimate ``(B^-1)^T P C^-1`` of a sequence."""

    matrix: np.ndarray
    label: str


@dataclass
class TestReport:
    """Result of one context test over a sequence family."""

    kind: str  # PermDet | CyclicFid | RepLinearity | Volume | CPWitness
    member_labels: list[str]
    statistics: np.ndarray
    verdict: Verdict
    threshold: float
    summary: dict
    ci_low: np.ndarray | None = None
    ci_high: np.ndarray | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        """JSON-ready tree (schema documented in the README)."""

        def _clean(value):
            if isinstance(value, np.ndarray):
                return [_clean(v) for v in value.tolist()]
            if isinstance(value, (np.floating, float)):
                return float(value)
            if isinstance(value, (np.integer, int)):
                return int(value)
            if isinstance(value, dict):
                return {str(k): _clean(v) for k, v in value.items()}
            if isinstance(value, (list, tuple)):
                return [_clean(v) for v in value]
            return value

        out = {
            "kind": self.kind,
            "verdict": self.verdict.value,
            "threshold": _clean(self.threshold),
            "summary": _clean(self.summary),
            "members": [
                {
                    "label": label,
                    "statistic": _clean(self.statistics[j]),
                    "ci_low": None if self.ci_low is None else _clean(self.ci_low[j]),
                    "ci_high": None if self.ci_high is None else _clean(self.ci_high[j]),
                }
                for j, label in enumerate(self.member_labels)
            ],
            "details": _clean(self.details),
        }
        return out


def _cond(matrix: np.ndarray) -> float:
    return float(np.linalg.cond(matrix))


def calibration_from_states_effects(states, effects) -> CalibrationMatrices:
    """Build calibration matrices from nominal d x d states and effects.

    Requires exactly ``d^2`` of each, spanning the operator space; rank
    deficiency or extreme conditioning is refused because the raw estimator
    needs both matrices inverted.
    """
    d = np.asarray(states[0]).shape[0]
    if len(states) != d**2 or len(effects) != d**2:
        raise IllConditioned(
            f"need exactly {d ** 2} states and effects for dimension {d}, "
            f"got {len(states)} and {len(effects)}"
        )
    basis = pauli_basis(int(round(math.log2(d))))
    c = np.column_stack([vectorize_state(np.asarray(s, complex), basis) for s in states])
    b = np.column_stack([vectorize_effect(np.asarray(e, complex), basis) for e in effects])
    cond_b, cond_c = _cond(b), _cond(c)
    if cond_b > CONDITION_LIMIT or cond_c > CONDITION_LIMIT:
        raise IllConditioned(
            f"calibration condition numbers ({cond_b:.2e}, {cond_c:.2e}) exceed "
            f"{CONDITION_LIMIT:.0e}; set not informationally complete enough"
        )
    return CalibrationMatrices(b=b, c=c, cond_b=cond_b, cond_c=cond_c)


def ideal_calibration() -> CalibrationMatrices:
    """Calibration for the standard single-qubit in/out gate set.

    Preparations are the ideal gates applied to |0>, effects are the ideal
    gate adjoints applied to |1><1|; entries are exact (0, +-1/sqrt2, ...).
    """
    ket0 = np.array([1.0, 0.0], dtype=complex)
    proj1 = np.diag([0.0, 1.0]).astype(complex)
    states = []
    effects = []
    for gate in IDEAL_GATE_SET:
        u = gate_unitary(gate)
        psi = u @ ket0
        states.append(np.outer(psi, psi.conj()))
        effects.append(u.conj().T @ proj1 @ u)
    return calibration_from_states_effects(states, effects)


def raw_estimate(table: ProbabilityTable, cal: CalibrationMatrices) -> RawEstimate:
    """``(B^-1)^T P C^-1`` computed via linear solves, never explicit inverses."""
    if cal.cond_b > CONDITION_LIMIT or cal.cond_c > CONDITION_LIMIT:
        raise IllConditioned("calibration matrices too ill-conditioned")
    x = np.linalg.solve(cal.b.T, np.asarray(table.entries, dtype=float))
    raw = np.linalg.solve(cal.c.T, x.T).T
    return RawEstimate(matrix=raw, label=table.label)


def _spread(values: np.ndarray) -> float:
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return float("nan")
    return float(finite.max() - finite.min())


def _null_spread_thresholds(boots: np.ndarray) -> tuple[float, float]:
    """95%/99% quantiles of the max-min spread under the no-variation null.

    Bootstrap statistics are centered per member, which removes the observed
    member-to-member signal and leaves only shot noise.
    """
    centered = boots - boots.mean(axis=1, keepdims=True)
    null_spread = centered.max(axis=0) - centered.min(axis=0)
    q95, q99 = np.percentile(null_spread, [95.0, 99.0])
    return max(float(q95), EXACT_SPREAD_TOL), max(float(q99), EXACT_SPREAD_TOL)


def _spread_verdict(observed: float, thr95: float, thr99: float) -> Verdict:
    if observed > thr99:
        return Verdict.CONTEXT_DEPENDENT
    if observed > thr95:
        return Verdict.INCONCLUSIVE
    return Verdict.CONTEXT_INDEPENDENT


def _percentile_ci(boots: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lo = np.percentile(boots, 2.5, axis=1)
    hi = np.percentile(boots, 97.5, axis=1)
    return lo, hi


def det_permutation_test(
    tables: list[ProbabilityTable],
    cal: CalibrationMatrices | None = None,
    resamples: int = 500,
    seed: int = 0,
) -> TestReport:
    """Permutation-invariance test of ``L_k = log|det P(S_k)|``.

    The verdict needs no calibration: rearranging a gate multiset cannot
    change the determinant of the table if every instruction always performs
    the same operation.  When ``cal`` is given, the statistics are also
    reported shifted into raw-estimate units (a constant offset).
    """
    labels = [t.label for t in tables]
    l_values = np.array([log_abs_det(t.entries) for t in tables])
    singular = [lbl for lbl, v in zip(labels, l_values) if not np.isfinite(v)]
    if singular:
        logger.warning("singular tables flagged: %s", ", ".join(singular))
    observed = _spread(l_values)

    exact = all(t.is_exact for t in tables)
    ci_low = ci_high = None
    if exact:
        thr95 = thr99 = EXACT_SPREAD_TOL
    else:
        boots = np.stack(
            [
                log_abs_det_many(resample_cells(t, resamples, seed))
                for t in tables
            ]
        )
        thr95, thr99 = _null_spread_thresholds(boots)
        ci_low, ci_high = _percentile_ci(boots)
    verdict = _spread_verdict(observed, thr95, thr99)

    summary = {
        "spread": observed,
        "mean": float(np.mean(l_values[np.isfinite(l_values)])),
        "threshold95": thr95,
        "threshold99": thr99,
        "n_singular": len(singular),
    }
    details: dict = {"singular_members": singular}
    if cal is not None:
        offset = cal.log_abs_det
        summary["raw_units_offset"] = -offset
        details["raw_statistics"] = l_values - offset
    return TestReport(
        kind="PermDet",
        member_labels=labels,
        statistics=l_values,
        verdict=verdict,
        threshold=thr99,
        summary=summary,
        ci_low=ci_low,
        ci_high=ci_high,
        details=details,
    )


def _check_reference(p0: np.ndarray) -> None:
    cond = _cond(p0)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SingularReference(
            f"reference table condition number {cond:.2e} exceeds {CONDITION_LIMIT:.0e}"
        )


def _fidelities(stack: np.ndarray, p0_stack: np.ndarray, r_max: int) -> np.ndarray:
    """Power-trace fidelities ``Tr[(P P0^-1)^r] / n`` for r = 1..r_max, batched."""
    # M = P P0^{-1}  <=>  M^T = solve(P0^T, P^T)
    m = np.linalg.solve(np.swapaxes(p0_stack, -1, -2), np.swapaxes(stack, -1, -2))
    m = np.swapaxes(m, -1, -2)
    n = m.shape[-1]
    out = np.empty(m.shape[:-2] + (r_max,))
    acc = m
    out[..., 0] = np.trace(acc, axis1=-2, axis2=-1) / n
    for r in range(1, r_max):
        acc = acc @ m
        out[..., r] = np.trace(acc, axis1=-2, axis2=-1) / n
    return out


def _solve_extended(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pivoted Gaussian elimination in extended precision.

    Large SPAM errors can drive the reference table's condition number to
    ~1e6 while the invariants must still be reproduced to 1e-9; the extra
    mantissa bits of ``longdouble`` keep the solve error far below that.
    (On platforms where longdouble degenerates to double this falls back to
    ordinary double-precision accuracy.)  Matrices here are d^2 x d^2, so
    the scalar loop costs nothing.
    """
    a = a.astype(np.longdouble).copy()
    b = b.astype(np.longdouble).copy()
    n = a.shape[0]
    for c in range(n):
        p = c + int(np.argmax(np.abs(a[c:, c])))
        if p != c:
            a[[c, p]] = a[[p, c]]
            b[[c, p]] = b[[p, c]]
        for r in range(c + 1, n):
            f = a[r, c] / a[c, c]
            a[r, c:] -= f * a[c, c:]
            b[r] -= f * b[c]
    x = np.zeros_like(b)
    for r in range(n - 1, -1, -1):
        x[r] = (b[r] - a[r, r + 1 :] @ x[r + 1 :]) / a[r, r]
    return x


def _fidelities_observed(entries_list, p0_entries: np.ndarray, r_max: int) -> np.ndarray:
    """Observed-statistic fidelities, one table at a time, extended precision."""
    out = np.empty((len(entries_list), r_max))
    n = p0_entries.shape[0]
    p0_t = np.asarray(p0_entries, dtype=float).T
    for j, entries in enumerate(entries_list):
        m = _solve_extended(p0_t, np.asarray(entries, dtype=float).T).T
        acc = m
        out[j, 0] = float(np.trace(acc)) / n
        for r in range(1, r_max):
            acc = acc @ m
            out[j, r] = float(np.trace(acc)) / n
    return out


def cyclic_fidelity_test(
    tables: list[ProbabilityTable],
    p0: ProbabilityTable,
    r: int = 2,
    resamples: int = 500,
    seed: int = 0,
) -> TestReport:
    """Cyclic-invariance test of the power traces of ``P(S) P0^{-1}``.

    Rotating a sequence cannot change the spectrum of the associated map, so
    the normalized power traces ``F^(r)`` must agree across all rotations.
    All orders ``r = 1..n`` are reported; the verdict is based on the
    requested order.
    """
    p0_entries = np.asarray(p0.entries, dtype=float)
    _check_reference(p0_entries)
    n = p0_entries.shape[0]
    if not 1 <= r <= n:
        raise ValueError(f"r must lie in 1..{n}")

    labels = [t.label for t in tables]
    fid_all = _fidelities_observed([t.entries for t in tables], p0_entries, n)
    stat = fid_all[:, r - 1]
    observed = _spread(stat)

    exact = all(t.is_exact for t in tables) and p0.is_exact
    ci_low = ci_high = None
    if exact:
        thr95 = thr99 = EXACT_SPREAD_TOL
    else:
        p0_draws = resample_cells(p0, resamples, seed)
        boots = np.stack(
            [
                _fidelities(resample_cells(t, resamples, seed), p0_draws, r)[:, r - 1]
                for t in tables
            ]
        )
        thr95, thr99 = _null_spread_thresholds(boots)
        ci_low, ci_high = _percentile_ci(boots)
    verdict = _spread_verdict(observed, thr95, thr99)

    summary = {
        "order": r,
        "spread": observed,
        "mean": float(stat.mean()),
        "threshold95": thr95,
        "threshold99": thr99,
        "reference": p0.label,
    }
    details = {
        "fidelity_by_order": {
            str(order + 1): fid_all[:, order] for order in range(n)
        },
        "spread_by_order": {
            str(order + 1): _spread(fid_all[:, order]) for order in range(n)
        },
    }
    return TestReport(
        kind="CyclicFid",
        member_labels=labels,
        statistics=stat,
        verdict=verdict,
        threshold=thr99,
        summary=summary,
        ci_low=ci_low,
        ci_high=ci_high,
        details=details,
    )


def _weighted_line_fit(
    x: np.ndarray, y: np.ndarray, weights: np.ndarray
) -> tuple[float, float, np.ndarray, float]:
    """Weighted least-squares line fit; returns slope, intercept, residuals, chi2."""
    sw = np.sqrt(weights)
    design = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(design * sw[:, None], y * sw, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    residuals = y - (slope * x + intercept)
    chi2 = float(np.sum(weights * residuals**2))
    return slope, intercept, residuals, chi2


def repetition_test(
    tables: list[ProbabilityTable],
    m_values,
    cal: CalibrationMatrices,
    resamples: int = 500,
    seed: int = 0,
) -> TestReport:
    """Linearity test of ``L_m = log|det S_raw(m)|`` against the count ``m``.

    A context-independent repeated block makes ``L_m`` exactly affine in
    ``m``: the slope estimates ``log|det G_block|`` and the intercept the SPAM
    contribution.  Curvature beyond the shot-noise scale is evidence of
    context dependence.  Adjacent increases of ``L_m`` are recorded for the
    divisibility witness.
    """
    m_values = np.asarray(list(m_values), dtype=float)
    if len(tables) != len(m_values):
        raise ValueError("one table per m value required")
    if len(m_values) < 4:
        raise ValueError("need at least 4 repetition counts to judge linearity")

    labels = [t.label for t in tables]
    offset = cal.log_abs_det
    l_values = np.array([log_abs_det(t.entries) for t in tables]) - offset
    good = np.isfinite(l_values)
    if not good.all():
        logger.warning(
            "excluding singular members from fit: %s",
            ", ".join(lbl for lbl, g in zip(labels, good) if not g),
        )

    exact = all(t.is_exact for t in tables)
    ci_low = ci_high = None
    boots = None
    if exact:
        weights = np.ones(good.sum())
    else:
        boots = np.stack(
            [log_abs_det_many(resample_cells(t, resamples, seed)) for t in tables]
        ) - offset
        sigma = boots.std(axis=1, ddof=1)
        weights = 1.0 / np.maximum(sigma[good], 1e-12) ** 2
        ci_low, ci_high = _percentile_ci(boots)

    x, y = m_values[good], l_values[good]
    slope, intercept, residuals, chi2 = _weighted_line_fit(x, y, weights)
    residual_norm = float(np.linalg.norm(residuals))

    if exact:
        thr99 = LINEAR_RESIDUAL_TOL
        p_value = None
        slope_stderr = 0.0
        verdict = (
            Verdict.CONTEXT_DEPENDENT
            if residual_norm > LINEAR_RESIDUAL_TOL
            else Verdict.CONTEXT_INDEPENDENT
        )
        statistic_for_threshold = residual_norm
    else:
        fitted = slope * x + intercept
        centered = boots[good] - boots[good].mean(axis=1, keepdims=True)
        null_chi2 = np.empty(centered.shape[1])
        null_slopes = np.empty(centered.shape[1])
        for b in range(centered.shape[1]):
            s_b, _, _, c_b = _weighted_line_fit(x, fitted + centered[:, b], weights)
            null_chi2[b] = c_b
            null_slopes[b] = s_b
        thr95, thr99 = np.percentile(null_chi2, [95.0, 99.0])
        p_value = float(np.mean(null_chi2 >= chi2))
        slope_stderr = float(np.std(null_slopes, ddof=1))
        if chi2 > thr99:
            verdict = Verdict.CONTEXT_DEPENDENT
        elif chi2 > thr95:
            verdict = Verdict.INCONCLUSIVE
        else:
            verdict = Verdict.CONTEXT_INDEPENDENT
        statistic_for_threshold = chi2

    increases = _find_increases(m_values, l_values, ci_low, ci_high)
    summary = {
        "slope": slope,
        "intercept": intercept,
        "slope_stderr": slope_stderr,
        "residual_norm": residual_norm,
        "chi2": chi2,
        "p_value": p_value,
        "n_excluded": int((~good).sum()),
        "n_increases": len(increases),
    }
    return TestReport(
        kind="RepLinearity",
        member_labels=labels,
        statistics=l_values,
        verdict=verdict,
        threshold=float(thr99),
        summary=summary,
        ci_low=ci_low,
        ci_high=ci_high,
        details={
            "m_values": m_values,
            "increases": increases,
            "observed_statistic": statistic_for_threshold,
        },
    )


def unitarity_u(ptm: np.ndarray, tol: float = 1e-8) -> float:
    """Average-purity unitarity ``Tr(W^T W) / (d^2 - 1)``.

    ``W`` is the unital block of the transfer matrix (first row and column
    removed); the input must be in trace-preserving form.
    """
    g = np.asarray(ptm, dtype=float)
    first = np.zeros(g.shape[1])
    first[0] = 1.0
    if np.max(np.abs(g[0] - first)) > tol:
        raise NotTracePreserving("first row must be (1, 0, ..., 0)")
    w = g[1:, 1:]
    return float(np.trace(w.T @ w) / (g.shape[0] - 1))


def unitarity_tilde(ptm: np.ndarray) -> float:
    """Determinant-based unitarity ``|det G|^(2/(d^2-1))``; 0 for singular G.

    Unlike the average-purity measure this one multiplies under composition,
    so it can never grow when more operations are appended.
    """
    g = np.asarray(ptm, dtype=float)
    lad = log_abs_det(g)
    if not np.isfinite(lad):
        return 0.0
    return float(np.exp(2.0 * lad / (g.shape[0] - 1)))


def accessible_volume(p: ProbabilityTable, p0: ProbabilityTable) -> float:
    """State-space volume ratio ``|det P| / |det P0|``.

    Equals ``|det S|`` of the intervening process when the gates are
    context-independent; computed in the log domain.
    """
    l0 = log_abs_det(p0.entries)
    if not np.isfinite(l0):
        raise SingularReference("reference table is singular")
    return float(np.exp(log_abs_det(p.entries) - l0))


def _find_increases(m_values, l_values, ci_low, ci_high, tol: float = EXACT_SPREAD_TOL):
    """Adjacent pairs where the log-determinant series rises significantly."""
    flags = []
    for j in range(len(l_values) - 1):
        a, b = l_values[j], l_values[j + 1]
        if not (np.isfinite(a) and np.isfinite(b)):
            continue
        if ci_low is None:
            significant = (b - a) > tol
        else:
            significant = b > a and ci_low[j + 1] > ci_high[j]
        if significant:
            flags.append(
                {
                    "m_from": float(m_values[j]),
                    "m_to": float(m_values[j + 1]),
                    "rise": float(b - a),
                }
            )
    return flags


def cp_witness(
    m_values,
    l_values,
    ci_low=None,
    ci_high=None,
    tol: float = EXACT_SPREAD_TOL,
) -> TestReport:
    """Divisibility witness: ``log|det|`` may never rise along a process.

    Any significant increase of the series means the overall evolution cannot
    be divided into completely positive pieces, assuming the SPAM operations
    themselves are not significantly context-dependent (recorded as a caveat).
    """
    m_values = np.asarray(list(m_values), dtype=float)
    l_values = np.asarray(l_values, dtype=float)
    if len(m_values) < 2:
        raise ValueError("need at least 2 points")
    increases = _find_increases(m_values, l_values, ci_low, ci_high, tol)
    verdict = Verdict.CONTEXT_DEPENDENT if increases else Verdict.CONTEXT_INDEPENDENT
    summary = {
        "n_increases": len(increases),
        "max_rise": max((f["rise"] for f in increases), default=0.0),
        "cp_indivisible": bool(increases),
        "caveat": "assumes SPAM operations are not significantly context-dependent",
    }
    return TestReport(
        kind="CPWitness",
        member_labels=[f"m={int(m)}" for m in m_values],
        statistics=l_values,
        verdict=verdict,
        threshold=tol,
        summary=summary,
        ci_low=None if ci_low is None else np.asarray(ci_low),
        ci_high=None if ci_high is None else np.asarray(ci_high),
        details={"m_values": m_values, "increases": increases},
    )


def bootstrap_ci(
    statistic,
    table: ProbabilityTable,
    resamples: int = 500,
    seed: int = 0,
) -> tuple[float, float]:
    """Parametric-bootstrap 95% interval for a statistic of one table.

    Each resample redraws every cell from a binomial at the observed
    frequency; the interval is the empirical [2.5%, 97.5%] range.  Exact
    tables yield a degenerate interval at the exact value.
    """
    if resamples < 100:
        raise ValueError("resamples must be >= 100")
    if table.is_exact:
        value = float(statistic(table))
        return value, value
    draws = resample_cells(table, resamples, seed, tag="ci")
    values = np.array(
        [
            statistic(ProbabilityTable(entries=draws[b], shots=table.shots, label=table.label))
            for b in range(resamples)
        ]
    )
    lo, hi = np.percentile(values, [2.5, 97.5])
    return float(lo), float(hi)
