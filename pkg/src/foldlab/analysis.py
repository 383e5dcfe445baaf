"""Study analysis: condition summaries and 2x2 within-subject ANOVA.

Input records form a complete two-factor within-subject design (every
subject measured once per cell).  With two levels per factor, each
effect's F test with df (1, n-1) reduces to a paired contrast per
subject: F = n * mean(contrast)^2 / var(contrast).  Tail probabilities
come from the regularized incomplete beta function, evaluated with the
modified Lentz continued fraction, so there is no runtime dependency on
a statistics package.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import (EmptyRecords, IncompleteDesign, SchemaError,
                     TooFewSubjects)

CSV_HEADER = ["subject", "interface", "preview", "measure", "value"]


@dataclass(frozen=True)
class TrialRecord:
    """One measured value for one subject in one condition cell."""

    subject: str
    interface: str  # factor A level
    preview: str    # factor B level
    measure: str
    value: float


@dataclass(frozen=True)
class EffectResult:
    """F test of a single effect."""

    name: str
    f: float
    df: tuple[int, int]
    p: float


@dataclass(frozen=True)
class AnovaResult:
    """2x2 within-subject ANOVA: both main effects and the interaction."""

    interface: EffectResult
    preview: EffectResult
    interaction: EffectResult
    n_subjects: int


def load_csv(text_or_path: str) -> list[TrialRecord]:
    """Read trial records from CSV text or a file path."""
    if "\n" not in text_or_path and not text_or_path.lstrip().startswith("subject"):
        with open(text_or_path, "r", newline="") as fh:
            text = fh.read()
    else:
        text = text_or_path
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if not rows:
        raise SchemaError("empty CSV")
    header = [cell.strip() for cell in rows[0]]
    if header != CSV_HEADER:
        raise SchemaError(f"CSV header must be {','.join(CSV_HEADER)!r}, "
                          f"got {','.join(header)!r}")
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(CSV_HEADER):
            raise SchemaError(f"line {lineno}: expected {len(CSV_HEADER)} fields")
        subject, interface, preview, measure, raw = (cell.strip() for cell in row)
        try:
            value = float(raw)
        except ValueError as exc:
            raise SchemaError(f"line {lineno}: value {raw!r} is not a number") from exc
        if not math.isfinite(value):
            raise SchemaError(f"line {lineno}: value must be finite")
        records.append(TrialRecord(subject, interface, preview, measure, value))
    return records


def summarize(records: Sequence[TrialRecord],
              group_by: str) -> list[tuple[str, float, float, int]]:
    """Per-level (level, mean, sample sigma, count) for one grouping factor."""
    if not records:
        raise EmptyRecords("no records to summarize")
    if group_by not in ("subject", "interface", "preview", "measure"):
        raise ValueError(f"cannot group by {group_by!r}")
    groups: dict[str, list[float]] = {}
    for rec in records:
        groups.setdefault(getattr(rec, group_by), []).append(rec.value)
    out = []
    for level in sorted(groups):
        values = groups[level]
        n = len(values)
        mean = sum(values) / n
        if n > 1:
            sigma = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1))
        else:
            sigma = 0.0
        out.append((level, mean, sigma, n))
    return out


def format_mean_sigma(mean: float, sigma: float) -> str:
    """Render a cell the way the result tables print them, e.g. '73.8 (σ=8.7)'."""
    return f"{mean:.3g} (σ={sigma:.3g})"


def _contrast_f(contrasts: Sequence[float]) -> float:
    """F(1, n-1) for a per-subject contrast: n*mean^2 / var (ddof=1)."""
    n = len(contrasts)
    mean = sum(contrasts) / n
    var = sum((c - mean) ** 2 for c in contrasts) / (n - 1)
    if var == 0.0:
        return 0.0 if mean == 0.0 else math.inf
    return n * mean * mean / var


def rm_anova_2x2(records: Sequence[TrialRecord]) -> AnovaResult:
    """Repeated-measures two-way ANOVA for a single measure.

    Requires a complete balanced design: every subject contributes
    exactly one value for each of the four (interface, preview) cells.
    """
    if not records:
        raise EmptyRecords("no records")
    measures = {r.measure for r in records}
    if len(measures) != 1:
        raise IncompleteDesign(f"expected one measure, got {sorted(measures)}")
    a_levels = sorted({r.interface for r in records})
    b_levels = sorted({r.preview for r in records})
    if len(a_levels) != 2 or len(b_levels) != 2:
        raise IncompleteDesign(
            f"need exactly 2 levels per factor, got interface={a_levels}, "
            f"preview={b_levels}")
    cells: dict[tuple[str, str, str], float] = {}
    for r in records:
        key = (r.subject, r.interface, r.preview)
        if key in cells:
            raise IncompleteDesign(f"duplicate record for {key}")
        cells[key] = r.value
    subjects = sorted({r.subject for r in records})
    if len(subjects) < 2:
        raise TooFewSubjects("need at least 2 subjects")
    for s in subjects:
        for a in a_levels:
            for b in b_levels:
                if (s, a, b) not in cells:
                    raise IncompleteDesign(f"missing cell {(s, a, b)}")
    a0, a1 = a_levels
    b0, b1 = b_levels
    c_a, c_b, c_ab = [], [], []
    for s in subjects:
        y00, y01 = cells[(s, a0, b0)], cells[(s, a0, b1)]
        y10, y11 = cells[(s, a1, b0)], cells[(s, a1, b1)]
        c_a.append((y10 + y11 - y00 - y01) / 2.0)
        c_b.append((y01 + y11 - y00 - y10) / 2.0)
        c_ab.append((y11 - y10 - y01 + y00) / 2.0)
    n = len(subjects)
    df = (1, n - 1)

    def effect(name: str, contrasts: list[float]) -> EffectResult:
        f = _contrast_f(contrasts)
        return EffectResult(name=name, f=f, df=df, p=f_tail(f, df[0], df[1]))

    return AnovaResult(interface=effect("interface", c_a),
                       preview=effect("preview", c_b),
                       interaction=effect("interface:preview", c_ab),
                       n_subjects=n)


# --- F-distribution tail via the regularized incomplete beta function ---

_BETA_MAX_ITER = 300
_BETA_EPS = 3.0e-16
_BETA_TINY = 1.0e-300


def _beta_cf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _BETA_TINY:
        d = _BETA_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETA_TINY:
            d = _BETA_TINY
        c = 1.0 + aa / c
        if abs(c) < _BETA_TINY:
            c = _BETA_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETA_TINY:
            d = _BETA_TINY
        c = 1.0 + aa / c
        if abs(c) < _BETA_TINY:
            c = _BETA_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    # Use the fast-converging side of the symmetry relation.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def f_tail(f: float, df1: int, df2: int) -> float:
    """P(F(df1, df2) > f): the ANOVA p value."""
    if f <= 0.0:
        return 1.0
    if math.isinf(f):
        return 0.0
    x = df2 / (df2 + df1 * f)
    return betainc_reg(df2 / 2.0, df1 / 2.0, x)
