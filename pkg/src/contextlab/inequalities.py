"""Bell-type inequalities and joint-distribution feasibility.

CHSH is always assembled in the standard orientation

    S = E(a, b) + E(a, b') + E(a', b) - E(a', b')

and the largest ``|S|`` over all placements of the minus sign is reported
alongside it.  Feasibility of a joint distribution for three +-1 variables is
decided with exact rational arithmetic so that boundary cases classify
deterministically.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

ANALYTIC_TOL = 1e-12
STAT_SIGMAS = 4.0
CHSH_BOUND = 2.0

PAIR_KEYS = ("ab", "abp", "apb", "apbp")
SPREADSHEET_HEADER = ("A", "Ap", "B", "Bp")


class InvariantViolation(RuntimeError):
    """An algebraic guarantee failed; always a bug, never a physics result."""


def _check_unit(name: str, x: float, bound: float = 1.0) -> None:
    if not abs(x) <= bound + ANALYTIC_TOL:
        raise ValueError(f"{name}={x} outside [-{bound}, {bound}]")


class Bell64Result(NamedTuple):
    lhs: float
    rhs: float
    satisfied: bool


def bell64_check(e_ab: float, e_ac: float, e_bc: float) -> Bell64Result:
    """|E(a,b) - E(a,c)| <= 1 + E(b,c), valid under strict anti-correlation."""
    for name, v in (("e_ab", e_ab), ("e_ac", e_ac), ("e_bc", e_bc)):
        _check_unit(name, v)
    lhs = abs(e_ab - e_ac)
    rhs = 1.0 + e_bc
    return Bell64Result(lhs, rhs, lhs <= rhs + ANALYTIC_TOL)


def chsh_orientations(e_ab: float, e_abp: float, e_apb: float, e_apbp: float) -> dict[str, float]:
    """CHSH sums with the minus sign on each of the four terms in turn.

    Keys name the term carrying the minus sign; ``"apbp"`` is the standard
    form.  Flipping the overall sign gives the other four of the eight
    orientations, which have the same absolute values.
    """
    e = dict(zip(PAIR_KEYS, (e_ab, e_abp, e_apb, e_apbp)))
    total = sum(e.values())
    return {k: total - 2.0 * v for k, v in e.items()}


def chsh_max_abs(e_ab: float, e_abp: float, e_apb: float, e_apbp: float) -> tuple[float, str]:
    orient = chsh_orientations(e_ab, e_abp, e_apb, e_apbp)
    key = max(PAIR_KEYS, key=lambda k: abs(orient[k]))
    return abs(orient[key]), key


@dataclass(frozen=True)
class CorrelationSet:
    """Four pairwise correlations E(a,b), E(a,b'), E(a',b), E(a',b')."""

    e_ab: float
    e_abp: float
    e_apb: float
    e_apbp: float
    stderrs: tuple[float, float, float, float] | None = None

    def __post_init__(self):
        for k in PAIR_KEYS:
            _check_unit(f"e_{k}", getattr(self, f"e_{k}"))
        if self.stderrs is not None:
            if len(self.stderrs) != 4 or min(self.stderrs) < 0:
                raise ValueError("stderrs must be four non-negative numbers")
            object.__setattr__(self, "stderrs", tuple(float(s) for s in self.stderrs))

    @property
    def values(self) -> tuple[float, float, float, float]:
        return (self.e_ab, self.e_abp, self.e_apb, self.e_apbp)

    @property
    def combined_stderr(self) -> float:
        if self.stderrs is None:
            return 0.0
        return math.sqrt(sum(s * s for s in self.stderrs))

    def to_dict(self) -> dict:
        """The four E fields, their standard errors and the CHSH summary."""
        out = {f"E_{k}": v for k, v in zip(PAIR_KEYS, self.values)}
        out["stderrs"] = list(self.stderrs) if self.stderrs is not None else None
        return {**out, **chsh_s(self).to_dict()}


class ChshResult(NamedTuple):
    S: float
    bound_satisfied: bool
    sigma_excess: float
    max_abs: float
    max_orientation: str
    combined_stderr: float

    def to_dict(self) -> dict:
        return self._asdict()


def chsh_s(c: CorrelationSet) -> ChshResult:
    """Evaluate CHSH on a correlation set.

    The bound is judged on the largest ``|S|`` over all orientations; the
    tolerance is 1e-12 for analytic inputs and 4 combined standard errors
    for estimated ones.  ``sigma_excess`` is ``(max|S| - 2) / stderr`` and 0
    when no standard errors are attached.
    """
    s = c.e_ab + c.e_abp + c.e_apb - c.e_apbp
    max_abs, key = chsh_max_abs(*c.values)
    se = c.combined_stderr
    if se > 0:
        tol = STAT_SIGMAS * se
        excess = (max_abs - CHSH_BOUND) / se
    else:
        tol = ANALYTIC_TOL
        excess = 0.0
    return ChshResult(s, max_abs <= CHSH_BOUND + tol, excess, max_abs, key, se)


def chsh_algebraic_lemma(A: float, Ap: float, B: float, Bp: float) -> float:
    """s = AB + AB' + A'B - A'B', with |s| <= 2 whenever all |.| <= 1."""
    for name, v in (("A", A), ("Ap", Ap), ("B", B), ("Bp", Bp)):
        _check_unit(name, v)
    s = A * B + A * Bp + Ap * B - Ap * Bp
    if abs(s) > CHSH_BOUND + ANALYTIC_TOL:
        raise InvariantViolation(f"|s|={abs(s)} exceeds 2 for ({A}, {Ap}, {B}, {Bp})")
    return s


def _as_spreadsheet(table) -> np.ndarray:
    t = np.asarray(table)
    if t.ndim != 2 or t.shape[1] != 4:
        raise ValueError(f"spreadsheet must have shape (n, 4), got {t.shape}")
    if t.shape[0] == 0:
        raise ValueError("spreadsheet has no rows")
    if not np.isin(t, (-1, 1)).all():
        raise ValueError("spreadsheet entries must be exactly -1 or +1")
    return t.astype(np.int64)


def spreadsheet_row_values(table) -> np.ndarray:
    """Row-wise AB + AB' + A'B - A'B' for a table with columns (A, A', B, B')."""
    t = _as_spreadsheet(table)
    a, ap, b, bp = t.T
    return a * b + a * bp + ap * b - ap * bp


def spreadsheet_chsh(table) -> float:
    """CHSH from the four within-row product means of a +-1 spreadsheet.

    Every row contributes exactly +-2, so the integer sum is bounded by
    2n; the check below can only fail on a bug.
    """
    rows = spreadsheet_row_values(table)
    total = int(rows.sum())
    n = rows.size
    if abs(total) > 2 * n:
        raise InvariantViolation(f"spreadsheet sum {total} exceeds 2n = {2 * n}")
    return total / n


def read_spreadsheet_csv(path) -> np.ndarray:
    """Load a ``A,Ap,B,Bp`` spreadsheet; entries must be the tokens -1, 1 or +1."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != SPREADSHEET_HEADER:
            raise ValueError(f"{path}: header must be {','.join(SPREADSHEET_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            vals = []
            for tok in row:
                tok = tok.strip()
                if tok not in ("-1", "1", "+1"):
                    raise ValueError(f"{path}:{lineno}: invalid entry {tok!r}")
                vals.append(int(tok))
            rows.append(vals)
    return np.array(rows, dtype=np.int8).reshape(-1, 4)


def write_spreadsheet_csv(path, table) -> Path:
    t = _as_spreadsheet(table)
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(SPREADSHEET_HEADER) + "\n")
        for row in t:
            fh.write(",".join(str(int(v)) for v in row) + "\n")
    return path


# -- three +-1 variables: Boole conditions and joint-distribution feasibility

@dataclass(frozen=True)
class TripleMoments:
    e12: float
    e13: float
    e23: float
    m1: float = 0.0
    m2: float = 0.0
    m3: float = 0.0

    def __post_init__(self):
        for name in ("e12", "e13", "e23", "m1", "m2", "m3"):
            _check_unit(name, float(getattr(self, name)))

    def exact(self) -> dict[str, Fraction]:
        return {k: Fraction(getattr(self, k)) for k in ("m1", "m2", "m3", "e12", "e13", "e23")}


ATOMS = tuple(itertools.product((1, -1), repeat=3))


def boole_triples(t: TripleMoments) -> list[tuple[str, bool]]:
    """The four conditions 1 + s1*e12 + s2*e13 + s1*s2*e23 >= 0."""
    x = t.exact()
    out = []
    for s1, s2 in itertools.product((1, -1), repeat=2):
        value = 1 + s1 * x["e12"] + s2 * x["e13"] + s1 * s2 * x["e23"]
        out.append((f"s1={s1:+d},s2={s2:+d}", value >= 0))
    return out


class FeasibilityResult(NamedTuple):
    feasible: bool
    witness: dict[tuple[int, int, int], Fraction] | None


def jpd_feasible(t: TripleMoments) -> FeasibilityResult:
    """Is there a distribution on {+-1}^3 with these means and correlations?

    Writing the atom weights in the Fourier basis, the seven given moments
    fix every weight up to the free third moment ``m123``:

        p(s) = (1 + sum m_i s_i + sum e_ij s_i s_j + m123 s1 s2 s3) / 8.

    Each weight is then linear in ``m123``, so feasibility reduces to
    intersecting eight half-lines, done exactly in rationals.  The witness
    uses the feasible ``m123`` closest to zero.
    """
    x = t.exact()
    lo, hi = Fraction(-1), Fraction(1)
    consts = {}
    for s in ATOMS:
        s1, s2, s3 = s
        c = (
            1
            + x["m1"] * s1 + x["m2"] * s2 + x["m3"] * s3
            + x["e12"] * s1 * s2 + x["e13"] * s1 * s3 + x["e23"] * s2 * s3
        )
        sign = s1 * s2 * s3
        consts[s] = (c, sign)
        # c + sign * m123 >= 0
        if sign > 0:
            lo = max(lo, -c)
        else:
            hi = min(hi, c)
    if lo > hi:
        return FeasibilityResult(False, None)
    m123 = min(max(Fraction(0), lo), hi)
    witness = {s: (c + sign * m123) / 8 for s, (c, sign) in consts.items()}
    return FeasibilityResult(True, witness)


def witness_moments(witness: dict[tuple[int, int, int], Fraction]) -> dict[str, Fraction]:
    """Means and pairwise correlations of an atom distribution (for verification)."""
    def mean(f):
        return sum(w * f(s) for s, w in witness.items())

    return {
        "total": sum(witness.values()),
        "m1": mean(lambda s: s[0]),
        "m2": mean(lambda s: s[1]),
        "m3": mean(lambda s: s[2]),
        "e12": mean(lambda s: s[0] * s[1]),
        "e13": mean(lambda s: s[0] * s[2]),
        "e23": mean(lambda s: s[1] * s[2]),
    }


# -- Clauser-Horne

@dataclass(frozen=True)
class DetectionProbs:
    """Joint and single detection probabilities entering the CH inequality."""

    p12_ab: float
    p12_abp: float
    p12_apb: float
    p12_apbp: float
    p1_ap: float
    p2_b: float

    def __post_init__(self):
        for name, v in self.__dict__.items():
            if not -ANALYTIC_TOL <= v <= 1.0 + ANALYTIC_TOL:
                raise ValueError(f"{name}={v} outside [0, 1]")


class CHResult(NamedTuple):
    ratio: float
    satisfied: bool
    difference: float
    lower_satisfied: bool

    def to_dict(self) -> dict:
        return self._asdict()


def ch_check(d: DetectionProbs) -> CHResult:
    """CH inequality in ratio form.

    ``ratio`` is (P12(a,b) - P12(a,b') + P12(a',b) + P12(a',b')) / (P1(a') + P2(b));
    the same numerator minus the denominator is ``difference``, which local
    models keep in [-1, 0].
    """
    num = d.p12_ab - d.p12_abp + d.p12_apb + d.p12_apbp
    den = d.p1_ap + d.p2_b
    if den <= 0:
        raise ValueError("CH denominator P1(a') + P2(b) must be positive")
    ratio = num / den
    diff = num - den
    return CHResult(ratio, ratio <= 1.0 + ANALYTIC_TOL, diff, diff >= -1.0 - ANALYTIC_TOL)


def correlation_set_from_values(values: Sequence[float], stderrs: Sequence[float] | None = None) -> CorrelationSet:
    e = [float(v) for v in values]
    if len(e) != 4:
        raise ValueError("need four correlations")
    return CorrelationSet(*e, stderrs=None if stderrs is None else tuple(stderrs))
