"""Exact quantum predictions for two-qubit spin and polarization experiments.

The observable at analyzer angle ``theta`` is

    sigma(theta) = cos(p * theta) * sigma_z + sin(p * theta) * sigma_x

with periodicity ``p = 1`` for spin-1/2 and ``p = 2`` for photon
polarization, so that laboratory analyzer angles can be used directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .inequalities import DetectionProbs, chsh_max_abs
from .stats import OutcomeSeries, as_seed

TOL = 1e-12

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

# product basis |++>, |+->, |-+>, |--> (equivalently HH, HV, VH, VV)
_UP = np.array([1, 0], dtype=complex)
_DOWN = np.array([0, 1], dtype=complex)


def _check_density(m: np.ndarray, dim: int, what: str) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.shape != (dim, dim):
        raise ValueError(f"{what} must be {dim}x{dim}, got {m.shape}")
    if not np.allclose(m, m.conj().T, atol=TOL, rtol=0):
        raise ValueError(f"{what} is not Hermitian")
    tr = np.trace(m).real
    if abs(tr - 1.0) > TOL:
        raise ValueError(f"{what} has trace {tr}, expected 1")
    if np.linalg.eigvalsh(m).min() < -TOL:
        raise ValueError(f"{what} is not positive semidefinite")
    return m


@dataclass(frozen=True, eq=False)
class TwoQubitState:
    matrix: np.ndarray
    periodicity: int = 1

    def __post_init__(self):
        if self.periodicity not in (1, 2):
            raise ValueError("periodicity must be 1 (spin) or 2 (polarization)")
        m = _check_density(self.matrix, 4, "two-qubit state")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    @property
    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)

    def reduced(self, side: str) -> np.ndarray:
        return partial_trace(self.matrix, keep=side)


@dataclass(frozen=True)
class Setting:
    """Analyzer angle in radians, canonicalized to [0, 2*pi)."""

    angle: float
    side: str = "A"

    def __post_init__(self):
        if self.side not in ("A", "B"):
            raise ValueError("side must be 'A' or 'B'")
        object.__setattr__(self, "angle", float(self.angle) % (2.0 * math.pi))


def _angle(x) -> float:
    return x.angle if isinstance(x, Setting) else float(x)


def _projector_matrix(vec: np.ndarray) -> np.ndarray:
    return np.outer(vec, vec.conj())


def singlet() -> TwoQubitState:
    psi = (np.kron(_UP, _DOWN) - np.kron(_DOWN, _UP)) / math.sqrt(2)
    return TwoQubitState(_projector_matrix(psi), periodicity=1)


def photon_hv_plus_vh() -> TwoQubitState:
    psi = (np.kron(_UP, _DOWN) + np.kron(_DOWN, _UP)) / math.sqrt(2)
    return TwoQubitState(_projector_matrix(psi), periodicity=2)


def werner(visibility: float, periodicity: int = 1) -> TwoQubitState:
    """V |singlet><singlet| + (1 - V) I / 4."""
    if not 0.0 <= visibility <= 1.0:
        raise ValueError("visibility must lie in [0, 1]")
    rho = visibility * singlet().matrix + (1.0 - visibility) * np.eye(4) / 4.0
    return TwoQubitState(rho, periodicity=periodicity)


def eberhard(r: float, visibility: float) -> TwoQubitState:
    """Non-maximally entangled polarization state fitted to loophole-free data.

    Only the HV/VH block is populated: [[1, V r], [V r, r^2]] / (1 + r^2).
    """
    if not 0.0 < r <= 1.0:
        raise ValueError("r must lie in (0, 1]")
    if not 0.0 <= visibility <= 1.0:
        raise ValueError("visibility must lie in [0, 1]")
    m = np.zeros((4, 4), dtype=complex)
    m[1, 1] = 1.0
    m[1, 2] = m[2, 1] = visibility * r
    m[2, 2] = r * r
    return TwoQubitState(m / (1.0 + r * r), periodicity=2)


def product_state(rho_a: np.ndarray, rho_b: np.ndarray, periodicity: int = 1) -> TwoQubitState:
    a = _check_density(rho_a, 2, "rho_a")
    b = _check_density(rho_b, 2, "rho_b")
    return TwoQubitState(np.kron(a, b), periodicity=periodicity)


def separable_mixture(weights: Sequence[float], pairs, periodicity: int = 1) -> TwoQubitState:
    """Convex sum of product states, sum_i w_i rho_i (x) rho~_i."""
    w = np.asarray(weights, dtype=float)
    if w.min() < 0 or abs(w.sum() - 1.0) > TOL:
        raise ValueError("weights must be a probability vector")
    m = sum(wi * np.kron(_check_density(a, 2, "rho_a"), _check_density(b, 2, "rho_b"))
            for wi, (a, b) in zip(w, pairs))
    return TwoQubitState(m, periodicity=periodicity)


def bloch_state(x: float, y: float, z: float) -> np.ndarray:
    """Single-qubit density matrix (I + r.sigma) / 2 with |r| <= 1."""
    if x * x + y * y + z * z > 1.0 + TOL:
        raise ValueError("Bloch vector longer than 1")
    return 0.5 * (I2 + x * SIGMA_X + y * SIGMA_Y + z * SIGMA_Z)


def random_density_matrix(rng: np.random.Generator, dim: int = 4, rank: int | None = None) -> np.ndarray:
    """Random mixed state from a Ginibre matrix G: G G^dagger / Tr."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = g @ g.conj().T
    return m / np.trace(m).real


STATE_KINDS = ("singlet", "photon_hv_vh", "werner", "eberhard")


def make_state(kind: str, visibility: float = 1.0, r: float = 0.297, periodicity: int | None = None) -> TwoQubitState:
    kind = kind.lower()
    if kind == "singlet":
        st = singlet()
    elif kind == "photon_hv_vh":
        st = photon_hv_plus_vh()
    elif kind == "werner":
        return werner(visibility, periodicity or 1)
    elif kind == "eberhard":
        st = eberhard(r, visibility)
    else:
        raise ValueError(f"unknown state kind {kind!r}; expected one of {STATE_KINDS}")
    if periodicity is not None and periodicity != st.periodicity:
        st = TwoQubitState(st.matrix, periodicity)
    return st


def observable(theta: float, periodicity: int = 1) -> np.ndarray:
    t = periodicity * theta
    return math.cos(t) * SIGMA_Z + math.sin(t) * SIGMA_X


def outcome_projector(theta: float, outcome: int, periodicity: int = 1) -> np.ndarray:
    if outcome not in (-1, 1):
        raise ValueError("outcome must be +1 or -1")
    return 0.5 * (I2 + outcome * observable(theta, periodicity))


class PairExpectation(NamedTuple):
    e_ab: float
    e_a: float
    e_b: float


def expectation_pair(state: TwoQubitState, theta_a, theta_b) -> PairExpectation:
    """Tr rho (A x B), Tr rho (A x I) and Tr rho (I x B)."""
    p = state.periodicity
    A = observable(_angle(theta_a), p)
    B = observable(_angle(theta_b), p)
    rho = state.matrix
    e_ab = np.trace(rho @ np.kron(A, B)).real
    e_a = np.trace(rho @ np.kron(A, I2)).real
    e_b = np.trace(rho @ np.kron(I2, B)).real
    return PairExpectation(float(e_ab), float(e_a), float(e_b))


def correlation(state: TwoQubitState, theta_a, theta_b) -> float:
    return expectation_pair(state, theta_a, theta_b).e_ab


class QuantumChsh(NamedTuple):
    S: float
    max_abs: float
    max_orientation: str
    correlations: tuple[float, float, float, float]


def chsh_quantum(state: TwoQubitState, a, ap, b, bp) -> QuantumChsh:
    """Standard-form S together with the largest |S| over sign placements."""
    e = (
        correlation(state, a, b),
        correlation(state, a, bp),
        correlation(state, ap, b),
        correlation(state, ap, bp),
    )
    s = e[0] + e[1] + e[2] - e[3]
    max_abs, key = chsh_max_abs(*e)
    return QuantumChsh(s, max_abs, key, e)


def chsh_optimal_settings(periodicity: int = 1) -> tuple[float, float, float, float]:
    """(a, a', b, b') = (0, pi/2, pi/4, 3pi/4) scaled to the periodicity."""
    return tuple(x / periodicity for x in (0.0, math.pi / 2, math.pi / 4, 3 * math.pi / 4))


def joint_probabilities(state: TwoQubitState, theta_a, theta_b) -> dict[tuple[int, int], float]:
    p = state.periodicity
    out = {}
    for sa in (1, -1):
        for sb in (1, -1):
            proj = np.kron(
                outcome_projector(_angle(theta_a), sa, p),
                outcome_projector(_angle(theta_b), sb, p),
            )
            out[(sa, sb)] = float(np.trace(state.matrix @ proj).real)
    return out


def detection_probs(state: TwoQubitState, a, ap, b, bp) -> DetectionProbs:
    """CH detection probabilities, counting a +1 outcome as a detection."""

    def p12(x, y):
        return max(joint_probabilities(state, x, y)[(1, 1)], 0.0)

    pa = joint_probabilities(state, ap, b)
    return DetectionProbs(
        p12_ab=p12(a, b),
        p12_abp=p12(a, bp),
        p12_apb=p12(ap, b),
        p12_apbp=p12(ap, bp),
        p1_ap=pa[(1, 1)] + pa[(1, -1)],
        p2_b=pa[(1, 1)] + pa[(-1, 1)],
    )


def sample_pairs(state: TwoQubitState, theta_a, theta_b, n: int, seed) -> tuple[OutcomeSeries, OutcomeSeries]:
    """Draw n outcome pairs from the Born-rule joint distribution."""
    if n < 1:
        raise ValueError("n must be at least 1")
    probs = joint_probabilities(state, theta_a, theta_b)
    keys = list(probs)
    pv = np.clip(np.array([probs[k] for k in keys]), 0.0, None)
    pv = pv / pv.sum()
    rng = as_seed(seed).generator()
    idx = rng.choice(len(keys), size=n, p=pv)
    table = np.array(keys, dtype=np.int8)
    la = f"a={_angle(theta_a)!r}"
    lb = f"b={_angle(theta_b)!r}"
    return OutcomeSeries(table[idx, 0], setting_label=la), OutcomeSeries(table[idx, 1], setting_label=lb)


# -- smeared analyzer directions

@dataclass(frozen=True)
class SmearSpec:
    """Uniform spread of the analyzer direction over a full width (radians)."""

    width_a: float = 0.0
    width_b: float = 0.0
    distribution: str = "uniform"

    def __post_init__(self):
        for w in (self.width_a, self.width_b):
            if not 0.0 <= w < math.pi:
                raise ValueError("smear widths must lie in [0, pi)")
        if self.distribution != "uniform":
            raise ValueError("only the uniform smear distribution is implemented")


def smeared_correlation(theta_a, theta_b, s: SmearSpec, order: int = 32, periodicity: int = 1) -> float:
    """-Int Int cos(p (t1 - t2)) over uniform intervals around both settings.

    Gauss-Legendre on each interval; the integrand is entire, so a few dozen
    nodes reach machine precision for every allowed width.
    """
    ta, tb = _angle(theta_a), _angle(theta_b)
    x, w = np.polynomial.legendre.leggauss(order)
    # nodes on [-1, 1] -> offsets over each interval, weights normalized to 1
    t1 = ta + 0.5 * s.width_a * x
    t2 = tb + 0.5 * s.width_b * x
    w = w / 2.0
    grid = np.cos(periodicity * (t1[:, None] - t2[None, :]))
    return float(-(w @ grid @ w))


# -- conditioning and filters

def partial_trace(rho4: np.ndarray, keep: str) -> np.ndarray:
    r = np.asarray(rho4).reshape(2, 2, 2, 2)
    if keep == "A":
        return np.einsum("ijkj->ik", r)
    if keep == "B":
        return np.einsum("ijil->jl", r)
    raise ValueError("keep must be 'A' or 'B'")


class ConditionalState(NamedTuple):
    state: np.ndarray
    probability: float


def conditional_reduced_state(state: TwoQubitState, side: str, theta, outcome: int) -> ConditionalState:
    """State of the partner sub-ensemble selected by one outcome on one side.

    The returned 2x2 matrix describes the partners of all the systems that
    gave ``outcome`` at ``theta`` on ``side``; it is an ensemble statement,
    not an instantaneous change of a distant individual system.
    """
    proj = outcome_projector(_angle(theta), outcome, state.periodicity)
    if side == "A":
        big = np.kron(proj, I2)
        other = "B"
    elif side == "B":
        big = np.kron(I2, proj)
        other = "A"
    else:
        raise ValueError("side must be 'A' or 'B'")
    projected = big @ state.matrix @ big
    prob = float(np.trace(projected).real)
    if prob <= TOL:
        raise ValueError(f"outcome {outcome} at angle {_angle(theta)} has zero probability")
    return ConditionalState(partial_trace(projected / prob, keep=other), prob)


@dataclass(frozen=True, eq=False)
class Projector:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError("projector must be 2x2")
        if not np.allclose(m @ m, m, atol=TOL, rtol=0):
            raise ValueError("filter is not idempotent")
        if not np.allclose(m, m.conj().T, atol=TOL, rtol=0):
            raise ValueError("filter is not Hermitian")
        object.__setattr__(self, "matrix", m)

    def commutes_with(self, other: "Projector") -> bool:
        return bool(np.allclose(self.matrix @ other.matrix, other.matrix @ self.matrix, atol=TOL, rtol=0))


def polarizer(angle: float) -> Projector:
    """Linear polarizer transmitting polarization at ``angle`` (0 = H)."""
    v = np.array([math.cos(angle), math.sin(angle)], dtype=complex)
    return Projector(np.outer(v, v))


def pure_state(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=complex)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


class FilterOutcome(NamedTuple):
    state: np.ndarray | None
    transmission: float


def filter_chain(rho: np.ndarray, filters: Sequence[Projector]) -> FilterOutcome:
    """Pass a state through successive filters, renormalizing after each.

    ``state`` is None once the system is absorbed.
    """
    current = _check_density(rho, 2, "input state")
    transmission = 1.0
    for f in filters:
        if not isinstance(f, Projector):
            f = Projector(f)
        out = f.matrix @ current @ f.matrix
        p = float(np.trace(out).real)
        if p <= TOL:
            return FilterOutcome(None, 0.0)
        transmission *= p
        current = out / p
    return FilterOutcome(current, transmission)
