"""Temporal information processing capacity (TIPC) analysis.

The pipeline: rank-normalize a state matrix through a compact SVD, expand
the normalized states in orthonormal polynomial bases built from input
history and normalized-state history, project to get one capacity per
basis term, truncate against a noise threshold, and aggregate totals per
degree, split into time-invariant (input-only) and time-variant
(state-history) parts.

Conventions.  State row t is aligned with input u_t: the row was measured
after the circuit consumed u_t, so the expansion's delay-1 factor refers
to u_t itself.  Internally terms carry expansion delays s >= 1; emitted
labels count back from u_t, i.e. "u[t-d]" with d = s - 1.  States are
column-centered before the SVD and every basis is orthogonalized against
the constant, which is what makes the chi-squared error model for the
capacities of uninformative terms apply.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import chdtri, eval_legendre

from .reservoir import StateMatrix


@dataclass
class NormalizedStates:
    """Orthonormal time courses of the linearly independent state directions."""

    P: np.ndarray                 # T x r, orthonormal columns, zero column means
    singular_values: np.ndarray   # all singular values of the centered matrix
    rank: int
    sv_cutoff: float
    column_means: np.ndarray


def normalize_states(X: np.ndarray, sv_cutoff: float = 1e-10,
                     abs_floor: Optional[float] = None) -> NormalizedStates:
    """Center columns and compact-SVD the state matrix X = P S Q^T.

    Columns of P with singular value below max(sv_cutoff * sigma_max,
    abs_floor) are dropped; the default absolute floor 1e-8 * sqrt(T)
    classifies roundoff-scale state matrices (the noiseless reservoir) as
    rank zero.  P column signs are fixed by making each column's
    largest-magnitude entry positive.
    """
    X = X.data if isinstance(X, StateMatrix) else np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("state matrix must be 2-D")
    if not np.isfinite(X).all():
        raise ValueError("state matrix contains NaN or Inf")
    T = X.shape[0]
    if abs_floor is None:
        abs_floor = 1e-8 * np.sqrt(T)
    means = X.mean(axis=0)
    Xc = X - means
    if not np.any(Xc):
        return NormalizedStates(np.empty((T, 0)), np.zeros(0), 0, sv_cutoff, means)
    P, sv, _ = np.linalg.svd(Xc, full_matrices=False)
    keep = sv >= max(sv_cutoff * sv[0], abs_floor)
    r = int(np.sum(keep))
    P = P[:, :r]
    for k in range(r):
        col = P[:, k]
        if col[np.argmax(np.abs(col))] < 0:
            P[:, k] = -col
    return NormalizedStates(P, sv, r, sv_cutoff, means)


@dataclass(frozen=True)
class BasisTerm:
    """One product basis of input and normalized-state history.

    ``input_exponents`` maps expansion delay s >= 1 (s = 1 is u_t) to its
    exponent; ``state_exponents`` maps (feature k, delay s >= 1) to its
    exponent.  ``family`` picks raw powers or Legendre polynomials for the
    input factors; state factors are always raw powers.
    """

    input_exponents: Tuple[Tuple[int, int], ...] = ()
    state_exponents: Tuple[Tuple[int, int, int], ...] = ()
    family: str = "monomial"

    @property
    def input_order(self) -> int:
        return sum(e for _, e in self.input_exponents)

    @property
    def state_order(self) -> int:
        return sum(e for _, _, e in self.state_exponents)

    @property
    def degree(self) -> int:
        return self.input_order + self.state_order

    @property
    def max_delay(self) -> int:
        delays = [s for s, _ in self.input_exponents]
        delays += [s for _, s, _ in self.state_exponents]
        return max(delays) if delays else 0

    @property
    def is_time_invariant(self) -> bool:
        return self.state_order == 0

    def label(self) -> str:
        """Human-readable label; delays count back from u_t (delay 0)."""
        parts = []
        for s, e in self.input_exponents:
            d = s - 1
            arg = "u[t]" if d == 0 else f"u[t-{d}]"
            if self.family == "legendre":
                parts.append(f"P{e}({arg})")
            else:
                parts.append(arg if e == 1 else f"{arg}^{e}")
        for k, s, e in self.state_exponents:
            base = f"x{k + 1}[t-{s}]"
            parts.append(base if e == 1 else f"{base}^{e}")
        return " ".join(parts)


def enumerate_bases(max_degree: int, max_input_delay: int, max_state_delay: int,
                    rank: int, family: str = "monomial",
                    term_cap: int = 20000) -> List[BasisTerm]:
    """All terms with input order + state order <= max_degree, in the fixed
    evaluation order: ascending (degree, state order, max delay, reverse-
    lexicographic exponent tuples)."""
    if max_degree < 1 or max_input_delay < 1:
        raise ValueError("max_degree and max_input_delay must be >= 1")
    if family not in ("monomial", "legendre"):
        raise ValueError(f"unknown basis family {family!r}")
    variables = [("u", s) for s in range(1, max_input_delay + 1)]
    variables += [
        ("x", k, s)
        for s in range(1, max_state_delay + 1)
        for k in range(rank)
    ]
    terms = []
    for degree in range(1, max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(len(variables)), degree):
            inp: Dict[int, int] = {}
            sta: Dict[Tuple[int, int], int] = {}
            for vi in combo:
                v = variables[vi]
                if v[0] == "u":
                    inp[v[1]] = inp.get(v[1], 0) + 1
                else:
                    sta[(v[1], v[2])] = sta.get((v[1], v[2]), 0) + 1
            terms.append(BasisTerm(
                input_exponents=tuple(sorted(inp.items())),
                state_exponents=tuple(sorted((k, s, e) for (k, s), e in sta.items())),
                family=family,
            ))
            if len(terms) > term_cap:
                raise ValueError(
                    f"basis enumeration exceeds the term cap ({term_cap}); "
                    "reduce max_degree or the delay windows")

    def key(t: BasisTerm):
        inp_vec = tuple(-dict(t.input_exponents).get(s, 0)
                        for s in range(1, max_input_delay + 1))
        sta = {(k, s): e for k, s, e in t.state_exponents}
        sta_vec = tuple(-sta.get((k, s), 0)
                        for s in range(1, max_state_delay + 1)
                        for k in range(rank))
        return (t.degree, t.state_order, t.max_delay, inp_vec, sta_vec)

    terms.sort(key=key)
    return terms


def evaluate_bases(terms: Sequence[BasisTerm], inputs: np.ndarray, input_offset: int,
                   xhat: Optional[np.ndarray] = None, start_row: int = 0,
                   n_rows: Optional[int] = None,
                   input_range: Tuple[float, float] = (-1.0, 1.0)) -> np.ndarray:
    """Basis time series over state rows [start_row, start_row + n_rows).

    ``inputs[input_offset + i]`` is the input consumed by state row i, so the
    expansion delay-s factor of row i reads ``inputs[input_offset + i - s + 1]``.
    Legendre input factors are evaluated after affinely mapping the declared
    input range onto [-1, 1]; state factors read raw powers of ``xhat``.
    """
    inputs = np.asarray(inputs, dtype=float)
    if xhat is not None and n_rows is None:
        n_rows = xhat.shape[0] - start_row
    if n_rows is None:
        raise ValueError("n_rows required when no normalized states are given")
    max_in_delay = max((s for t in terms for s, _ in t.input_exponents), default=1)
    if input_offset + start_row - max_in_delay + 1 < 0:
        raise ValueError("not enough input history for the requested delays")
    lo, hi = input_range
    legendre = any(t.family == "legendre" for t in terms)
    if legendre:
        if inputs.min() < lo - 1e-12 or inputs.max() > hi + 1e-12:
            raise ValueError(
                f"inputs outside declared range [{lo}, {hi}]: "
                f"[{inputs.min():.6g}, {inputs.max():.6g}]")
        scaled = (2.0 * inputs - (lo + hi)) / (hi - lo)
    else:
        scaled = inputs

    out = np.empty((n_rows, len(terms)))
    rows = np.arange(start_row, start_row + n_rows)
    for j, term in enumerate(terms):
        col = np.ones(n_rows)
        for s, e in term.input_exponents:
            seg_idx = input_offset + rows - s + 1
            if term.family == "legendre":
                col = col * eval_legendre(e, scaled[seg_idx])
            else:
                col = col * inputs[seg_idx] ** e
        for k, s, e in term.state_exponents:
            if xhat is None:
                raise ValueError("state-history term without normalized states")
            col = col * xhat[rows - s, k] ** e
        out[:, j] = col
    return out


@dataclass
class Orthonormalized:
    """Result of the sequential orthonormalization of the basis matrix."""

    Q: np.ndarray            # T' x n_kept, orthonormal (constant excluded)
    kept: List[int]
    dropped: List[int]


def orthonormalize(basis: np.ndarray, prepend_constant: bool = True,
                   drop_tol: float = 1e-8, block: int = 64) -> Orthonormalized:
    """Modified Gram-Schmidt over the columns, one re-orthogonalization pass.

    Columns whose post-projection norm falls below drop_tol * sqrt(T) are
    recorded as linearly dependent and dropped.  Columns are processed in
    blocks so the projections run as matrix products, which changes nothing
    about the result beyond float rounding.  The constant column, when
    prepended, centers every retained basis but is not reported.
    """
    A = np.asarray(basis, dtype=float)
    T, B = A.shape
    floor = drop_tol * np.sqrt(T)
    Q = np.empty((T, B + 1))
    k = 0
    if prepend_constant:
        Q[:, 0] = 1.0 / np.sqrt(T)
        k = 1
    first = k
    kept: List[int] = []
    dropped: List[int] = []
    for j0 in range(0, B, block):
        blk = A[:, j0:j0 + min(block, B - j0)].copy()
        for _ in range(2):
            if k:
                blk -= Q[:, :k] @ (Q[:, :k].T @ blk)
        k_block = k
        for c in range(blk.shape[1]):
            v = blk[:, c]
            for _ in range(2):
                if k > k_block:
                    qs = Q[:, k_block:k]
                    v = v - qs @ (qs.T @ v)
            nv = np.linalg.norm(v)
            if nv < floor:
                dropped.append(j0 + c)
                continue
            Q[:, k] = v / nv
            kept.append(j0 + c)
            k += 1
    return Orthonormalized(Q=Q[:, first:k], kept=kept, dropped=dropped)


@dataclass
class CapacityRecord:
    """Capacity of one orthonormalized basis term."""

    term: BasisTerm
    capacity: float
    truncated: bool = False

    @property
    def classification(self) -> str:
        return "TIV" if self.term.is_time_invariant else "TV"


def capacities(P: np.ndarray, ortho: Orthonormalized,
               terms: Sequence[BasisTerm]) -> List[CapacityRecord]:
    """C_i = ||P^T xi_i||^2 for each retained term; dropped terms get 0."""
    if ortho.Q.shape[0] != P.shape[0]:
        raise ValueError("basis rows and state rows are misaligned")
    caps = np.zeros(len(terms))
    if ortho.kept:
        G = P.T @ ortho.Q            # r x n_kept
        caps[ortho.kept] = np.sum(G * G, axis=0)
    return [CapacityRecord(term=t, capacity=float(c)) for t, c in zip(terms, caps)]


def chi2_threshold(T: int, r: int, p: float = 1e-4, sigma: float = 2.0) -> float:
    """sigma times the top-p quantile of the chi^2(r)/T capacity error model."""
    if T <= 0:
        raise ValueError("T must be positive")
    if r < 1:
        raise ValueError("threshold undefined for rank 0")
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0, 1)")
    return float(sigma * chdtri(r, p) / T)


def shuffle_surrogate_threshold(inputs: np.ndarray, input_offset: int,
                                terms: Sequence[BasisTerm], P: np.ndarray,
                                rng: np.random.Generator,
                                xhat: Optional[np.ndarray] = None,
                                start_row: int = 0,
                                input_range: Tuple[float, float] = (-1.0, 1.0),
                                n_surrogates: int = 200,
                                sigma: float = 1.2) -> float:
    """Threshold from time-shuffled inputs: sigma * max surrogate capacity.

    Each surrogate permutes the input sequence, re-evaluates and
    re-orthonormalizes all bases, and records the largest capacity seen.
    Only terms containing an input factor enter the maximum: a pure
    state-history term is unchanged by the shuffle, so it would place the
    threshold above its own true capacity.
    """
    if n_surrogates < 1:
        raise ValueError("need at least one surrogate")
    inputs = np.asarray(inputs, dtype=float)
    n_rows = P.shape[0]
    eligible = [j for j, t in enumerate(terms) if t.input_order > 0]
    worst = 0.0
    for _ in range(n_surrogates):
        shuffled = inputs[rng.permutation(len(inputs))]
        B = evaluate_bases(terms, shuffled, input_offset, xhat=xhat,
                           start_row=start_row, n_rows=n_rows,
                           input_range=input_range)
        ortho = orthonormalize(B)
        recs = capacities(P, ortho, terms)
        worst = max(worst, max((recs[j].capacity for j in eligible), default=0.0))
    return float(sigma * worst)


@dataclass
class CapacityProfile:
    """Truncated capacity decomposition of one reservoir or target."""

    records: List[CapacityRecord]
    rank: int
    threshold: float
    threshold_params: Dict[str, float] = field(default_factory=dict)
    tiv_by_degree: Dict[int, float] = field(default_factory=dict)
    tv_by_degree: Dict[int, float] = field(default_factory=dict)

    @property
    def c_tot(self) -> float:
        return sum(v for v in self.tiv_by_degree.values()) + \
            sum(v for v in self.tv_by_degree.values())

    @property
    def c_tiv_tot(self) -> float:
        return sum(self.tiv_by_degree.values())

    @property
    def c_tv_tot(self) -> float:
        return sum(self.tv_by_degree.values())

    def degrees(self) -> List[int]:
        return sorted(set(self.tiv_by_degree) | set(self.tv_by_degree))


def profile(records: Sequence[CapacityRecord], threshold: float, rank: int,
            threshold_params: Optional[Dict[str, float]] = None) -> CapacityProfile:
    """Apply threshold truncation and aggregate per input order d.

    A term contributes its capacity when C >= C_th and zero otherwise; the
    per-degree bin is the term's input order N_j, with time-invariant
    (M_j = 0) and time-variant (M_j > 0) terms aggregated separately.
    """
    recs = []
    tiv: Dict[int, float] = {}
    tv: Dict[int, float] = {}
    for rec in records:
        truncated = rec.capacity < threshold
        recs.append(replace(rec, truncated=truncated))
        if truncated:
            continue
        d = rec.term.input_order
        if rec.term.is_time_invariant:
            tiv[d] = tiv.get(d, 0.0) + rec.capacity
        else:
            tv[d] = tv.get(d, 0.0) + rec.capacity
    return CapacityProfile(records=recs, rank=rank, threshold=threshold,
                           threshold_params=dict(threshold_params or {}),
                           tiv_by_degree=tiv, tv_by_degree=tv)


def _empty_profile() -> CapacityProfile:
    return CapacityProfile(records=[], rank=0, threshold=float("nan"))


@dataclass
class TipcSettings:
    """Knobs of the capacity analysis; defaults follow the desk-scale setup."""

    max_degree: int = 3
    max_input_delay: int = 20
    max_state_delay: int = 2
    sv_cutoff: float = 1e-10
    p: float = 1e-4
    sigma: float = 2.0
    family: str = "auto"            # auto | monomial | legendre
    input_range: Tuple[float, float] = (0.0, 1.0)
    input_uniform: bool = True
    threshold_mode: str = "chi2"    # chi2 | surrogate
    n_surrogates: int = 200
    surrogate_sigma: float = 1.2
    term_cap: int = 20000

    def resolved_family(self) -> str:
        if self.family != "auto":
            return self.family
        return "legendre" if self.input_uniform else "monomial"


def analyze_states(states, inputs: np.ndarray, input_offset: int,
                   settings: TipcSettings,
                   surrogate_rng: Optional[np.random.Generator] = None,
                   include_state_history: bool = True) -> CapacityProfile:
    """Full TIPC profile of a state matrix against its input sequence.

    ``input_offset`` positions the states in the input array: state row i
    consumed ``inputs[input_offset + i]``, and earlier entries provide the
    delay history.  With state-history terms enabled, the first
    ``max_state_delay`` rows only serve as history and the capacities are
    measured against the remaining rows, re-orthonormalized.
    """
    X = states.data if isinstance(states, StateMatrix) else np.asarray(states, dtype=float)
    ns = normalize_states(X, settings.sv_cutoff)
    if ns.rank == 0:
        return _empty_profile()
    lx = settings.max_state_delay if include_state_history else 0
    family = settings.resolved_family()
    terms = enumerate_bases(settings.max_degree, settings.max_input_delay,
                            lx, ns.rank, family, settings.term_cap)
    if lx > 0:
        P_eval = _reorthonormalize_rows(ns.P[lx:])
    else:
        P_eval = ns.P
    T_eval = P_eval.shape[0]
    B = evaluate_bases(terms, inputs, input_offset, xhat=ns.P, start_row=lx,
                       n_rows=T_eval, input_range=settings.input_range)
    ortho = orthonormalize(B)
    recs = capacities(P_eval, ortho, terms)
    if settings.threshold_mode == "surrogate":
        if surrogate_rng is None:
            raise ValueError("surrogate threshold needs an rng")
        th = shuffle_surrogate_threshold(
            inputs, input_offset, terms, P_eval, surrogate_rng, xhat=ns.P,
            start_row=lx, input_range=settings.input_range,
            n_surrogates=settings.n_surrogates, sigma=settings.surrogate_sigma)
        params = {"mode": "surrogate", "n_surrogates": settings.n_surrogates,
                  "sigma": settings.surrogate_sigma}
    else:
        th = chi2_threshold(T_eval, ns.rank, settings.p, settings.sigma)
        params = {"mode": "chi2", "p": settings.p, "sigma": settings.sigma}
    return profile(recs, th, ns.rank, params)


def _reorthonormalize_rows(P_rows: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the row-sliced P, recentered; rank is preserved
    for any non-degenerate slice."""
    Pc = P_rows - P_rows.mean(axis=0)
    U, sv, _ = np.linalg.svd(Pc, full_matrices=False)
    r = int(np.sum(sv >= max(1e-10 * sv[0], 1e-12)))
    return U[:, :r]


def ipc_of_target(y: np.ndarray, inputs: np.ndarray, input_offset: int,
                  settings: TipcSettings,
                  surrogate_rng: Optional[np.random.Generator] = None) -> CapacityProfile:
    """Information processing capacity of a scalar target sequence.

    The target is treated as a one-feature state matrix and decomposed on
    input-history bases only, characterizing what the task demands.
    """
    y = np.asarray(y, dtype=float).reshape(-1, 1)
    if np.std(y) == 0:
        raise ValueError("target sequence is constant")
    return analyze_states(y, inputs, input_offset, settings,
                          surrogate_rng=surrogate_rng, include_state_history=False)
