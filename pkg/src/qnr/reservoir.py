"""Input-driven reservoir dynamics and the regression harness around them.

``run_qnr`` evolves a noisy qubit register under the pairwise input circuit
and records Pauli-Z expectations; ``run_esn`` is the classical echo state
network baseline.  Both return a ``StateMatrix`` whose row t is the state
after consuming input u_t.  The rest of the module covers spatial
multiplexing, the NARMA2 benchmark target, least-squares readout training,
NRMSE scoring, and the echo-state-property probe.

When the compiled noise contains no gates that couple different 2-qubit
blocks, the register factorizes exactly into independent pairs and the
simulation runs on 4x4 pair states; otherwise the full 2**n-dimensional
state is evolved.  Both paths implement the same map and are cross-checked
in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import qsim
from .noise import NoiseSpec, compile_noise, CNOT_BIAS, OVER_ROTATION_RX, OVER_ROTATION_RZ
from .rng import stream

_FULL_SUPEROP_MAX_QUBITS = 5  # beyond this the superoperator no longer fits


@dataclass
class QnrConfig:
    """Quantum reservoir instance: topology, input scaling, noise, seed, split."""

    n_qubits: int = 4
    input_scaling: float = math.pi
    noise: List[NoiseSpec] = field(default_factory=list)
    seed: int = 0
    washout: int = 0
    train_len: int = 0
    eval_len: int = 0

    def __post_init__(self):
        if self.n_qubits % 2 != 0:
            raise ValueError("n_qubits must be even")
        if not 2 <= self.n_qubits <= qsim.MAX_QUBITS:
            raise ValueError(f"n_qubits must be in [2, {qsim.MAX_QUBITS}]")
        if min(self.washout, self.train_len, self.eval_len) < 0:
            raise ValueError("split lengths must be non-negative")


@dataclass
class EsnConfig:
    """Echo state network baseline parameters (uniform [0,1] weight draws)."""

    n_nodes: int = 50
    spectral_radius: float = 0.6
    input_scaling: float = 0.1
    internal_prob: float = 0.5
    input_prob: float = 0.1
    seed: int = 0
    washout: int = 0
    train_len: int = 0
    eval_len: int = 0


@dataclass
class StateMatrix:
    """T x N matrix of reservoir readouts, time-ordered rows."""

    data: np.ndarray
    provenance: str = "simulated"

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2:
            raise ValueError("state matrix must be 2-D")
        if not np.isfinite(self.data).all():
            raise ValueError("state matrix contains NaN or Inf")
        if self.provenance not in ("simulated", "ingested"):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    @property
    def n_steps(self) -> int:
        return self.data.shape[0]

    @property
    def n_features(self) -> int:
        return self.data.shape[1]


# ---------------------------------------------------------------------------
# QNR simulation
# ---------------------------------------------------------------------------

def _kraus_superop(kraus, embed_left: bool) -> np.ndarray:
    """16x16 superoperator of a single-qubit channel on one qubit of a pair."""
    out = np.zeros((16, 16), dtype=complex)
    for K in kraus:
        Kf = np.kron(K, qsim.I2) if embed_left else np.kron(qsim.I2, K)
        out += np.kron(Kf, Kf.conj())
    return out


def _pair_deco_superop(compiled, i: int, j: int) -> Optional[np.ndarray]:
    """Composed decoherence superoperator for pair (i, j); None if identity."""
    L = None
    for _, kraus, targets in compiled.decoherence:
        for q, left in ((i, True), (j, False)):
            if q in targets:
                Lq = _kraus_superop(kraus, left)
                L = Lq if L is None else Lq @ L
    return L


def _pair_step_matrix(theta_xi, theta_xj, theta_z, cx) -> np.ndarray:
    """4x4 block: RX_i, RX_j, CX, RZ_j, CX in chronological order."""
    B = np.kron(qsim.rx_matrix(theta_xi), qsim.rx_matrix(theta_xj))
    B = cx @ B
    B = np.kron(qsim.I2, qsim.rz_matrix(theta_z)) @ B
    return cx @ B


_Z_PAIR_FIRST = np.array([1.0, 1.0, -1.0, -1.0])
_Z_PAIR_SECOND = np.array([1.0, -1.0, 1.0, -1.0])


def _run_pairs(config: QnrConfig, compiled, inputs: np.ndarray) -> np.ndarray:
    """Exact factorized evolution when no cross-pair gates are present."""
    n = config.n_qubits
    s = config.input_scaling
    eps = compiled.sampled_epsilons
    sx = 1.0 + eps.get(OVER_ROTATION_RX, np.zeros(n))
    sz = 1.0 + eps.get(OVER_ROTATION_RZ, np.zeros(n))
    out = np.empty((len(inputs), n))
    for i in range(0, n, 2):
        j = i + 1
        if CNOT_BIAS in eps:
            cx = qsim.crx_block(np.pi * (1.0 + eps[CNOT_BIAS][j]))
        else:
            cx = qsim.CNOT_MATRIX
        L = _pair_deco_superop(compiled, i, j)
        rho = np.full((4, 4), 0.25, dtype=complex)
        for t, u in enumerate(inputs):
            B = _pair_step_matrix(s * u * sx[i], s * u * sx[j], s * u * sz[j], cx)
            rho = B @ rho @ B.conj().T
            if L is not None:
                rho = (L @ rho.reshape(-1)).reshape(4, 4)
            diag = np.real(np.diagonal(rho))
            out[t, i] = _Z_PAIR_FIRST @ diag
            out[t, j] = _Z_PAIR_SECOND @ diag
    return out


def _run_full(config: QnrConfig, compiled, inputs: np.ndarray,
              initial: Optional[np.ndarray] = None) -> np.ndarray:
    """Full-register evolution; needed once entangler gates couple the pairs."""
    n = config.n_qubits
    dim = 2**n
    s = config.input_scaling
    eps = compiled.sampled_epsilons
    sx = 1.0 + eps.get(OVER_ROTATION_RX, np.zeros(n))
    sz = 1.0 + eps.get(OVER_ROTATION_RZ, np.zeros(n))
    cx_blocks = {}
    for i in range(0, n, 2):
        if CNOT_BIAS in eps:
            cx_blocks[i] = qsim.crx_block(np.pi * (1.0 + eps[CNOT_BIAS][i + 1]))
        else:
            cx_blocks[i] = qsim.CNOT_MATRIX
    ent = qsim.compile_unitary(compiled.entanglers, n) if compiled.entanglers else None

    deco_superop = None
    if compiled.decoherence and n <= _FULL_SUPEROP_MAX_QUBITS:
        deco_superop = np.eye(dim * dim, dtype=complex)
        for _, kraus, targets in compiled.decoherence:
            for q in targets:
                Lq = np.zeros((dim * dim, dim * dim), dtype=complex)
                for K in kraus:
                    Kf = np.eye(1, dtype=complex)
                    for qq in range(n):
                        Kf = np.kron(Kf, K if qq == q else qsim.I2)
                    Lq += np.kron(Kf, Kf.conj())
                deco_superop = Lq @ deco_superop

    rho = qsim.prepare_plus_state(n) if initial is None else initial.copy()
    out = np.empty((len(inputs), n))
    for t, u in enumerate(inputs):
        U = None
        for i in range(0, n, 2):
            j = i + 1
            B = _pair_step_matrix(s * u * sx[i], s * u * sx[j], s * u * sz[j], cx_blocks[i])
            U = B if U is None else np.kron(U, B)
        if ent is not None:
            U = ent @ U
        rho = U @ rho @ U.conj().T
        if deco_superop is not None:
            rho = (deco_superop @ rho.reshape(-1)).reshape(dim, dim)
        elif compiled.decoherence:
            for _, kraus, targets in compiled.decoherence:
                for q in targets:
                    rho = qsim.apply_kraus(rho, kraus, [q])
        out[t] = qsim.expect_all_z(rho)
    return out


def run_qnr(config: QnrConfig, inputs: Sequence[float],
            initial: Optional[np.ndarray] = None) -> StateMatrix:
    """Evolve the noisy reservoir over the input sequence.

    Row t of the result holds the Z expectation of every qubit after the
    perturbed circuit for u_t and the decoherence channels have acted.  The
    run is a pure function of (config, inputs, initial state).
    """
    inputs = np.asarray(inputs, dtype=float)
    if not np.isfinite(inputs).all():
        raise ValueError("inputs must be finite")
    compiled = compile_noise(config.noise, config.n_qubits, config.seed)
    if compiled.has_cross_pair_gates or initial is not None:
        # a caller-supplied state need not factorize across pairs
        data = _run_full(config, compiled, inputs, initial)
    else:
        data = _run_pairs(config, compiled, inputs)
    return StateMatrix(data=data, provenance="simulated")


# ---------------------------------------------------------------------------
# ESN baseline
# ---------------------------------------------------------------------------

def esn_weights(config: EsnConfig):
    """Scaled internal and input weight draws for one ESN configuration.

    Both weight kinds are uniform [0, 1] masked by their connection
    probabilities; the internal matrix is normalized by its largest absolute
    eigenvalue before scaling by the spectral radius.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(config.seed))))
    N = config.n_nodes
    W = rng.uniform(0.0, 1.0, size=(N, N)) * (rng.uniform(size=(N, N)) < config.internal_prob)
    top = np.abs(np.linalg.eigvals(W)).max()
    if top > 0:
        W = W / top
    w_in = rng.uniform(0.0, 1.0, size=N) * (rng.uniform(size=N) < config.input_prob)
    return config.spectral_radius * W, config.input_scaling * w_in


def run_esn(config: EsnConfig, inputs: Sequence[float]) -> StateMatrix:
    """Echo state network: x_t = tanh(rho W x_{t-1} + iota w_in u_t)."""
    inputs = np.asarray(inputs, dtype=float)
    W, w_in = esn_weights(config)
    x = np.zeros(config.n_nodes)
    out = np.empty((len(inputs), config.n_nodes))
    for t, u in enumerate(inputs):
        x = np.tanh(W @ x + w_in * u)
        out[t] = x
    return StateMatrix(data=out, provenance="simulated")


# ---------------------------------------------------------------------------
# Harness: multiplexing, benchmark target, readout, scoring
# ---------------------------------------------------------------------------

def spatial_multiplex(matrices: Sequence[StateMatrix]) -> StateMatrix:
    """Concatenate reservoir features horizontally; all inputs share time."""
    if not matrices:
        raise ValueError("no state matrices to multiplex")
    steps = {m.n_steps for m in matrices}
    if len(steps) != 1:
        raise ValueError(f"time length mismatch across reservoirs: {sorted(steps)}")
    data = np.hstack([m.data for m in matrices])
    prov = "simulated" if all(m.provenance == "simulated" for m in matrices) else "ingested"
    return StateMatrix(data=data, provenance=prov)


def narma2(inputs: Sequence[float]) -> np.ndarray:
    """Second-order NARMA target:
    y_t = 0.4 y_{t-1} + 0.4 y_{t-1} y_{t-2} + 0.6 (0.3 u_t)^3 + 0.1,
    seeded with y_{-1} = y_{-2} = 0."""
    u = np.asarray(inputs, dtype=float)
    if u.size and (u.min() < 0.0 or u.max() > 1.0):
        raise ValueError("narma2 inputs must lie in [0, 1]")
    y = np.empty(len(u))
    y1 = y2 = 0.0
    for t in range(len(u)):
        ynew = 0.4 * y1 + 0.4 * y1 * y2 + 0.6 * (0.3 * u[t]) ** 3 + 0.1
        y[t] = ynew
        y2, y1 = y1, ynew
    return y


@dataclass
class Readout:
    """Trained linear readout with fit diagnostics."""

    weights: np.ndarray
    has_bias: bool
    residual_norm: float
    rank: int
    condition: float
    degenerate: bool = False

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.has_bias:
            return X @ self.weights[:-1] + self.weights[-1]
        return X @ self.weights


def fit_readout(X: np.ndarray, y: Sequence[float], train_range: slice,
                add_bias: bool = True, sv_cutoff: float = 1e-10) -> Readout:
    """Minimum-norm least squares over the training rows.

    Solved through the SVD pseudo-inverse with a relative singular-value
    cutoff, so rank-deficient state matrices get the minimum-norm solution.
    An all-zero feature block is flagged as degenerate (bias, if enabled,
    still absorbs the target mean).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X and y must have matching time length")
    Xtr = X[train_range]
    ytr = y[train_range]
    degenerate = not np.any(Xtr)
    if add_bias:
        Xtr = np.hstack([Xtr, np.ones((Xtr.shape[0], 1))])
    w, res, rank, sv = np.linalg.lstsq(Xtr, ytr, rcond=sv_cutoff)
    resid = float(np.linalg.norm(Xtr @ w - ytr))
    kept = sv[sv > sv_cutoff * sv[0]] if sv.size else sv
    cond = float(kept[0] / kept[-1]) if kept.size else np.inf
    return Readout(weights=w, has_bias=add_bias, residual_norm=resid,
                   rank=int(rank), condition=cond, degenerate=degenerate)


def nrmse(y: Sequence[float], yhat: Sequence[float],
          eval_range: Optional[slice] = None) -> float:
    """Root mean square error over the range, normalized by std(y) there."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if eval_range is not None:
        y = y[eval_range]
        yhat = yhat[eval_range]
    sigma = np.std(y)
    if sigma == 0:
        raise ValueError("target has zero variance over the evaluation range")
    return float(np.sqrt(np.mean((y - yhat) ** 2)) / sigma)


def benchmark_masks(count: int) -> List[int]:
    """First `count` noise masks, ascending, that include amplitude damping
    (bit 0); damping is the only kind that induces time-invariant capacity."""
    masks = [m for m in range(1, 1024) if m & 1]
    if count > len(masks):
        raise ValueError(f"at most {len(masks)} damping masks exist")
    return masks[:count]


# ---------------------------------------------------------------------------
# Echo state property probe
# ---------------------------------------------------------------------------

@dataclass
class EspProbe:
    """Decay of state differences across random initial conditions."""

    deltas: np.ndarray          # mean 2-norm difference per step, t = 0..T
    slope: float                # least-squares slope of log(delta) vs t
    fit_points: int             # samples used for the fit (pre-floor segment)
    floor: float


def esp_probe(config: QnrConfig, inputs: Sequence[float], n_trials: int,
              initial_states: Optional[List[np.ndarray]] = None,
              floor: float = 1e-13) -> EspProbe:
    """Drive n_trials copies of the reservoir from random initial states.

    Returns the averaged state difference against the first trajectory,
    delta_t = mean_m ||x_t^(m) - x_t^(1)||_2, plus the fitted log-decay
    slope per step.  The fit stops where the curve hits the numerical floor.
    """
    if n_trials < 2:
        raise ValueError("esp_probe needs at least 2 trials")
    inputs = np.asarray(inputs, dtype=float)
    if initial_states is None:
        initial_states = [
            qsim.haar_product_state(config.n_qubits, stream(config.seed, "esp", "init", m))
            for m in range(n_trials)
        ]
    if len(initial_states) != n_trials:
        raise ValueError("need one initial state per trial")
    trajs = []
    for rho0 in initial_states:
        sm = run_qnr(config, inputs, initial=rho0)
        x0 = qsim.expect_all_z(rho0)
        trajs.append(np.vstack([x0, sm.data]))
    base = trajs[0]
    deltas = np.mean(
        [np.linalg.norm(tr - base, axis=1) for tr in trajs[1:]], axis=0
    )
    good = deltas > floor
    # fit on the initial contiguous pre-floor segment
    stop = int(np.argmin(good)) if not good.all() else len(deltas)
    tgrid = np.arange(stop)
    if stop >= 2 and deltas[:stop].min() > 0:
        slope = float(np.polyfit(tgrid, np.log(deltas[:stop]), 1)[0])
    else:
        slope = float("nan")
    return EspProbe(deltas=deltas, slope=slope, fit_points=stop, floor=floor)
