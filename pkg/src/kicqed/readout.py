"""IQ-plane readout statistics: Gaussian-mixture state assignment, populations,
consecutive-measurement correlations, SNR and active-reset fidelity.

States are integer codes: 0 ground, 1 excited, 2 anything above (|2+>).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import (
    InvalidStochasticMatrix,
    LengthMismatch,
    MissingState,
    NoOccupancy,
    SingularComponent,
)

GROUND, EXCITED, OTHER = 0, 1, 2
STATE_NAMES = {GROUND: "g0", EXCITED: "e1", OTHER: "other2plus"}


@dataclass(frozen=True)
class IQSample:
    i: float
    q: float
    t: int = 0


def as_points(samples) -> np.ndarray:
    """(N, 2) float array from an array-like or a sequence of IQSample."""
    if len(samples) and isinstance(samples[0], IQSample):
        X = np.array([(s.i, s.q) for s in samples], dtype=float)
    else:
        X = np.asarray(samples, dtype=float)
    if X.ndim != 2 or X.shape[1] != 2:
        raise ValueError("IQ samples must have shape (N, 2)")
    if not np.all(np.isfinite(X)):
        raise ValueError("IQ samples must be finite")
    return X


@dataclass(frozen=True)
class GmmModel:
    means: np.ndarray  # (K, 2)
    covariances: np.ndarray  # (K, 2, 2)
    weights: np.ndarray  # (K,)
    state_map: tuple[int, ...]  # component -> state code
    log_lik: float = float("nan")  # mean per-sample log-likelihood at the end of training
    history: tuple[float, ...] = field(default=(), repr=False)
    converged: bool = True

    @property
    def K(self) -> int:
        return len(self.weights)

    def component_of(self, state: int) -> int:
        for c, s in enumerate(self.state_map):
            if s == state:
                return c
        raise MissingState(f"no component mapped to state {STATE_NAMES.get(state, state)}")

    def log_joint(self, X: np.ndarray) -> np.ndarray:
        """log(w_k N(x | mu_k, Sigma_k)), shape (N, K)."""
        out = np.empty((len(X), self.K))
        for k in range(self.K):
            L = np.linalg.cholesky(self.covariances[k])
            z = np.linalg.solve(L, (X - self.means[k]).T)
            out[:, k] = (
                np.log(self.weights[k])
                - 0.5 * np.sum(z**2, axis=0)
                - np.log(np.diag(L)).sum()
                - np.log(2 * np.pi)
            )
        return out

    def to_json(self) -> dict:
        return {
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
            "weights": self.weights.tolist(),
            "state_map": [STATE_NAMES[s] for s in self.state_map],
            "log_lik": self.log_lik,
        }


def map_by_weight(weights: np.ndarray) -> tuple[int, ...]:
    order = np.argsort(-np.asarray(weights), kind="stable")
    smap = [OTHER] * len(weights)
    smap[order[0]] = GROUND
    if len(weights) > 1:
        smap[order[1]] = EXCITED
    return tuple(smap)


def _farthest_point_seeds(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    idx = [int(rng.integers(len(X)))]
    d2 = np.sum((X - X[idx[0]]) ** 2, axis=1)
    for _ in range(1, K):
        idx.append(int(np.argmax(d2)))
        d2 = np.minimum(d2, np.sum((X - X[idx[-1]]) ** 2, axis=1))
    return X[idx].copy()


def fit_gmm(samples, K: int = 3, seed: int = 0, max_iters: int = 500, tol: float = 1e-10) -> GmmModel:
    """Expectation-maximization for a K-component 2-D Gaussian mixture.

    Means start at farthest-point seeds (first seed drawn with ``seed``), every
    covariance at the data covariance, weights uniform. Iteration stops when the
    mean per-sample log-likelihood improves by less than ``tol``. Covariances get
    eps*I with eps = 1e-9 times the mean per-axis data variance.
    """
    X = as_points(samples)
    N = len(X)
    if N < 10 * K:
        raise ValueError(f"need at least {10 * K} samples for K={K}")
    var = float(np.mean(np.var(X, axis=0)))
    if var == 0:
        raise SingularComponent("all samples coincide")
    eps = 1e-9 * var
    rng = np.random.default_rng(seed)

    means = _farthest_point_seeds(X, K, rng)
    cov0 = np.cov(X.T) + eps * np.eye(2)
    model = GmmModel(means, np.repeat(cov0[None], K, axis=0), np.full(K, 1 / K), tuple(range(K)))

    history: list[float] = []
    converged = False
    for _ in range(max_iters):
        lj = model.log_joint(X)
        norm = logsumexp(lj, axis=1)
        history.append(float(norm.mean()))
        if len(history) > 1 and history[-1] - history[-2] < tol:
            converged = True
            break
        resp = np.exp(lj - norm[:, None])
        Nk = resp.sum(axis=0)
        if np.any(Nk < 2):
            raise SingularComponent(f"component weight collapsed (effective counts {Nk.round(3)})")
        means = (resp.T @ X) / Nk[:, None]
        covs = np.empty((K, 2, 2))
        for k in range(K):
            d = X - means[k]
            covs[k] = (resp[:, k, None] * d).T @ d / Nk[k] + eps * np.eye(2)
            if np.linalg.eigvalsh(covs[k])[0] <= 10 * eps:
                raise SingularComponent(f"component {k} collapsed below the regularization floor")
        model = GmmModel(means, covs, Nk / N, model.state_map)

    w = model.weights / model.weights.sum()
    return GmmModel(
        model.means, model.covariances, w, map_by_weight(w),
        log_lik=history[-1], history=tuple(history), converged=converged,
    )


def calibrate_state_map(model: GmmModel, ground_refs, excited_refs) -> GmmModel:
    """Fix the component->state map with labelled pointer-state reference samples."""
    def favourite(refs):
        lj = model.log_joint(as_points(refs))
        resp = np.exp(lj - logsumexp(lj, axis=1)[:, None])
        return int(np.argmax(resp.mean(axis=0)))

    g, e = favourite(ground_refs), favourite(excited_refs)
    if g == e:
        raise MissingState("ground and excited references select the same component")
    smap = [OTHER] * model.K
    smap[g], smap[e] = GROUND, EXCITED
    return replace(model, state_map=tuple(smap))


def assign_states(model: GmmModel, samples) -> np.ndarray:
    """Most responsible component per sample (ties go to the lower index), mapped to states."""
    X = as_points(samples)
    comp = np.argmax(model.log_joint(X), axis=1)
    return np.asarray(model.state_map, dtype=np.int8)[comp]


@dataclass
class ReadoutStats:
    populations: dict[int, float]
    P00: float | None
    P11: float | None
    counts: dict[int, int]
    snr: float | None = None

    def to_json(self, model: GmmModel | None = None) -> dict:
        doc = {
            "populations": {STATE_NAMES[k]: v for k, v in self.populations.items()},
            "P00": self.P00,
            "P11": self.P11,
            "snr": self.snr,
            "counts": {STATE_NAMES[k]: v for k, v in self.counts.items()},
        }
        if model is not None:
            doc["model"] = model.to_json()
        return doc


def persistence(seq: np.ndarray, x: int) -> float:
    """P_xx: fraction of adjacent pairs starting in x that stay in x."""
    seq = np.asarray(seq)
    start = seq[:-1] == x
    n = int(start.sum())
    if n == 0:
        raise NoOccupancy(f"state {x} never starts a consecutive pair")
    return float(np.count_nonzero(start & (seq[1:] == x)) / n)


def correlations(seq) -> ReadoutStats:
    """Empirical populations and conditional persistences P00, P11 (None when undefined)."""
    seq = np.asarray(seq)
    if len(seq) < 2:
        raise ValueError("need at least two assignments")
    counts = {s: int(np.count_nonzero(seq == s)) for s in (GROUND, EXCITED, OTHER)}
    pops = {s: c / len(seq) for s, c in counts.items()}

    def maybe(x):
        try:
            return persistence(seq, x)
        except NoOccupancy:
            return None

    return ReadoutStats(pops, maybe(GROUND), maybe(EXCITED), counts)


def snr(model: GmmModel) -> float:
    """|mu0 - mu1| / (sigma0 + sigma1), sigmas projected on the axis joining the means."""
    c0, c1 = model.component_of(GROUND), model.component_of(EXCITED)
    d = model.means[c1] - model.means[c0]
    dist = float(np.linalg.norm(d))
    u = d / dist
    s0 = np.sqrt(u @ model.covariances[c0] @ u)
    s1 = np.sqrt(u @ model.covariances[c1] @ u)
    return dist / float(s0 + s1)


def reset_fidelity(pre, post, target: int) -> float:
    """Fraction of post-reset assignments equal to ``target``."""
    pre, post = np.asarray(pre), np.asarray(post)
    if pre.shape != post.shape:
        raise LengthMismatch(f"{len(pre)} pre vs {len(post)} post assignments")
    if len(post) == 0:
        raise ValueError("no shots")
    return float(np.mean(post == target))


# --- synthetic data ---------------------------------------------------------

def _check_stochastic(P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise InvalidStochasticMatrix("transition matrix must be square")
    if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, rtol=0, atol=1e-12):
        raise InvalidStochasticMatrix("rows must be non-negative and sum to 1")
    return P


def markov_chain(P, n: int, seed=0, initial: int = 0) -> np.ndarray:
    """State sequence of length n, sampled run by run (geometric dwell times)."""
    P = _check_stochastic(P)
    if not 0 <= initial < len(P):
        raise ValueError("initial state outside the transition matrix")
    rng = np.random.default_rng(seed)
    # destination CDF of each row once the state is left
    leave = P * (1 - np.eye(len(P)))
    norm = leave.sum(axis=1, keepdims=True)
    cdf = np.cumsum(np.divide(leave, norm, out=np.zeros_like(leave), where=norm > 0), axis=1)
    log_stay = np.log(np.diag(P), out=np.full(len(P), -np.inf), where=np.diag(P) > 0)

    out = np.empty(n, dtype=np.int8)
    s, pos = int(initial), 0
    batch = np.empty((0, 2))
    k = 0
    while pos < n:
        if k == len(batch):
            batch, k = rng.random((4096, 2)), 0
        u_run, u_dest = batch[k]
        k += 1
        if log_stay[s] == 0.0:
            run = n - pos
        elif log_stay[s] == -np.inf:
            run = 1
        else:
            run = int(math.ceil(math.log1p(-u_run) / log_stay[s])) or 1
        out[pos : pos + run] = s
        pos += run
        if pos < n:
            s = int(min(np.searchsorted(cdf[s], u_dest, side="right"), len(P) - 1))
    return out


def emit(emission: GmmModel, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Gaussian IQ sample per state from the component mapped to that state."""
    states = np.asarray(states)
    X = np.empty((len(states), 2))
    z = rng.standard_normal((len(states), 2))
    for s in np.unique(states):
        c = emission.component_of(int(s))
        L = np.linalg.cholesky(emission.covariances[c])
        m = states == s
        X[m] = emission.means[c] + z[m] @ L.T
    return X


def synth_trace(markov, emission: GmmModel, n: int, seed: int = 0, initial: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """(true state sequence, IQ samples); deterministic for a given seed."""
    ss = np.random.SeedSequence(seed)
    chain_seed, emit_seed = ss.spawn(2)
    truth = markov_chain(markov, n, seed=chain_seed, initial=initial)
    return truth, emit(emission, truth, np.random.default_rng(emit_seed))


def pointer_model(means: Sequence[Sequence[float]], sigma: float | Sequence[float], weights=None) -> GmmModel:
    """Isotropic emission model; component k is state k (clipped to 2)."""
    means = np.asarray(means, dtype=float)
    K = len(means)
    sig = np.broadcast_to(np.asarray(sigma, dtype=float), (K,))
    covs = np.array([s**2 * np.eye(2) for s in sig])
    w = np.full(K, 1 / K) if weights is None else np.asarray(weights, dtype=float) / np.sum(weights)
    return GmmModel(means, covs, w, tuple(min(k, OTHER) for k in range(K)))


def simulate_active_reset(
    emission: GmmModel, p_thermal: float, p_decay: float, target: int, shots: int, seed: int = 0,
    classifier: GmmModel | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Measure, flip conditionally toward ``target``, measure again.

    An excited qubit relaxes with probability ``p_decay`` during each readout: after
    the first pulse has been recorded, and before the second is.
    """
    rng = np.random.default_rng(seed)
    clf = classifier or emission
    s0 = (rng.random(shots) < p_thermal).astype(np.int8)
    m1 = assign_states(clf, emit(emission, s0, rng))
    s1 = np.where((s0 == 1) & (rng.random(shots) < p_decay), 0, s0)
    flip = (m1 != target) & (m1 <= EXCITED)
    s2 = np.where(flip, 1 - s1, s1).astype(np.int8)
    seen = np.where((s2 == 1) & (rng.random(shots) < p_decay), 0, s2).astype(np.int8)
    m2 = assign_states(clf, emit(emission, seen, rng))
    return m1, m2


# --- files ------------------------------------------------------------------

def read_trace_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Columns t_index, I, Q -> (t, (N, 2) samples)."""
    with open(path, newline="") as fh:
        header = next(csv.reader(fh))
    cols = {name.strip(): k for k, name in enumerate(header)}
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    t = data[:, cols["t_index"]].astype(int)
    X = data[:, [cols["I"], cols["Q"]]]
    order = np.argsort(t, kind="stable")
    return t[order], X[order]


def write_trace_csv(path: str | Path, samples: np.ndarray) -> None:
    X = as_points(samples)
    with open(path, "w", newline="") as fh:
        fh.write("t_index,I,Q\n")
        for k, (i, q) in enumerate(X):
            fh.write(f"{k},{float(i)!r},{float(q)!r}\n")


def iq_histogram(samples, bins: int = 100) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    X = as_points(samples)
    return np.histogram2d(X[:, 0], X[:, 1], bins=bins)


def analyze_trace(samples, K: int = 3, seed: int = 0) -> tuple[ReadoutStats, GmmModel]:
    model = fit_gmm(samples, K=K, seed=seed)
    stats = correlations(assign_states(model, samples))
    stats.snr = snr(model)
    return stats, model


def write_stats_json(path: str | Path, stats: ReadoutStats, model: GmmModel | None = None) -> None:
    Path(path).write_text(json.dumps(stats.to_json(model), indent=2) + "\n")
