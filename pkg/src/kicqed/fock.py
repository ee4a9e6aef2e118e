"""Two-mode qubit-resonator Hamiltonian in a truncated photon-number basis.

Basis index of the product state |n_R, n_Q> is ``n_R * nQ + n_Q``; energies are
E/h in GHz throughout.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import units
from .circuit import CircuitSpec, ModeDecomposition, circuit_modes, idealized_modes
from .errors import KicqedError, LabelingFailed, TruncationOverflow

CORNERS = ((0, 0), (0, 1), (1, 0), (1, 1))


@dataclass(frozen=True)
class FockConfig:
    nR: int = 15
    nQ: int = 30
    zero_tol: float = 1e-6
    guard_R: int = 5
    guard_Q: int = 10
    max_dim: int = 10000

    def __post_init__(self):
        if self.nR < 2 or self.nQ < 2:
            raise ValueError("need at least two basis states per mode")
        if self.guard_R < 0 or self.guard_Q < 0:
            raise ValueError("guard bands must be non-negative")
        if self.nR * self.nQ > self.max_dim:
            raise TruncationOverflow(f"nR*nQ = {self.nR * self.nQ} exceeds the cap of {self.max_dim}")

    @property
    def dim(self) -> int:
        return self.nR * self.nQ

    @property
    def kept(self) -> tuple[int, int]:
        """Largest (n_R, n_Q) labels kept after the truncation guard bands."""
        return self.nR - 1 - self.guard_R, self.nQ - 1 - self.guard_Q


@dataclass(frozen=True)
class ModeParams:
    """The four numbers the Hamiltonian needs: bare frequencies (GHz) and couplings."""

    f_R: float
    f_Q: float
    lambda_R: float
    lambda_Q: float

    @classmethod
    def of(cls, modes) -> ModeParams:
        return cls(float(modes.f_R), float(modes.f_Q), float(modes.lambda_R), float(modes.lambda_Q))


@lru_cache(maxsize=64)
def _position(n: int) -> tuple[np.ndarray, np.ndarray]:
    off = np.sqrt(np.arange(1, n, dtype=float))
    x = np.diag(off, 1) + np.diag(off, -1)
    vals, vecs = np.linalg.eigh(x)
    vals.setflags(write=False)
    vecs.setflags(write=False)
    return vals, vecs


def position_operator(n: int) -> np.ndarray:
    """a + a^dagger truncated to n states."""
    off = np.sqrt(np.arange(1, n, dtype=float))
    return np.diag(off, 1) + np.diag(off, -1)


def cosine_argument(modes, fluxPhi0: float, cfg: FockConfig) -> np.ndarray:
    """A = lambda_R x_R (x) 1 + 1 (x) lambda_Q x_Q - 2 pi Phi_ext/Phi_0."""
    m = ModeParams.of(modes)
    A = m.lambda_R * np.kron(position_operator(cfg.nR), np.eye(cfg.nQ))
    A += m.lambda_Q * np.kron(np.eye(cfg.nR), position_operator(cfg.nQ))
    A -= 2 * np.pi * fluxPhi0 * np.eye(cfg.dim)
    return A


def _cos_of_argument(m: ModeParams, fluxPhi0: float, nR: int, nQ: int) -> np.ndarray:
    # A is a sum of commuting Kronecker terms, so its eigenbasis is U_R (x) U_Q
    xr, Ur = _position(nR)
    xq, Uq = _position(nQ)
    theta = m.lambda_R * xr[:, None] + m.lambda_Q * xq[None, :] - 2 * np.pi * fluxPhi0
    U = np.kron(Ur, Uq)
    return (U * np.cos(theta).ravel()) @ U.T


def build_hamiltonian(modes, EJ: float, fluxPhi0: float, cfg: FockConfig = FockConfig()) -> np.ndarray:
    """H/h in GHz on the nR*nQ product space.

    The junction cosine is applied exactly on the truncated space through the
    eigendecomposition of its argument.
    """
    if cfg.dim > cfg.max_dim:
        raise TruncationOverflow(f"nR*nQ = {cfg.dim} exceeds the cap of {cfg.max_dim}")
    m = ModeParams.of(modes)
    nr = np.arange(cfg.nR) + 0.5
    nq = np.arange(cfg.nQ) + 0.5
    H = -EJ * _cos_of_argument(m, fluxPhi0, cfg.nR, cfg.nQ)
    H[np.diag_indices_from(H)] += (m.f_R * nr[:, None] + m.f_Q * nq[None, :]).ravel()
    return (H + H.T) / 2


def qubit_hamiltonian(modes, EJ: float, fluxPhi0: float, nQ: int) -> np.ndarray:
    """Single-mode qubit Hamiltonian with the readout coupling switched off."""
    m = ModeParams.of(modes)
    xq, Uq = _position(nQ)
    H = -EJ * (Uq * np.cos(m.lambda_Q * xq - 2 * np.pi * fluxPhi0)) @ Uq.T
    H[np.diag_indices_from(H)] += m.f_Q * (np.arange(nQ) + 0.5)
    return (H + H.T) / 2


def bare_product_basis(modes, EJ: float, fluxPhi0: float, cfg: FockConfig) -> np.ndarray:
    """Columns |n_R> (x) |q_n>, with |q_n> the eigenstates of the uncoupled qubit.

    These reduce to plain Fock product states for EJ = 0. In the fluxon regime the
    qubit eigenstates are far from harmonic-oscillator states, so labeling against
    them is what keeps the n_Q assignment meaningful.
    """
    _, vq = np.linalg.eigh(qubit_hamiltonian(modes, EJ, fluxPhi0, cfg.nQ))
    for j in range(vq.shape[1]):
        if vq[np.argmax(np.abs(vq[:, j])), j] < 0:
            vq[:, j] *= -1
    return np.kron(np.eye(cfg.nR), vq)


@dataclass(frozen=True)
class LabeledSpectrum:
    fluxPhi0: float
    labels: np.ndarray  # (k, 2) integer (n_R, n_Q), ascending energy
    energies: np.ndarray  # GHz
    confidence: np.ndarray  # squared overlap with the assigned bare state
    vectors: np.ndarray  # (dim, k) eigenvectors of the kept levels

    @property
    def ambiguous(self) -> np.ndarray:
        return self.confidence <= 0.5

    def _row(self, nR: int, nQ: int) -> int:
        hit = np.flatnonzero((self.labels[:, 0] == nR) & (self.labels[:, 1] == nQ))
        if len(hit) == 0:
            raise LabelingFailed(f"no level labelled |{nR},{nQ}>")
        return int(hit[0])

    def energy(self, nR: int, nQ: int) -> float:
        return float(self.energies[self._row(nR, nQ)])

    def state(self, nR: int, nQ: int) -> np.ndarray:
        return self.vectors[:, self._row(nR, nQ)]

    def is_ambiguous(self, nR: int, nQ: int) -> bool:
        return bool(self.ambiguous[self._row(nR, nQ)])

    def as_tuples(self) -> list[tuple[int, int, float]]:
        return [(int(a), int(b), float(e)) for (a, b), e in zip(self.labels, self.energies)]


def diagonalize_and_label(
    H: np.ndarray,
    cfg: FockConfig = FockConfig(),
    reference: np.ndarray | None = None,
    fluxPhi0: float = float("nan"),
    strict: bool = True,
) -> LabeledSpectrum:
    """Diagonalize and give every eigenvector an (n_R, n_Q) label.

    Labels come from a greedy assignment on squared overlaps with the columns of
    ``reference`` (bare Fock product states when omitted), largest overlap first,
    each label and each eigenvector used once. Only labels inside the truncation
    guard bands are kept. With ``strict`` the four levels needed for chi must be
    labelled with confidence above 1/2.
    """
    E, V = np.linalg.eigh(H)
    ov = V**2 if reference is None else (reference.T @ V) ** 2
    keepR, keepQ = cfg.kept
    n_keep = max(keepR + 1, 0) * max(keepQ + 1, 0)
    label_of = np.full(len(E), -1)
    # Mutually-best pairs are accepted by the greedy pass whenever it reaches them and
    # block nothing that comes earlier, so they can be assigned up front.
    best_b = np.argmax(ov, axis=0)
    best_k = np.argmax(ov, axis=1)
    mutual = best_k[best_b] == np.arange(ov.shape[1])
    label_of[mutual] = best_b[mutual]
    owned = np.zeros(ov.shape[0], dtype=bool)
    owned[best_b[mutual]] = True
    kept_basis = (np.arange(ov.shape[0]) // cfg.nQ <= keepR) & (np.arange(ov.shape[0]) % cfg.nQ <= keepQ)
    n_keep -= int(np.count_nonzero(owned & kept_basis))
    if n_keep > 0:
        rows_left = np.flatnonzero(~owned)
        cols_left = np.flatnonzero(label_of < 0)
        sub = ov[np.ix_(rows_left, cols_left)]
        for flat in np.argsort(-sub, axis=None, kind="stable"):
            i, j = divmod(int(flat), len(cols_left))
            b, k = rows_left[i], cols_left[j]
            if owned[b] or label_of[k] >= 0:
                continue
            owned[b] = True
            label_of[k] = b
            if kept_basis[b]:
                n_keep -= 1
                if n_keep == 0:
                    break
    rows = []
    for k in range(len(E)):
        b = label_of[k]
        if b < 0:
            continue
        nr, nq = divmod(int(b), cfg.nQ)
        if nr <= keepR and nq <= keepQ:
            rows.append((k, nr, nq, ov[b, k]))
    ks = np.array([r[0] for r in rows], dtype=int)
    spec = LabeledSpectrum(
        fluxPhi0=fluxPhi0,
        labels=np.array([(r[1], r[2]) for r in rows], dtype=int).reshape(-1, 2),
        energies=E[ks],
        confidence=np.array([r[3] for r in rows]),
        vectors=V[:, ks],
    )
    if strict:
        for nr, nq in CORNERS:
            if spec.is_ambiguous(nr, nq):
                raise LabelingFailed(f"level |{nr},{nq}> has overlap {spec.confidence[spec._row(nr, nq)]:.3f}")
    return spec


def _modes_of(spec_or_modes) -> ModeDecomposition:
    if isinstance(spec_or_modes, CircuitSpec):
        return circuit_modes(spec_or_modes)
    return spec_or_modes


def solve(spec_or_modes, EJ: float, fluxPhi0: float, cfg: FockConfig = FockConfig(), strict: bool = True):
    """Build, diagonalize and label with the dressed (uncoupled-qubit) reference basis."""
    modes = _modes_of(spec_or_modes)
    H = build_hamiltonian(modes, EJ, fluxPhi0, cfg)
    ref = bare_product_basis(modes, EJ, fluxPhi0, cfg)
    return diagonalize_and_label(H, cfg, reference=ref, fluxPhi0=fluxPhi0, strict=strict)


@dataclass(frozen=True)
class TransitionRow:
    flux_phi0: float
    fQ01: float
    fQ02: float
    fR0: float
    fR1: float
    chi_MHz: float
    ambiguous: bool
    error: str | None = None

    def values(self) -> np.ndarray:
        return np.array([self.fQ01, self.fQ02, self.fR0, self.fR1, self.chi_MHz])


def fold_flux(fluxPhi0: float) -> float:
    """Representative in [0, 1/2] under Phi_0 periodicity and the mirror Phi -> -Phi.

    The spectrum is invariant under both (the mirror is the parity x -> -x), so
    folding makes sweep tables symmetric to the last bit instead of to roundoff.
    The result is rounded to 1e-12 Phi_0 so that grid points such as 0.3 and 0.7
    land on the same float.
    """
    f = float(fluxPhi0) % 1.0
    return round(min(f, 1.0 - f), 12)


def transitions(modes, EJ: float, fluxPhi0: float, cfg: FockConfig = FockConfig()) -> TransitionRow:
    s = solve(modes, EJ, fold_flux(fluxPhi0), cfg, strict=False)
    E = s.energy
    e00 = E(0, 0)
    fR0 = E(1, 0) - e00
    fR1 = E(1, 1) - E(0, 1)
    amb = any(s.is_ambiguous(*lab) for lab in (*CORNERS, (0, 2)))
    return TransitionRow(
        flux_phi0=float(fluxPhi0),
        fQ01=E(0, 1) - e00,
        fQ02=E(0, 2) - e00,
        fR0=fR0,
        fR1=fR1,
        chi_MHz=(fR1 - fR0) * units.GHz / units.MHz,
        ambiguous=amb,
    )


def dispersive_shift(spec: CircuitSpec, fluxPhi0: float = 0.5, cfg: FockConfig = FockConfig(), modes=None) -> float:
    """chi = (E11 - E01) - (E10 - E00), in MHz, sign kept."""
    s = solve(modes if modes is not None else spec, spec.EJ, fluxPhi0, cfg, strict=True)
    E = s.energy
    return ((E(1, 1) - E(0, 1)) - (E(1, 0) - E(0, 0))) * units.GHz / units.MHz


def flux_sweep(
    spec: CircuitSpec,
    fluxGrid: Iterable[float],
    cfg: FockConfig = FockConfig(),
    threads: int = 1,
    modes=None,
) -> list[TransitionRow]:
    """Transition table per flux point. A failing point yields a NaN row carrying its error."""
    grid = [float(f) for f in fluxGrid]
    if not grid:
        raise ValueError("flux grid is empty")
    if not all(math.isfinite(f) for f in grid):
        raise ValueError("flux grid contains non-finite values")
    modes = modes if modes is not None else circuit_modes(spec)

    def point(f: float) -> TransitionRow:
        try:
            return transitions(modes, spec.EJ, f, cfg)
        except KicqedError as exc:
            nan = float("nan")
            return TransitionRow(f, nan, nan, nan, nan, nan, True, error=str(exc))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(point, grid))
    return [point(f) for f in grid]


def flux_operator(modes, cfg: FockConfig) -> np.ndarray:
    """Junction flux in units of Phi_0: (lambda_Q x_Q + lambda_R x_R) / 2 pi."""
    m = ModeParams.of(modes)
    A = m.lambda_R * np.kron(position_operator(cfg.nR), np.eye(cfg.nQ))
    A += m.lambda_Q * np.kron(np.eye(cfg.nR), position_operator(cfg.nQ))
    return A / (2 * np.pi)


def flux_matrix_element(spec: CircuitSpec, fluxPhi0: float = 0.5, cfg: FockConfig = FockConfig(), modes=None, EJ=None) -> float:
    """|<0,0| phi |0,1>| between the labelled qubit states with an empty resonator."""
    modes = modes if modes is not None else circuit_modes(spec)
    EJ = spec.EJ if EJ is None else EJ
    s = solve(modes, EJ, fluxPhi0, cfg, strict=True)
    return float(abs(s.state(0, 0) @ flux_operator(modes, cfg) @ s.state(0, 1)))


def _thermal_factor(fq_GHz: float, T: float) -> float:
    if T == 0:
        return 2.0
    x = units.h * fq_GHz * units.GHz / (2 * units.kB * T)
    return 1.0 + 1.0 / math.tanh(x)


def inductive_t1(EL: float, Qind: float, matel: float, fq: float, T: float = 0.01) -> float:
    """Inductive-loss T1 in seconds from Fermi's golden rule.

    EL and fq in GHz, ``matel`` = |<0|phi|1>| with phi in units of Phi_0, T in K.
    """
    if EL <= 0 or Qind <= 0 or fq <= 0 or T < 0:
        raise ValueError("EL, Qind, fq must be positive and T non-negative")
    rate = 8 * math.pi**3 * EL * units.GHz / Qind * matel**2 * _thermal_factor(fq, T)
    return 1.0 / rate


def q_ind_from_t1(T1: float, EL: float, matel: float, fq: float, T: float = 0.01) -> float:
    """Inverse of :func:`inductive_t1` for the inductive quality factor."""
    if T1 <= 0 or EL <= 0 or fq <= 0 or T < 0:
        raise ValueError("T1, EL, fq must be positive and T non-negative")
    return 8 * math.pi**3 * EL * units.GHz * matel**2 * _thermal_factor(fq, T) * T1


@dataclass(frozen=True)
class ModelComparison:
    Dk: float
    fR_ext: float
    fR_ideal: float
    fQ_ext: float
    fQ_ideal: float
    chi_ext: float
    chi_ideal: float


def compare_models(
    spec: CircuitSpec, dk_grid: Sequence[float], fluxPhi0: float = 0.5, cfg: FockConfig = FockConfig()
) -> list[ModelComparison]:
    """Dressed f_R, f_Q and chi of the extended and idealized circuits over a Dk sweep."""
    out = []
    for dk in dk_grid:
        s = spec.replace(Dk=float(dk))
        ext = transitions(circuit_modes(s), s.EJ, fluxPhi0, cfg)
        ide = transitions(idealized_modes(s), s.EJ, fluxPhi0, cfg)
        out.append(ModelComparison(float(dk), ext.fR0, ide.fR0, ext.fQ01, ide.fQ01, ext.chi_MHz, ide.chi_MHz))
    return out
