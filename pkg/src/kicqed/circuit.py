"""Linearized four-island circuit: capacitance and inverse-inductance matrices,
normal modes, junction coupling coefficients and the idealized two-node reduction.

Node labels: 1 and 2 are the junction electrodes, 3 the readout island, 4 the
center island joining the three kinetic inductors, 0 the sample-holder ground.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

import numpy as np

from . import units
from .errors import (
    AsymmetricGround,
    BranchNonPositive,
    DegenerateSorting,
    IncompleteCapacitanceTable,
    InvalidCircuit,
    MissingPair,
    NonPositiveDefinite,
    ZeroModeAmbiguous,
)

NODES = (1, 2, 3, 4)
PAIRS = ((1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4))
ZERO_MODE_TOL = 1e-6
CONSISTENCY_TOL_FF = 1e-6


def _key(i: int, j: int) -> str:
    if j != 0 and j < i:
        i, j = j, i
    return f"C{i}{j}"


def _normalize_caps(raw: Mapping[str, float], diagonal_is_total: bool) -> dict[str, float]:
    table: dict[str, float] = {}
    for k, v in raw.items():
        if len(k) != 3 or k[0] != "C" or not k[1:].isdigit():
            raise InvalidCircuit(f"unrecognized capacitance key {k!r}")
        i, j = int(k[1]), int(k[2])
        if i not in NODES or j not in (0, *NODES):
            raise InvalidCircuit(f"capacitance key {k!r} refers to an unknown node")
        kk = _key(i, j) if j != 0 else k
        v = float(v)
        if not np.isfinite(v) or v < 0:
            raise InvalidCircuit(f"{k} must be finite and >= 0, got {v}")
        if kk in table and abs(table[kk] - v) > CONSISTENCY_TOL_FF:
            raise InvalidCircuit(f"{k} given twice with different values")
        table[kk] = v

    caps: dict[str, float] = {}
    missing = [_key(i, j) for i, j in PAIRS if _key(i, j) not in table]
    if missing:
        warnings.warn(f"capacitance pairs {missing} absent; using 0 fF", IncompleteCapacitanceTable)
    for i, j in PAIRS:
        caps[_key(i, j)] = table.get(_key(i, j), 0.0)

    for i in NODES:
        coupling = sum(caps[_key(i, j)] for j in NODES if j != i)
        diag, ground = table.get(f"C{i}{i}"), table.get(f"C{i}0")
        if diagonal_is_total:
            if diag is not None:
                derived = diag - coupling
                if ground is not None and abs(ground - derived) > CONSISTENCY_TOL_FF:
                    warnings.warn(
                        f"C{i}0={ground} inconsistent with C{i}{i}={diag}; diagonal wins",
                        IncompleteCapacitanceTable,
                    )
                ground = derived
        else:
            # the listed diagonal is read as the bare ground capacitance
            ground = diag if diag is not None else ground
        if ground is None:
            if i != 4:
                raise MissingPair(f"ground capacitance of node {i} (C{i}0 or C{i}{i}) is required")
            warnings.warn("C40 absent; using 0 fF", IncompleteCapacitanceTable)
            ground = 0.0
        if ground < -CONSISTENCY_TOL_FF:
            raise InvalidCircuit(f"derived ground capacitance C{i}0 = {ground:.4f} fF is negative")
        caps[f"C{i}0"] = max(ground, 0.0)
        caps[f"C{i}{i}"] = caps[f"C{i}0"] + coupling
    return caps


@dataclass(frozen=True)
class CircuitSpec:
    """Lumped-element device description in boundary units (nH, fF, GHz).

    ``caps`` holds the pairwise capacitances ``C12 .. C34``, the ground terms
    ``C10 .. C40`` and the total diagonals ``C11 .. C44``; the junction
    capacitance ``CJ`` is kept separate and only enters the matrix between nodes 1
    and 2. With ``diagonal_is_total`` (default) a listed ``Cii`` already contains
    every counterparty including ground; otherwise it is taken as the ground term
    and the diagonal is augmented by the pairwise couplings.
    """

    name: str
    Lr: float
    Lq: float
    Dk: float
    EJ: float
    CJ: float
    caps: Mapping[str, float]
    diagonal_is_total: bool = True

    def __post_init__(self):
        if not self.Lq > 0 or not self.Lr > 0:
            raise InvalidCircuit("Lq and Lr must be positive")
        if self.Lq / 2 - abs(self.Dk) <= 0:
            raise BranchNonPositive(f"|Dk|={abs(self.Dk)} nH leaves a non-positive branch (Lq/2={self.Lq / 2})")
        if not self.EJ > 0 or not self.CJ > 0:
            raise InvalidCircuit("EJ and CJ must be positive")
        caps = _normalize_caps(self.caps, self.diagonal_is_total)
        object.__setattr__(self, "caps", MappingProxyType(caps))

    def cap(self, i: int, j: int) -> float:
        """Capacitance between nodes i and j in fF; j = 0 is ground, i == j the diagonal."""
        return self.caps[_key(i, j) if j != 0 else f"C{i}0"]

    def replace(self, **changes) -> CircuitSpec:
        return replace(self, **changes)

    def _with_pairs(self, **pairs: float) -> CircuitSpec:
        # rebuild keeping ground capacitances fixed
        caps = {_key(i, j): self.cap(i, j) for i, j in PAIRS}
        caps.update(pairs)
        caps.update({f"C{i}0": self.cap(i, 0) for i in NODES})
        return replace(self, caps=caps, diagonal_is_total=True)

    def symmetrized(self) -> CircuitSpec:
        """Average every 1<->2 mirror pair, giving a node-permutation-symmetric table."""
        m = lambda a, b: (a + b) / 2  # noqa: E731
        g = m(self.cap(1, 0), self.cap(2, 0))
        caps = {_key(i, j): self.cap(i, j) for i, j in PAIRS}
        caps["C13"] = caps["C23"] = m(self.cap(1, 3), self.cap(2, 3))
        caps["C14"] = caps["C24"] = m(self.cap(1, 4), self.cap(2, 4))
        caps.update(C10=g, C20=g, C30=self.cap(3, 0), C40=self.cap(4, 0))
        return replace(self, caps=caps, diagonal_is_total=True)

    def with_delta_c(self, delta_aF: float) -> CircuitSpec:
        """Shift C13 up and C23 down by ``delta_aF``, i.e. add ``delta_aF`` to Delta_C."""
        d = delta_aF * units.aF / units.fF
        c13, c23 = self.cap(1, 3) + d, self.cap(2, 3) - d
        if c13 < 0 or c23 < 0:
            raise InvalidCircuit("Delta_C perturbation drives a capacitance negative")
        return self._with_pairs(C13=c13, C23=c23)

    def without_node4(self, c44: float = 0.01) -> CircuitSpec:
        """Drop all couplings to the center island, leaving it a tiny ground capacitance."""
        caps = {_key(i, j): self.cap(i, j) for i, j in PAIRS}
        caps.update(C14=0.0, C24=0.0, C34=0.0)
        caps.update({f"C{i}0": self.cap(i, 0) for i in (1, 2, 3)}, C40=c44)
        return replace(self, caps=caps, diagonal_is_total=True)


# --- device files -----------------------------------------------------------

_JSON_CAP_KEYS = (
    "C11", "C22", "C33", "C44", "C12", "C13", "C14", "C23", "C24", "C34", "C10", "C20", "C30", "C40",
)


def spec_from_json(doc: Mapping, diagonal_is_total: bool = True) -> CircuitSpec:
    try:
        return CircuitSpec(
            name=str(doc.get("name", "")),
            Lr=float(doc["L_r_nH"]),
            Lq=float(doc["L_q_nH"]),
            Dk=float(doc["Delta_k_nH"]),
            EJ=float(doc["E_J_GHz"]),
            CJ=float(doc["C_J_fF"]),
            caps=dict(doc["capacitances_fF"]),
            diagonal_is_total=diagonal_is_total,
        )
    except KeyError as exc:
        raise InvalidCircuit(f"device document lacks field {exc.args[0]!r}") from None


def spec_to_json(spec: CircuitSpec) -> dict:
    return {
        "name": spec.name,
        "L_r_nH": spec.Lr,
        "L_q_nH": spec.Lq,
        "Delta_k_nH": spec.Dk,
        "E_J_GHz": spec.EJ,
        "C_J_fF": spec.CJ,
        "capacitances_fF": {k: round(spec.caps[k], 10) for k in _JSON_CAP_KEYS},
    }


def shipped_devices() -> list[str]:
    root = resources.files("kicqed") / "data" / "devices"
    names = [p.name[:-5] for p in root.iterdir() if p.name.endswith(".json")]
    return sorted(names, key=lambda n: (len(n), n))


def load_device(path_or_name: str | Path, diagonal_is_total: bool = True) -> CircuitSpec:
    """Load a device JSON file, or a shipped device by name (``"q7"`` or ``"q7.json"``)."""
    p = Path(path_or_name)
    if not p.exists() and p.parent == Path(".") and p.stem in shipped_devices():
        text = (resources.files("kicqed") / "data" / "devices" / f"{p.stem}.json").read_text()
    else:
        text = p.read_text()
    return spec_from_json(json.loads(text), diagonal_is_total=diagonal_is_total)


# --- matrices ---------------------------------------------------------------

def assemble_capacitance_matrix(spec: CircuitSpec) -> np.ndarray:
    """4x4 capacitance matrix in F, junction capacitance added between nodes 1 and 2."""
    C = np.empty((4, 4))
    for a, i in enumerate(NODES):
        for b, j in enumerate(NODES):
            C[a, b] = spec.cap(i, i) if i == j else -spec.cap(i, j)
    C[0, 0] += spec.CJ
    C[1, 1] += spec.CJ
    C[0, 1] -= spec.CJ
    C[1, 0] -= spec.CJ
    C *= units.fF
    try:
        np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        raise NonPositiveDefinite(f"capacitance matrix of {spec.name!r} is not positive definite") from None
    return C


def assemble_inverse_inductance_matrix(spec: CircuitSpec) -> np.ndarray:
    """4x4 inverse inductance matrix in 1/H. Branch 1-4 carries Lq/2 + Dk, branch 2-4 Lq/2 - Dk."""
    l1, l2 = spec.Lq / 2 + spec.Dk, spec.Lq / 2 - spec.Dk
    if l1 <= 0 or l2 <= 0:
        raise BranchNonPositive("both qubit branch inductances must be positive")
    g1, g2, g3 = 1 / l1, 1 / l2, 1 / spec.Lr
    Linv = np.array(
        [
            [g1, 0, 0, -g1],
            [0, g2, 0, -g2],
            [0, 0, g3, -g3],
            [-g1, -g2, -g3, g1 + g2 + g3],
        ]
    )
    return Linv / units.nH


def capacitive_asymmetry(spec: CircuitSpec) -> float:
    """Delta_C = (C13 - C23)/2 in aF."""
    return (spec.cap(1, 3) - spec.cap(2, 3)) / 2 * units.fF / units.aF


# --- normal modes -----------------------------------------------------------

def inverse_sqrtm(C: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(C)
    if w.min() <= 0:
        raise NonPositiveDefinite("matrix is not positive definite")
    return (V / np.sqrt(w)) @ V.T


@dataclass(frozen=True)
class ModeDecomposition:
    omegas: np.ndarray  # rad/s, ascending
    S: np.ndarray
    Sprime: np.ndarray
    qubit_index: int
    readout_index: int
    zero_index: int | None
    lambda_R: float
    lambda_Q: float
    delta_C_aF: float | None = None
    dynamical: np.ndarray = field(repr=False, default=None)

    @property
    def omega_R(self) -> float:
        return float(self.omegas[self.readout_index])

    @property
    def omega_Q(self) -> float:
        return float(self.omegas[self.qubit_index])

    @property
    def f_R(self) -> float:
        """Bare readout mode frequency in GHz."""
        return self.omega_R / (2 * np.pi * units.GHz)

    @property
    def f_Q(self) -> float:
        return self.omega_Q / (2 * np.pi * units.GHz)

    @property
    def spectator_indices(self) -> list[int]:
        """Modes that are neither zero, qubit nor readout (the island-4 mode); unused downstream."""
        used = {self.qubit_index, self.readout_index, self.zero_index}
        return [j for j in range(len(self.omegas)) if j not in used]


def _coupling(Sprime: np.ndarray, omega: float, j: int) -> float:
    return 2 * np.pi / units.Phi0 * np.sqrt(units.hbar / (2 * omega)) * (Sprime[1, j] - Sprime[0, j])


def decompose_modes(
    C: np.ndarray,
    Linv: np.ndarray,
    delta_C_aF: float | None = None,
    zero_tol: float = ZERO_MODE_TOL,
) -> ModeDecomposition:
    """Normal modes of C^{-1/2} Linv C^{-1/2} and the junction couplings lambda_R, lambda_Q.

    Works for any node count >= 2 as long as rows 0 and 1 are the junction nodes.
    Column signs are fixed so that lambda_Q > 0 and the readout mode charges the
    junction electrodes with positive common amplitude; with that gauge lambda_R
    changes sign under the 1<->2 node exchange.
    """
    Cm = inverse_sqrtm(C)
    D = Cm @ Linv @ Cm
    D = (D + D.T) / 2
    w2, S = np.linalg.eigh(D)
    wmax = max(abs(w2).max(), np.finfo(float).tiny)
    is_zero = w2 < zero_tol * wmax
    zeros = np.flatnonzero(is_zero)
    if len(zeros) > 1:
        raise ZeroModeAmbiguous(f"{len(zeros)} eigenvalues below the zero-mode tolerance")
    active = np.flatnonzero(~is_zero)
    if len(active) < 2:
        raise DegenerateSorting("fewer than two oscillating modes")

    diff = np.abs(S[1, active] - S[0, active])
    common = np.abs(S[1, active] + S[0, active])
    q = int(active[np.argmax(diff)])
    if int(active[np.argmax(common)]) == q:
        raise DegenerateSorting("qubit and readout criteria select the same mode")
    rest = active[active != q]
    r = int(rest[np.argmax(np.abs(S[1, rest] + S[0, rest]))])

    S = S.copy()
    for j in range(S.shape[1]):
        if j == q:
            ref = S[1, j] - S[0, j]
        elif j == r:
            ref = S[1, j] + S[0, j]
        else:
            ref = S[np.argmax(np.abs(S[:, j])), j]
        if ref < 0:
            S[:, j] *= -1
    Sp = Cm @ S
    omegas = np.sqrt(np.clip(w2, 0, None))
    omegas[is_zero] = 0.0
    return ModeDecomposition(
        omegas=omegas,
        S=S,
        Sprime=Sp,
        qubit_index=q,
        readout_index=r,
        zero_index=int(zeros[0]) if len(zeros) else None,
        lambda_R=float(_coupling(Sp, omegas[r], r)),
        lambda_Q=float(_coupling(Sp, omegas[q], q)),
        delta_C_aF=delta_C_aF,
        dynamical=D,
    )


def circuit_modes(spec: CircuitSpec) -> ModeDecomposition:
    """Extended four-island model: assemble both matrices and decompose."""
    return decompose_modes(
        assemble_capacitance_matrix(spec),
        assemble_inverse_inductance_matrix(spec),
        delta_C_aF=capacitive_asymmetry(spec),
    )


# --- idealized two-node circuit ----------------------------------------------

@dataclass(frozen=True)
class IdealizedParams:
    LQ: float  # nH
    LR: float
    LS: float
    CR: float  # fF
    CQ: float
    SigmaL: float  # nH^2
    Lr: float
    Lq: float
    Dk: float
    Cr: float
    Csh: float
    CJ0: float
    C30: float


def reduce_to_idealized(spec: CircuitSpec, ground_rtol: float = 0.02) -> IdealizedParams:
    """Effective qubit/readout elements after eliminating island 4 and the ground node.

    The readout capacitance is the mean of C13 and C23 (Delta_C is dropped) and the
    shunt capacitance includes the junction capacitance, ``Csh = C12 + CJ``.
    """
    c10, c20 = spec.cap(1, 0), spec.cap(2, 0)
    cj0 = (c10 + c20) / 2
    if abs(c10 - c20) > ground_rtol * max(cj0, np.finfo(float).tiny):
        raise AsymmetricGround(f"C10={c10:.3f} fF and C20={c20:.3f} fF differ beyond {ground_rtol:.0%}")
    c30 = spec.cap(3, 0)
    cr = (spec.cap(1, 3) + spec.cap(2, 3)) / 2
    csh = spec.cap(1, 2) + spec.CJ
    Lr, Lq, Dk = spec.Lr, spec.Lq, spec.Dk
    series = 1 / (1 / (2 * cj0) + 1 / c30) if cj0 > 0 and c30 > 0 else 0.0
    return IdealizedParams(
        LQ=Lq - Dk,
        LR=Lr + Lq / 4 - Dk,
        LS=Dk,
        CR=2 * cr + series,
        CQ=cr / 2 + csh + cj0 / 2,
        SigmaL=Lr * Lq + Lq**2 / 4 - Dk**2,
        Lr=Lr,
        Lq=Lq,
        Dk=Dk,
        Cr=cr,
        Csh=csh,
        CJ0=cj0,
        C30=c30,
    )


def idealized_matrices(p: IdealizedParams) -> tuple[np.ndarray, np.ndarray]:
    """Node-basis (phi_1, phi_2) capacitance [F] and inverse inductance [1/H] matrices."""
    s = p.CJ0**2 / (p.C30 + 2 * p.CJ0) if p.CJ0 > 0 else 0.0
    a = p.Cr + p.Csh + p.CJ0 - s
    b = p.Csh + s
    C = np.array([[a, -b], [-b, a]]) * units.fF
    Linv = np.array(
        [[p.Lr + p.Lq / 2 - p.Dk, -p.Lr], [-p.Lr, p.Lr + p.Lq / 2 + p.Dk]]
    ) / p.SigmaL / units.nH
    return C, Linv


def idealized_star_matrices(p: IdealizedParams) -> tuple[np.ndarray, np.ndarray]:
    """The same matrices in the (phi_R, phi_Q) basis, written with the effective elements."""
    C = np.diag([p.CR, p.CQ]) * units.fF
    den = p.LR * p.LQ + p.LR * p.LS + p.LQ * p.LS
    Linv = np.array([[p.LQ + p.LS, -p.LS], [-p.LS, p.LR + p.LS]]) / den / units.nH
    return C, Linv


def idealized_modes(spec: CircuitSpec) -> ModeDecomposition:
    return decompose_modes(*idealized_matrices(reduce_to_idealized(spec)), delta_C_aF=0.0)
