"""Least-squares fit of (Lr, Lq, Dk, EJ, CJ) to spectroscopy data.

The capacitance table stays fixed at the template device's values; only the five
circuit parameters move.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from . import units
from .circuit import CircuitSpec, circuit_modes, reduce_to_idealized
from .errors import KicqedError, Underdetermined
from .fock import FockConfig, qubit_hamiltonian, solve
from .optimize import simplex_minimize

PARAMS = ("Lr", "Lq", "Dk", "EJ", "CJ")
DEFAULT_WEIGHTS = {"R": 4.0, "Q01": 1.0, "Q02": 1.0}
_LEVELS = {"R": (1, 0), "Q01": (0, 1), "Q02": (0, 2)}


class Transition(str, Enum):
    R = "R"
    Q01 = "Q01"
    Q02 = "Q02"


@dataclass(frozen=True)
class SpectroscopyPoint:
    fluxPhi0: float
    freqGHz: float
    transition: Transition
    weight: float | None = None  # None -> DEFAULT_WEIGHTS

    def __post_init__(self):
        object.__setattr__(self, "transition", Transition(self.transition))
        if not self.freqGHz > 0:
            raise ValueError("measured frequency must be positive")
        if self.weight is not None and self.weight < 0:
            raise ValueError("weight must be non-negative")

    @property
    def w(self) -> float:
        return DEFAULT_WEIGHTS[self.transition.value] if self.weight is None else float(self.weight)


def default_bounds(theta0: Sequence[float]) -> tuple[tuple[float, float], ...]:
    Lr, Lq, Dk, EJ, CJ = theta0
    dk = min(max(3 * abs(Dk), 1.0), 0.45 * Lq)
    return ((0.1 * Lr, 5 * Lr), (0.3 * Lq, 3 * Lq), (-dk, dk), (0.1 * EJ, 5 * EJ), (0.1 * CJ, 5 * CJ))


@dataclass(frozen=True)
class FitProblem:
    data: tuple[SpectroscopyPoint, ...]
    template: CircuitSpec
    theta0: tuple[float, ...]
    bounds: tuple[tuple[float, float], ...] | None = None
    cfg: FockConfig = FockConfig()
    max_evals: int = 3000
    ftol: float = 1e-16
    xtol: float = 1e-9
    penalty_GHz: float = 1.0
    n_starts: int = 1
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "data", tuple(self.data))
        object.__setattr__(self, "theta0", tuple(float(v) for v in self.theta0))
        if len(self.theta0) != len(PARAMS):
            raise ValueError(f"theta0 must hold {PARAMS}")
        b = self.bounds if self.bounds is not None else default_bounds(self.theta0)
        b = tuple((float(lo), float(hi)) for lo, hi in b)
        for name, (lo, hi) in zip(PARAMS, b):
            if name != "Dk" and lo <= 0:
                raise ValueError(f"lower bound of {name} must be positive")
        if not (b[2][0] == -b[2][1] and b[2][1] < b[1][0] / 2):
            raise ValueError("Dk bounds must be symmetric and inside (-Lq/2, Lq/2)")
        object.__setattr__(self, "bounds", b)

    def spec_at(self, theta: Sequence[float]) -> CircuitSpec:
        return self.template.replace(**dict(zip(PARAMS, map(float, theta))))


@dataclass
class FitResult:
    theta: dict[str, float]
    rss: float
    residuals: np.ndarray
    converged: bool
    evals: int
    failures: list[str] = field(default_factory=list)
    history: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "theta": self.theta,
            "rss": self.rss,
            "converged": self.converged,
            "evals": self.evals,
            "residuals": [float(r) for r in self.residuals],
        }


def model_frequencies(theta: Sequence[float], problem: FitProblem) -> tuple[np.ndarray, list[str | None]]:
    """Model frequency (GHz) of each data point's transition, NaN where the model fails.

    The second value carries a reason per point: ``None`` when fine, otherwise a
    model error or an ambiguous-labeling note.
    """
    n = len(problem.data)
    out = np.full(n, np.nan)
    notes: list[str | None] = [None] * n
    try:
        spec = problem.spec_at(theta)
        modes = circuit_modes(spec)
    except KicqedError as exc:
        return out, [f"model: {exc}"] * n

    fluxes = sorted({p.fluxPhi0 for p in problem.data})

    def at(f):
        try:
            return solve(modes, spec.EJ, f, problem.cfg, strict=False)
        except KicqedError as exc:
            return exc

    if problem.threads > 1:
        with ThreadPoolExecutor(max_workers=problem.threads) as pool:
            spectra = dict(zip(fluxes, pool.map(at, fluxes)))
    else:
        spectra = {f: at(f) for f in fluxes}

    for i, p in enumerate(problem.data):
        s = spectra[p.fluxPhi0]
        if isinstance(s, Exception):
            notes[i] = f"model: {s}"
            continue
        upper = _LEVELS[p.transition.value]
        try:
            if s.is_ambiguous(0, 0) or s.is_ambiguous(*upper):
                notes[i] = "ambiguous labeling"
                continue
            out[i] = s.energy(*upper) - s.energy(0, 0)
        except KicqedError as exc:
            notes[i] = f"model: {exc}"
    return out, notes


def residuals(theta: Sequence[float], problem: FitProblem) -> np.ndarray:
    """(model - measured) * sqrt(weight) in GHz; failed points get the penalty instead."""
    model, _ = model_frequencies(theta, problem)
    meas = np.array([p.freqGHz for p in problem.data])
    sw = np.sqrt([p.w for p in problem.data])
    r = (model - meas) * sw
    bad = ~np.isfinite(r)
    r[bad] = problem.penalty_GHz * sw[bad]
    return r


def _check_information(data: Sequence[SpectroscopyPoint]) -> None:
    informative = [p for p in data if p.w > 0]
    kinds = {p.transition for p in informative}
    if len(informative) < 5 or len(kinds) < 2:
        warnings.warn(
            f"{len(informative)} weighted points over {len(kinds)} transition type(s); "
            "five circuit parameters are likely underdetermined",
            Underdetermined,
            stacklevel=3,
        )


def fit_parameters(problem: FitProblem) -> FitResult:
    """Weighted least squares over the five circuit parameters, optionally multi-start.

    Extra starts are theta0 jittered uniformly by +-20% with ``problem.seed``.
    """
    _check_information(problem.data)
    total_w = sum(p.w for p in problem.data)
    norm = total_w if total_w > 0 else 1.0

    def objective(theta):
        r = residuals(theta, problem)
        return float(r @ r) / norm

    rng = np.random.default_rng(problem.seed)
    lo = np.array([b[0] for b in problem.bounds])
    hi = np.array([b[1] for b in problem.bounds])
    starts = [np.array(problem.theta0)]
    for _ in range(problem.n_starts - 1):
        jitter = 1 + rng.uniform(-0.2, 0.2, size=len(PARAMS))
        starts.append(np.clip(np.array(problem.theta0) * jitter, lo, hi))
    scale = [max(abs(v), 1e-3) for v in problem.theta0]
    scale[2] = max(abs(problem.theta0[2]), 0.1 * (problem.bounds[2][1]))

    best, evals, history = None, 0, []
    for x0 in starts:
        res = simplex_minimize(
            objective, x0, problem.bounds, scale=scale,
            max_evals=problem.max_evals, xtol=problem.xtol, ftol=problem.ftol,
        )
        offset = history[-1] if history else math.inf
        history.extend(min(offset, h) for h in res.history)
        evals += res.evals
        if best is None or res.fun < best.fun:
            best = res

    r = residuals(best.x, problem)
    _, notes = model_frequencies(best.x, problem)
    return FitResult(
        theta=dict(zip(PARAMS, map(float, best.x))),
        rss=float(r @ r),
        residuals=r,
        converged=best.converged,
        evals=evals,
        failures=[f"point {i}: {n}" for i, n in enumerate(notes) if n],
        history=history,
    )


def synthesize(spec: CircuitSpec, fluxes: Iterable[float], transitions=("R", "Q01", "Q02"),
               cfg: FockConfig = FockConfig(), noise_GHz: float = 0.0, seed: int = 0) -> list[SpectroscopyPoint]:
    """Spectroscopy points generated from the forward model, with optional Gaussian noise."""
    rng = np.random.default_rng(seed)
    modes = circuit_modes(spec)
    pts = []
    for f in fluxes:
        s = solve(modes, spec.EJ, f, cfg, strict=False)
        for t in transitions:
            up = _LEVELS[t]
            if s.is_ambiguous(0, 0) or s.is_ambiguous(*up):
                continue
            freq = s.energy(*up) - s.energy(0, 0)
            if noise_GHz:
                freq += rng.normal(0.0, noise_GHz)
            pts.append(SpectroscopyPoint(float(f), float(freq), Transition(t)))
    return pts


def initial_guess(data: Sequence[SpectroscopyPoint], template: CircuitSpec,
                  Lq: float = 30.0, Dk: float = 0.1, CJ: float = 3.0) -> tuple[float, ...]:
    """Starting point for the fit.

    Lr comes from the mean readout frequency through the idealized resonator
    (omega_R^2 = 1 / (L_R C_R)); EJ is tuned so the uncoupled qubit reproduces the
    Q01 point closest to half flux. Lq, Dk and CJ are taken as given.
    """
    base = template.replace(Lq=Lq, Dk=Dk, CJ=CJ, Lr=max(template.Lr, 0.1))
    r_pts = [p.freqGHz for p in data if p.transition is Transition.R]
    Lr = base.Lr
    if r_pts:
        ideal = reduce_to_idealized(base, ground_rtol=1.0)
        w = 2 * np.pi * np.mean(r_pts) * units.GHz
        LR = 1 / (w**2 * ideal.CR * units.fF) / units.nH
        Lr = max(LR - Lq / 4 + Dk, 0.1)
    base = base.replace(Lr=Lr)

    EJ = units.inductive_energy_GHz(Lq)
    q_pts = [p for p in data if p.transition is Transition.Q01]
    if q_pts:
        target = min(q_pts, key=lambda p: abs(p.fluxPhi0 - 0.5))
        modes = circuit_modes(base)

        def gap(ej):
            e = np.linalg.eigvalsh(qubit_hamiltonian(modes, ej, target.fluxPhi0, 40))
            return e[1] - e[0] - target.freqGHz

        grid = np.geomspace(0.05, 60, 40)
        vals = [gap(g) for g in grid]
        for a, b, va, vb in zip(grid, grid[1:], vals, vals[1:]):
            if va * vb <= 0:
                EJ = brentq(gap, a, b, xtol=1e-6)
                break
    return (float(Lr), float(Lq), float(Dk), float(EJ), float(CJ))


def read_spectroscopy_csv(path: str | Path) -> list[SpectroscopyPoint]:
    """Columns flux_phi0, freq_GHz, transition (R|Q01|Q02), weight (optional, blank = default)."""
    pts = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            w = row.get("weight")
            pts.append(
                SpectroscopyPoint(
                    float(row["flux_phi0"]),
                    float(row["freq_GHz"]),
                    Transition(row["transition"].strip()),
                    float(w) if w not in (None, "") else None,
                )
            )
    return pts


def write_spectroscopy_csv(path: str | Path, points: Sequence[SpectroscopyPoint]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["flux_phi0", "freq_GHz", "transition", "weight"])
        for p in points:
            wr.writerow([repr(float(p.fluxPhi0)), repr(float(p.freqGHz)), p.transition.value,
                         "" if p.weight is None else repr(float(p.weight))])


def write_fit_json(path: str | Path, result: FitResult) -> None:
    Path(path).write_text(json.dumps(result.to_json(), indent=2) + "\n")
