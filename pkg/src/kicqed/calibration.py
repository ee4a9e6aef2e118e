"""Pi-pulse train population model, pi-pulse fidelity and AC-Stark photon calibration."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateFit
from .optimize import simplex_minimize


@dataclass(frozen=True)
class PiPulseRecord:
    n: int
    population: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise ValueError("pulse count must be a non-negative integer")


@dataclass(frozen=True)
class PiPulseFit:
    a: float
    o: float
    f: float
    gamma: float
    Fpi: float
    FpiNoDecay: float
    rss: float
    converged: bool


def pipulse_population(n, a: float, o: float, f: float, gamma: float):
    """P(n) = a (1/2 - 1/2 cos(pi n + 2 pi f n)) exp(-gamma n) + o."""
    n = np.asarray(n, dtype=float)
    return a * (0.5 - 0.5 * np.cos(np.pi * n + 2 * np.pi * f * n)) * np.exp(-gamma * n) + o


def fpi(f: float, gamma: float = 0.0) -> float:
    """Population after one pulse with unit amplitude and zero offset."""
    return float((0.5 - 0.5 * np.cos(np.pi + 2 * np.pi * f)) * np.exp(-gamma))


def _linear_ao(basis: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    A = np.column_stack([basis, np.ones_like(basis)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = A @ coef - y
    return float(coef[0]), float(coef[1]), float(r @ r)


def fit_pipulse(records: Sequence[PiPulseRecord], gamma_max: float = 1.0, grid: int = 200) -> PiPulseFit:
    """Least squares for (a, o, f, gamma).

    f is only defined modulo 1 and up to sign, so it is reported in [0, 1/2].
    A coarse (f, gamma) grid with (a, o) solved linearly seeds a bounded simplex.
    """
    if len(records) < 8:
        raise DegenerateFit("need at least 8 pulse-train records")
    n = np.array([r.n for r in records], dtype=float)
    y = np.array([r.population for r in records], dtype=float)

    best = (np.inf, 0.0, 0.0)
    for f in np.linspace(0.0, 0.5, grid + 1):
        for g in np.concatenate([[0.0], np.geomspace(1e-4, gamma_max, 40)]):
            basis = (0.5 - 0.5 * np.cos(np.pi * n + 2 * np.pi * f * n)) * np.exp(-g * n)
            _, _, rss = _linear_ao(basis, y)
            if rss < best[0]:
                best = (rss, f, g)
    _, f0, g0 = best
    basis = (0.5 - 0.5 * np.cos(np.pi * n + 2 * np.pi * f0 * n)) * np.exp(-g0 * n)
    a0, o0, _ = _linear_ao(basis, y)

    def rss(p):
        r = pipulse_population(n, *p) - y
        return float(r @ r)

    amp = max(abs(a0), 1e-3)
    bounds = [(-10 * amp, 10 * amp), (-1.0, 2.0), (-0.01, 0.51), (0.0, gamma_max)]
    scale = [amp, max(abs(o0), 0.01), max(f0, 0.01), max(g0, 1e-3)]
    res = simplex_minimize(rss, [a0, o0, f0, g0], bounds, scale=scale, max_evals=4000, xtol=1e-12, ftol=1e-18)
    a, o, f, g = res.x
    f = abs(f) % 1.0
    f = min(f, 1.0 - f)
    return PiPulseFit(
        a=float(a), o=float(o), f=float(f), gamma=float(g),
        Fpi=fpi(f, g), FpiNoDecay=fpi(f, 0.0), rss=float(res.fun), converged=res.converged,
    )


@dataclass(frozen=True)
class StarkRecord:
    power: float
    deltaF: float  # MHz

    def __post_init__(self):
        if not (np.isfinite(self.power) and np.isfinite(self.deltaF)):
            raise ValueError("Stark record values must be finite")


@dataclass(frozen=True)
class StarkFit:
    slope: float  # MHz per power unit
    intercept: float  # MHz; identically 0 for a line through the origin
    rss: float
    with_intercept: bool


def fit_stark(records: Sequence[StarkRecord], intercept: bool = False) -> StarkFit:
    """Ordinary least-squares line deltaF = slope * power (+ intercept)."""
    P = np.array([r.power for r in records], dtype=float)
    d = np.array([r.deltaF for r in records], dtype=float)
    if len(np.unique(P)) < 2:
        raise DegenerateFit("need at least two distinct drive powers")
    if intercept:
        pm, dm = P.mean(), d.mean()
        slope = float(((P - pm) @ (d - dm)) / ((P - pm) @ (P - pm)))
        b = float(dm - slope * pm)
    else:
        slope = float((P @ d) / (P @ P))
        b = 0.0
    r = slope * P + b - d
    return StarkFit(slope, b, float(r @ r), intercept)


def photons_from_power(slope: float, chi: float, power: float) -> float:
    """Mean photon number nbar = slope * power / chi (slope in MHz per power unit, chi in MHz)."""
    if chi == 0:
        raise ValueError("chi must be non-zero")
    return slope * power / chi


# --- files ------------------------------------------------------------------

def read_pipulse_csv(path: str | Path) -> list[PiPulseRecord]:
    with open(path, newline="") as fh:
        return [PiPulseRecord(int(row["n"]), float(row["population"])) for row in csv.DictReader(fh)]


def write_pipulse_csv(path: str | Path, records: Sequence[PiPulseRecord]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("n,population\n")
        for r in records:
            fh.write(f"{int(r.n)},{float(r.population)!r}\n")


def read_stark_csv(path: str | Path) -> list[StarkRecord]:
    with open(path, newline="") as fh:
        return [StarkRecord(float(row["power"]), float(row["deltaF_MHz"])) for row in csv.DictReader(fh)]


def write_stark_csv(path: str | Path, records: Sequence[StarkRecord]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("power,deltaF_MHz\n")
        for r in records:
            fh.write(f"{float(r.power)!r},{float(r.deltaF)!r}\n")


def fit_to_json(fit) -> str:
    return json.dumps(asdict(fit), indent=2) + "\n"
