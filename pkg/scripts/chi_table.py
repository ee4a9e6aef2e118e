"""Print computed chi at half flux next to the reference fit values for q1..q9.

    python scripts/chi_table.py
"""
import time

from kicqed.circuit import capacitive_asymmetry, load_device
from kicqed.fock import dispersive_shift

CHI_FIT_MHZ = {
    "q1": 0.28, "q2": 1.55, "q3": -1.75, "q4": -0.56, "q5": 2.05,
    "q6": 0.47, "q7": 0.98, "q8": 0.58, "q9": 0.11,
}


def main() -> None:
    print(f"{'device':>6} {'dC [aF]':>8} {'chi [MHz]':>10} {'table':>7} {'rel err':>8} {'time [s]':>8}")
    for name, target in CHI_FIT_MHZ.items():
        spec = load_device(name)
        t0 = time.perf_counter()
        chi = dispersive_shift(spec, 0.5)
        dt = time.perf_counter() - t0
        dC = capacitive_asymmetry(spec)
        print(f"{name:>6} {dC:8.1f} {chi:10.4f} {target:7.2f} {chi / target - 1:8.3f} {dt:8.2f}")


if __name__ == "__main__":
    main()
