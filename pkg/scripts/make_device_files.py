"""Regenerate the shipped device JSON files from the reference parameter tables.

Fitted circuit parameters (Lr, Lq, Dk, EJ, CJ) and simulated capacitances for
devices q1..q14. Table diagonals are totals, so ground terms are derived as
Ci0 = Cii - sum_j Cij.

    python scripts/make_device_files.py [outdir]
"""
import json
import sys
from pathlib import Path

# name: (Lr nH, Lq nH, Dk nH, EJ GHz, CJ fF)
FIT = {
    "q1": (15.03, 13.61, -0.07, 13.44, 4.82),
    "q2": (6.53, 16.34, -0.24, 13.74, 6.01),
    "q3": (29.36, 40.35, 0.69, 13.72, 3.78),
    "q4": (30.14, 47.07, 0.64, 13.89, 5.01),
    "q5": (11.90, 33.38, 0.39, 9.88, 4.02),
    "q6": (7.40, 46.96, 0.36, 6.77, 3.34),
    "q7": (11.73, 39.06, 0.28, 4.83, 1.85),
    "q8": (0.55, 16.25, 0.20, 3.09, 2.58),
    "q9": (18.89, 26.91, 0.17, 1.28, 1.86),
    "q10": (11.10, 18.55, 0.22, 11.84, 2.13),
    "q11": (9.82, 12.91, -0.31, 11.75, 4.97),
    "q12": (6.54, 24.68, -0.30, 13.44, 4.97),
    "q13": (7.60, 28.28, 0.86, 5.14, 4.37),
    "q14": (19.62, 25.21, 0.17, 3.33, 3.58),
}

# column order of the capacitance table, fF
CAP_COLUMNS = ("C11", "C22", "C33", "C44", "C12", "C24", "C14", "C23", "C13", "C34")
CAPS = {
    "q1": (33.42, 33.28, 99.36, 2.92, 11.77, 0.29, 0.29, 8.63, 8.67, 0.84),
    "q2": (32.45, 32.39, 76.93, 3.03, 3.22, 0.36, 0.32, 6.30, 6.34, 0.72),
    "q3": (16.47, 16.51, 68.69, 4.78, 3.38, 0.61, 0.60, 5.60, 5.59, 1.89),
    "q4": (16.44, 16.48, 68.89, 4.75, 3.40, 0.49, 0.48, 5.62, 5.61, 2.12),
    "q5": (33.84, 33.76, 74.27, 4.94, 4.20, 0.58, 0.57, 6.73, 6.76, 2.01),
    "q6": (33.59, 33.58, 76.00, 5.41, 4.29, 0.48, 0.48, 6.77, 6.79, 2.56),
    "q7": (16.07, 16.19, 71.19, 4.19, 3.27, 0.35, 0.34, 5.65, 5.61, 2.07),
    "q8": (53.37, 53.39, 126.97, 14.17, 5.67, 2.15, 2.13, 28.42, 28.44, 4.86),
    "q9": (17.30, 17.23, 73.67, 5.39, 3.72, 0.56, 0.57, 6.03, 6.04, 2.34),
    "q10": (19.51, 19.52, 116.36, 8.95, 7.35, 0.56, 0.57, 5.35, 5.34, 4.03),
    "q11": (33.06, 33.22, 99.98, 2.90, 11.64, 0.27, 0.28, 8.71, 8.65, 0.83),
    "q12": (33.06, 33.10, 92.67, 2.75, 11.51, 0.29, 0.30, 7.90, 7.88, 0.77),
    "q13": (33.59, 33.60, 73.62, 4.33, 4.01, 0.61, 0.60, 6.75, 6.74, 1.61),
    "q14": (17.30, 17.23, 73.67, 5.39, 3.72, 0.56, 0.57, 6.03, 6.04, 2.34),
}


def device_document(name: str) -> dict:
    Lr, Lq, Dk, EJ, CJ = FIT[name]
    c = dict(zip(CAP_COLUMNS, CAPS[name]))
    pair = lambda i, j: c.get(f"C{min(i, j)}{max(i, j)}", 0.0)  # noqa: E731
    for i in (1, 2, 3, 4):
        c[f"C{i}0"] = round(c[f"C{i}{i}"] - sum(pair(i, j) for j in (1, 2, 3, 4) if j != i), 6)
    order = ("C11", "C22", "C33", "C44", "C12", "C13", "C14", "C23", "C24", "C34", "C10", "C20", "C30", "C40")
    return {
        "name": name,
        "L_r_nH": Lr,
        "L_q_nH": Lq,
        "Delta_k_nH": Dk,
        "E_J_GHz": EJ,
        "C_J_fF": CJ,
        "capacitances_fF": {k: c[k] for k in order},
    }


def main(outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    for name in FIT:
        (outdir / f"{name}.json").write_text(json.dumps(device_document(name), indent=2) + "\n")
        print("wrote", outdir / f"{name}.json")


if __name__ == "__main__":
    default = Path(__file__).resolve().parents[1] / "src" / "kicqed" / "data" / "devices"
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else default)
