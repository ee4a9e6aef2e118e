"""Extended vs idealized circuit over an inductive-asymmetry sweep at half flux.

Writes a CSV with f_R, f_Q and chi from both models, for a device with its
capacitances symmetrized (Delta_C = 0) and, optionally, a capacitive asymmetry
added back to show the shift it causes.

    python scripts/dk_sweep.py [device] [delta_C_aF] > sweep.csv
"""
import sys

import numpy as np

from kicqed.circuit import load_device
from kicqed.fock import compare_models


def main(argv: list[str]) -> None:
    name = argv[0] if argv else "q7"
    dC_aF = float(argv[1]) if len(argv) > 1 else 0.0
    spec = load_device(name).symmetrized().without_node4()
    if dC_aF:
        spec = spec.with_delta_c(dC_aF)
    print("Dk_nH,fR_ext_GHz,fR_ideal_GHz,fQ_ext_GHz,fQ_ideal_GHz,chi_ext_MHz,chi_ideal_MHz")
    for r in compare_models(spec, np.linspace(-1.0, 1.0, 11)):
        print(f"{r.Dk:.3f},{r.fR_ext:.9f},{r.fR_ideal:.9f},{r.fQ_ext:.9f},{r.fQ_ideal:.9f},"
              f"{r.chi_ext:.6f},{r.chi_ideal:.6f}")


if __name__ == "__main__":
    main(sys.argv[1:])
