"""Freeze CLI golden values for the shipped q1-q9 device files.

    python scripts/freeze_golden.py [tests/golden/cli_devices.json]

Only run this after an intentional change to the physics; the test suite
compares fresh CLI output against the frozen file.
"""
import io
import json
import sys
from contextlib import redirect_stdout
from pathlib import Path

from kicqed.cli import main

DEVICES = [f"q{k}" for k in range(1, 10)]
MODE_KEYS = ("f_R_GHz", "f_Q_GHz", "lambda_R", "lambda_Q", "delta_C_aF")
CHI_KEYS = ("chi_MHz", "fQ01_GHz", "fR0_GHz")


def run(argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(argv)
    if code:
        raise SystemExit(f"{argv} exited with {code}")
    return json.loads(buf.getvalue())


def freeze() -> dict:
    out = {}
    for name in DEVICES:
        modes = run(["modes", "--device", name])
        chi = run(["chi", "--device", name, "--flux", "0.5"])
        out[name] = {**{k: modes[k] for k in MODE_KEYS}, **{k: chi[k] for k in CHI_KEYS}}
    return out


if __name__ == "__main__":
    path = Path(sys.argv[1] if len(sys.argv) > 1 else "tests/golden/cli_devices.json")
    path.write_text(json.dumps(freeze(), indent=2, sort_keys=True) + "\n")
    print(f"wrote {path}")
