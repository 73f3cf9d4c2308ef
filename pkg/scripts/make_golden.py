"""Regenerate the committed golden CLI outputs in docs/golden/."""
import sys
from pathlib import Path

from semilinear_tikhonov.cli import run

OUT = Path(__file__).resolve().parent.parent / "docs" / "golden"

# small meshes keep the samples readable; rates uses the acceptance setup
GOLDEN = {
    "solve.json": ["solve", "--problem", "section7-sin", "--alpha", "1e-1", "--cells", "64"],
    "path.csv": ["path", "--problem", "section7-sin", "--alpha-max", "1e-1", "--alpha-min", "1e-3", "--per-decade", "2", "--cells", "256"],
    "rates.csv": ["rates", "--problem", "section7-sin", "--cells", "8192"],
    "asc.csv": ["asc", "--problem", "section7-sin", "--eps-min", "1e-3", "--eps-max", "0.3"],
    "gradcheck.csv": ["gradcheck", "--problem", "section7-sin", "--cells", "64", "--points", "2", "--directions", "2"],
}


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    status = 0
    for name, argv in GOLDEN.items():
        code = run(argv + ["--out", str(OUT / name)])
        print(f"{name}: exit {code}")
        status = max(status, code)
    return status


if __name__ == "__main__":
    sys.exit(main())
