import pathlib
import subprocess
import sys

ORACLES = pathlib.Path(__file__).parents[1] / "oracles"


def test_frozen_oracle_values_reproduce():
    out = subprocess.run([sys.executable, str(ORACLES / "derive.py")], check=True,
                         capture_output=True, text=True).stdout
    assert out == (ORACLES / "expected.txt").read_text()
