"""Opt-in full-size experiments (12 UEs, 8 RUs, 10000 frames by default).

These take hours on one core. Each step is a plain CLI call, so any of them
can be run alone:

    python3 benchmarks/full_scale.py --out runs/full [--frames 10000] [--workers 4]
"""

import argparse
import subprocess
import sys


def run(args):
    cmd = [sys.executable, "-m", "jfcs", *args]
    print("+", " ".join(cmd), flush=True)
    return subprocess.call(cmd)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs/full")
    ap.add_argument("--frames", default="10000")
    ap.add_argument("--workers", default="1")
    ap.add_argument("--mrt", action="store_true", help="also sweep M under MRT (slow)")
    a = ap.parse_args()
    common = ["--preset", "table1", "--frames", a.frames]
    rc = 0
    rc |= run(["benchmark", *common, "--out", f"{a.out}/benchmark"])
    rc |= run(["sweep", *common, "--param", "phi", "--values", "5,15,25,35",
               "--workers", a.workers, "--out", f"{a.out}/phi"])
    rc |= run(["sweep", *common, "--param", "M", "--values", "16,32,64,128",
               "--workers", a.workers, "--out", f"{a.out}/M_zfbf"])
    if a.mrt:
        rc |= run(["sweep", *common, "--scheduler", "mrt", "--param", "M", "--values", "16,32,64,128",
                   "--workers", a.workers, "--out", f"{a.out}/M_mrt"])
    rc |= run(["verify", *common, "--out", f"{a.out}/verify"])
    return rc


if __name__ == "__main__":
    sys.exit(main())
