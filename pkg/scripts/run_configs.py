"""Run every JSON config in scripts/configs through the CLI and summarise the check reports.

    python3 scripts/run_configs.py [--out results] [--only NAME ...] [--parallel N]
"""

import argparse
import json
import subprocess
import sys
import time
from pathlib import Path

HERE = Path(__file__).resolve().parent


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--only", nargs="*", help="config stems to run (default: all)")
    ap.add_argument("--parallel", type=int, default=1)
    args = ap.parse_args(argv)

    configs = sorted((HERE / "configs").glob("*.json"))
    if args.only:
        configs = [c for c in configs if c.stem in set(args.only)]
    status = 0
    for path in configs:
        cmd = json.loads(path.read_text())["command"]
        out = Path(args.out) / path.stem
        t0 = time.perf_counter()
        rc = subprocess.run([sys.executable, "-m", "deglap.cli", cmd, "--config", str(path),
                             "--out", str(out), "--parallel", str(args.parallel)]).returncode
        print(f"{path.stem:28s} exit {rc}  {time.perf_counter() - t0:6.1f} s")
        status = max(status, rc)
        if rc == 0 and cmd in ("verify", "sweep"):
            subprocess.run([sys.executable, "-m", "deglap.cli", "summary", "--out", str(out)],
                           check=True)
            print((out / "summary.md").read_text())
    return status


if __name__ == "__main__":
    sys.exit(main())
