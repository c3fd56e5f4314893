"""Empirical squeezing ratio as a function of t*.

    python3 scripts/squeeze_tstar.py --artifact out/absorb [--t-star 0.25 0.5 1 2]

Reruns the squeeze command for each t* against one absorption artifact and
writes the delta_emp distribution per t* to a CSV.
"""

import argparse
import csv
import json
from pathlib import Path

from hrlab.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
FIELDS = ["t_star", "exit", "m", "min", "p25", "median", "p75", "max", "dichotomy_ok"]


def sweep(artifact: Path, t_stars, root: Path, n_pairs: int):
    base = json.loads((CONFIGS / "squeeze.json").read_text())
    rows = []
    for ts in t_stars:
        data = json.loads(json.dumps(base))
        data["output_dir"] = str(root / f"t{ts:g}")
        data["squeeze"].update({"absorb_artifact": str(artifact), "t_star": ts, "n_pairs": n_pairs, "phi_pairs": 0})
        cfg = root / f"t{ts:g}.json"
        cfg.write_text(json.dumps(data, indent=2))
        code = main(["squeeze", "--config", str(cfg)])
        sq = json.loads((root / f"t{ts:g}" / "squeeze_report.json").read_text())["squeeze"]
        dist = sq["delta_distribution"]
        rows.append({"t_star": ts, "exit": code, "m": sq["m"], "dichotomy_ok": sq["dichotomy_ok"],
                     **{k: dist[k] for k in ("min", "p25", "median", "p75", "max")}})
    return rows


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--artifact", type=Path, required=True)
    ap.add_argument("--t-star", type=float, nargs="+", default=[0.25, 0.5, 1.0, 2.0])
    ap.add_argument("--pairs", type=int, default=32)
    ap.add_argument("--root", type=Path, default=Path("out/tstar"))
    args = ap.parse_args()
    args.root.mkdir(parents=True, exist_ok=True)
    rows = sweep(args.artifact, args.t_star, args.root, args.pairs)
    with (args.root / "tstar.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    for r in rows:
        print(f"t*={r['t_star']:<5g} m={r['m']} median={r['median']:.3g} max={r['max']:.3g} exit={r['exit']}")
