"""Run every shipped experiment config in dependency order and summarise the verdicts.

    python3 scripts/run_all.py [--root out] [--quick]

``--quick`` substitutes configs/quick.json for every command (seconds, not minutes).
"""

import argparse
import json
import time
from pathlib import Path

from hrlab.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
ORDER = ["ode", "simulate", "dimension", "lipschitz", "absorb", "squeeze", "determine"]


def _config(name, root, quick):
    data = json.loads((CONFIGS / ("quick.json" if quick else f"{name}.json")).read_text())
    data["output_dir"] = str(root / name)
    for block in ("squeeze", "determine"):
        if name == block:
            data.setdefault(block, {})["absorb_artifact"] = str(root / "absorb")
    path = root / f"{name}.config.json"
    path.write_text(json.dumps(data, indent=2))
    return path


def run(root: Path, quick: bool):
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    for name in ORDER:
        start = time.perf_counter()
        code = main([name, "--config", str(_config(name, root, quick))])
        rows.append((name, code, time.perf_counter() - start))
        if name == "absorb" and code != 0:
            print("absorption failed; skipping the commands that need its artifact")
            break
    print(f"{'command':<10} {'exit':>4} {'seconds':>8}")
    for name, code, secs in rows:
        print(f"{name:<10} {code:>4} {secs:8.1f}")
    return max(code for _, code, _ in rows)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--root", default="out", type=Path)
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()
    raise SystemExit(run(args.root, args.quick))
