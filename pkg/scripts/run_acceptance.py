"""Run the acceptance campaign and write one CSV report per criterion.

    python3 scripts/run_acceptance.py --out results/ [--seed N] [--quick] [--workers W]
"""

import argparse
import os
import sys
import time
from dataclasses import replace

from anticonc.campaign import CampaignConfig, determinism, run_campaign


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="results")
    p.add_argument("--seed", type=int, default=CampaignConfig.seed)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--quick", action="store_true", help="8 specs, N=1e5")
    p.add_argument("--no-rerun", action="store_true", help="skip the determinism rerun")
    a = p.parse_args(argv)

    cfg = replace(CampaignConfig(), seed=a.seed, workers=a.workers)
    if a.quick:
        cfg = replace(cfg, n_specs=8, N=100_000, equi_N=50_000, equi_n=(4, 16, 64))
    os.makedirs(a.out, exist_ok=True)
    t0 = time.time()
    say = lambda msg: print(f"[{time.time() - t0:7.1f}s] {msg}", file=sys.stderr, flush=True)
    results = run_campaign(cfg, progress=say)
    if not a.no_rerun:
        say("rerun for determinism")
        results.append(determinism(results, run_campaign(cfg)))
    for r in results:
        if r.csv:
            slug = r.name.split()[0]
            with open(os.path.join(a.out, f"criterion_{slug}.csv"), "w", encoding="utf-8") as fh:
                fh.write(r.csv)
        print(r.line())
    say("done")
    return 0 if all(r.passed is not False for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())
