"""Command-line entry point: ``anticonc {bounds,density,qfunc,sample,verify,sweep}``.

Exit codes: 0 when every check passes, 1 when a check fails, 2 on usage,
config or input errors.
"""

from __future__ import annotations

import argparse
import sys

from .config import SpecSource, load_config
from .concentration import concentration_curve, estimates_to_csv
from .errors import AntiConcError
from .harness import (bounds_csv, report_header, run_bounds, run_sweep, run_verify, sweep_csv,
                      write_text)
from .order_density import default_grid, density_grid
from .field_model import reduce_degenerate
from .rng_sampler import sample_many

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _float_list(text):
    try:
        return tuple(float(t) for t in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}")


def _int_list(text):
    try:
        return tuple(int(t) for t in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}")


def _equi(text):
    try:
        n, rho = text.split(",")
        return SpecSource("equicorrelated", n=int(n), rho=float(rho))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N,RHO, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", metavar="PATH")
    common.add_argument("--eps", type=_float_list, metavar="LIST")
    common.add_argument("--n-samples", type=int, metavar="N")
    common.add_argument("--budget", type=int, metavar="B")
    common.add_argument("--workers", type=int)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--equicorrelated", type=_equi, metavar="N,RHO",
                     help="unit-variance field with constant correlation")
    src.add_argument("--spec-file", metavar="PATH",
                     help="text file: first row mu, then the rows of sigma")

    p = argparse.ArgumentParser(prog="anticonc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bounds", parents=[common], help="closed-form bounds for a field")
    b.add_argument("--stat")
    b.add_argument("--var", type=float, help="use this variance instead of estimating it")
    b.add_argument("--c0", type=float)

    d = sub.add_parser("density", parents=[common], help="order-statistic density on a grid")
    d.add_argument("--k", type=int, help="order index, default n (the maximum)")
    d.add_argument("--abs", action="store_true", help="order statistics of |X_i|")
    d.add_argument("--grid", type=_float_list, metavar="LO,HI,M")

    q = sub.add_parser("qfunc", parents=[common], help="empirical concentration function")
    q.add_argument("--stat")

    s = sub.add_parser("sample", parents=[common], help="Monte Carlo draws of a statistic")
    s.add_argument("--stat")

    v = sub.add_parser("verify", parents=[common], help="compare estimates with bounds")
    v.add_argument("--stat")
    v.add_argument("--checks", type=lambda t: tuple(w for w in t.replace(",", " ").split() if w))
    v.add_argument("--grid", type=_float_list, metavar="LO,HI,M")

    w = sub.add_parser("sweep", parents=[common], help="equicorrelated (n, rho) sweep")
    w.add_argument("--n-list", type=_int_list)
    w.add_argument("--rho-list", type=_float_list)
    return p


def _overrides(a) -> dict:
    spec = a.equicorrelated
    if a.spec_file:
        spec = SpecSource("explicit", file=a.spec_file)
    return {"seed": a.seed, "out": a.out, "eps": a.eps, "n_samples": a.n_samples,
            "budget": a.budget, "workers": a.workers, "spec": spec,
            "statistic": getattr(a, "stat", None), "var": getattr(a, "var", None),
            "c0": getattr(a, "c0", None), "checks": getattr(a, "checks", None),
            "grid": getattr(a, "grid", None), "n_list": getattr(a, "n_list", None),
            "rho_list": getattr(a, "rho_list", None)}


def _emit(text: str, path: str) -> None:
    if path:
        write_text(text, path)
    else:
        sys.stdout.write(text)


def run(argv=None) -> int:
    a = build_parser().parse_args(argv)
    try:
        cfg = load_config(a.config, a.command, _overrides(a))
        cmd = a.command
        if cmd == "sweep":
            cells = run_sweep(cfg)
            _emit(sweep_csv(cfg, cells), cfg.out)
            ok = all(c.lower_ok and c.ratios_ok for c in cells)
            return EXIT_OK if ok else EXIT_FAIL
        spec = cfg.field()
        if cmd == "bounds":
            _emit(bounds_csv(cfg, run_bounds(cfg, spec)), cfg.out)
        elif cmd == "verify":
            rep = run_verify(cfg, spec)
            _emit(rep.to_csv(report_header("verify", cfg, statistic=cfg.statistic)), cfg.out)
            return EXIT_OK if rep.all_pass else EXIT_FAIL
        elif cmd == "density":
            red = reduce_degenerate(spec).reduced
            k = a.k if a.k is not None else red.n
            grid = cfg.grid or default_grid(red, abs_variant=a.abs)
            g = density_grid(red, k, (grid[0], grid[1], int(grid[2])), cfg.budget, a.abs)
            hdr = report_header("density", cfg, k=k, abs_variant=a.abs, integral=g.integral())
            _emit(g.to_csv(header_lines=hdr), cfg.out)
        elif cmd == "qfunc":
            batch = sample_many(spec, [cfg.kind], cfg.n_samples, cfg.seed, workers=cfg.workers)[0]
            rows = concentration_curve(batch, cfg.eps)
            hdr = report_header("qfunc", cfg, statistic=cfg.statistic, N=cfg.n_samples)
            _emit(estimates_to_csv(rows, header_lines=hdr), cfg.out)
        elif cmd == "sample":
            batch = sample_many(spec, [cfg.kind], cfg.n_samples, cfg.seed, workers=cfg.workers)[0]
            hdr = "".join(f"# {ln}\n" for ln in report_header("sample", cfg, statistic=cfg.statistic))
            _emit(hdr + batch.to_csv(), cfg.out)
        return EXIT_OK
    except (AntiConcError, OSError) as e:
        print(f"anticonc {a.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
