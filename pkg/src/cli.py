"""
Command line - spectrum, homs, moments, clt, energy-variance, diag-trend and verify.

Exit codes: 0 success, 1 failed checks or library errors, 2 usage and
configuration errors.
"""

import argparse
import json
import logging
import math
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from src import __version__
from src.cache import ContentCache, cached_homs, cached_spectrum
from src.config import (DEFAULT_ALPHA, DEFAULT_DISPLACEMENT_SLACK, ENUMERATION_MAX_DEGREE,
                        config_from_dict, load_config)
from src.errors import ConfigError, CoversError, ParseError
from src.experiments import run_experiment
from src.fuchsian import load_model
from src.kernels import TestFunctionSpec, WindowParams, mean_asymptotic, sigma_for_character
from src.limit_moments import LimitMomentKey, R_exact, central_moment_limit, gaussian_moment
from src.log import setup_logging
from src.monte_carlo import character_from_config
from src.permutations import enumerate_hom_array, hom_count_formula, save_homs
from src.spectrum import (counting_li, counting_N, counting_N0, enumerate_spectrum, load_spectrum,
                          save_spectrum)
from src.verify import run_checks
from src.visualizer import Visualizer

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


class UsageError(CoversError):
    """Arguments that parse but do not make sense together."""


def write_run_config(out_dir: Path, args: argparse.Namespace) -> Path:
    """Create the run directory and echo the parsed arguments into its config.json."""
    out_dir.mkdir(parents=True, exist_ok=True)
    echo = {k: v for k, v in vars(args).items() if k != "verbose"}
    (out_dir / "config.json").write_text(json.dumps(echo, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out_dir


# === spectrum ===
def cmd_spectrum(args: argparse.Namespace, vis: Visualizer) -> int:
    if args.action == "build":
        cache = ContentCache(args.cache_dir) if args.cache_dir else ContentCache()
        with vis.show_progress_bar() as progress:
            task = progress.add_task("enumerating words", total=None)

            def step(level: int, frontier: int, classes: int):
                progress.update(task, description=f"length {level}: {classes} classes", advance=1)

            if args.horizon is None and not args.no_cache:
                spectrum = cached_spectrum(args.model, args.lmax, None, args.slack, cache, step)
            else:
                spectrum = enumerate_spectrum(load_model(args.model), args.lmax, args.horizon,
                                              args.slack, step)
        if args.out:
            out = write_run_config(Path(args.out), args) / "spectrum.csv"
        else:
            out = Path(f"spectrum_{spectrum.model}_L{args.lmax:g}.csv")
        save_spectrum(spectrum, out)
        vis.show_spectrum_summary(spectrum, {"written to": str(out)})
        return EXIT_OK

    spectrum = load_spectrum(args.input)
    T = args.T if args.T is not None else spectrum.cutoff
    n0 = counting_N0(spectrum, T)
    counts = {
        "T": T,
        "N0(T)": n0,
        "N(T)": counting_N(spectrum, T),
        "Li(e^T)": counting_li(T),
        "N0(T) T / e^T": n0 * T / math.exp(T),
    }
    vis.show_spectrum_summary(spectrum, counts)
    return EXIT_OK


# === homs ===
def cmd_homs(args: argparse.Namespace, vis: Visualizer) -> int:
    if args.action == "count":
        if args.n <= ENUMERATION_MAX_DEGREE and not args.formula:
            vis.show_value(len(enumerate_hom_array(args.n, args.g)))
        else:
            vis.show_value(hom_count_formula(args.n, args.g))
        return EXIT_OK
    if args.action == "enumerate":
        gens = enumerate_hom_array(args.n, args.g)
        header = {"n": args.n, "g": args.g, "seed": None}
    else:
        cache = ContentCache(args.cache_dir) if args.cache_dir else ContentCache()
        gens = cached_homs(args.n, args.g, args.seed, args.count, cache, jobs=args.jobs or 1)
        header = {"n": args.n, "g": args.g, "seed": args.seed}
    if args.out:
        path = write_run_config(Path(args.out), args) / "homs.json"
        save_homs(gens, header, path)
        logger.info("wrote %d homs to %s", len(gens), path)
    vis.show_value(len(gens))
    return EXIT_OK


# === moments ===
def _fraction_doc(value: Fraction) -> Dict[str, object]:
    return {"exact": str(value), "float": float(value)}


def cmd_moments(args: argparse.Namespace, vis: Visualizer) -> int:
    powers: Optional[List[int]] = None
    if args.powers:
        powers = list(args.powers)
    elif args.a is not None or args.b is not None:
        if args.a is None or args.b is None:
            raise UsageError("--a and --b go together")
        powers = [args.a, args.b]
    if powers is not None:
        if len(powers) != args.k:
            raise UsageError(f"--k {args.k} needs {args.k} powers, got {len(powers)}")
        if any(a < 1 for a in powers):
            raise UsageError("powers must be positive")
        value = R_exact(LimitMomentKey(tuple(powers)))
        vis.show_value(value)
        doc = {"k": args.k, "powers": powers, "R": _fraction_doc(value)}
    else:
        if args.L is None:
            raise UsageError("give --L (or --a/--b or --powers for a single-class moment)")
        spec = TestFunctionSpec()
        if args.spectrum:
            spectrum = load_spectrum(args.spectrum)
        else:
            cache = ContentCache(args.cache_dir) if args.cache_dir else ContentCache()
            spectrum = cached_spectrum(args.model, args.L, cache=cache)
        phases = _parse_chi(args.chi)
        if isinstance(phases, list) and len(phases) != 2 * spectrum.genus:
            raise UsageError(f"--chi needs {2 * spectrum.genus} phases, got {len(phases)}")
        chi = character_from_config(phases, spectrum.genus)
        p = WindowParams(args.alpha, args.L)
        value = central_moment_limit(args.k, spectrum, p, chi, spec)
        sigma2 = sigma_for_character(spec, chi)
        doc = {
            "k": args.k, "L": args.L, "alpha": args.alpha, "chi": args.chi,
            "central_moment": value,
            "gaussian_reference": gaussian_moment(args.k, sigma2),
            "sigma2": sigma2,
            "mean_asymptotic_per_sheet": mean_asymptotic(1, 2, spec, p),
        }
        vis.show_table(f"limit central moment k={args.k}", [doc])
    if args.out:
        path = write_run_config(Path(args.out), args) / "moments.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK


def _parse_chi(text: str):
    if text in ("trivial", "gue"):
        return text
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"--chi is 'trivial', 'gue' or comma-separated phases: {exc}") from exc


# === experiments ===
def cmd_experiment(args: argparse.Namespace, vis: Visualizer) -> int:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = config_from_dict({})
    overrides = {"kind": args.command}
    for name in ("seed", "jobs", "out"):
        if getattr(args, name) is not None:
            overrides[name] = getattr(args, name)
    if args.cache_dir:
        overrides["cache_dir"] = args.cache_dir
    cfg = config_from_dict({**cfg.to_dict(), **overrides})
    out_dir = Path(cfg.out or Path("runs") / f"{cfg.kind}-seed{cfg.seed}")
    report = run_experiment(cfg, out_dir=out_dir)
    vis.show_report(report)
    vis.console.print(f"[dim]outputs in {out_dir}[/dim]")
    return EXIT_OK if report.passed else EXIT_FAILED


# === verify ===
def cmd_verify(args: argparse.Namespace, vis: Visualizer) -> int:
    cache = ContentCache(args.cache_dir) if args.cache_dir else None
    results = run_checks(full=args.full, cache=cache, jobs=args.jobs or 1)
    vis.show_checks(results, title="verification" + (" (full)" if args.full else ""))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


# === parser ===
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--jobs", type=int, default=None)
    common.add_argument("--out", default=None)
    common.add_argument("--cache-dir", dest="cache_dir", default=None)
    common.add_argument("--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="covers", description="Random covers of hyperbolic surfaces")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    spectrum = sub.add_parser("spectrum", help="length spectrum of a Fuchsian model")
    spectrum_sub = spectrum.add_subparsers(dest="action", required=True)
    build = spectrum_sub.add_parser("build", parents=[common])
    build.add_argument("--model", default="bolza")
    build.add_argument("--lmax", type=float, required=True)
    build.add_argument("--horizon", type=int, default=None)
    build.add_argument("--slack", type=float, default=DEFAULT_DISPLACEMENT_SLACK)
    build.add_argument("--no-cache", dest="no_cache", action="store_true")
    inspect = spectrum_sub.add_parser("inspect", parents=[common])
    inspect.add_argument("--in", dest="input", required=True)
    inspect.add_argument("--T", type=float, default=None)

    homs = sub.add_parser("homs", help="homomorphisms to S_n")
    homs_sub = homs.add_subparsers(dest="action", required=True)
    for action in ("sample", "count", "enumerate"):
        cmd = homs_sub.add_parser(action, parents=[common])
        cmd.add_argument("--n", type=int, required=True)
        cmd.add_argument("--g", type=int, default=2)
        if action == "sample":
            cmd.add_argument("--count", type=int, default=1000)
        if action == "count":
            cmd.add_argument("--formula", action="store_true")

    moments = sub.add_parser("moments", help="exact limit moments")
    moments_sub = moments.add_subparsers(dest="action", required=True)
    exact = moments_sub.add_parser("exact", parents=[common])
    exact.add_argument("--k", type=int, required=True)
    exact.add_argument("--a", type=int, default=None)
    exact.add_argument("--b", type=int, default=None)
    exact.add_argument("--powers", type=int, nargs="+", default=None)
    exact.add_argument("--L", type=float, default=None)
    exact.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    exact.add_argument("--chi", default="trivial")
    exact.add_argument("--spectrum", default=None)
    exact.add_argument("--model", default="bolza")

    for kind in ("clt", "energy-variance", "diag-trend"):
        experiment = sub.add_parser(kind, help=f"{kind} experiment")
        experiment_sub = experiment.add_subparsers(dest="action", required=True)
        run = experiment_sub.add_parser("run", parents=[common])
        run.add_argument("--config", default=None)

    verify = sub.add_parser("verify", parents=[common], help="run the verification suite")
    verify.add_argument("--full", action="store_true")
    return parser


HANDLERS = {
    "spectrum": cmd_spectrum,
    "homs": cmd_homs,
    "moments": cmd_moments,
    "clt": cmd_experiment,
    "energy-variance": cmd_experiment,
    "diag-trend": cmd_experiment,
    "verify": cmd_verify,
}


def main(argv: Optional[Sequence[str]] = None, vis: Optional[Visualizer] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    setup_logging(getattr(args, "verbose", False))
    vis = vis or Visualizer()
    if getattr(args, "seed", None) is None and args.command == "homs":
        args.seed = 0
    try:
        return HANDLERS[args.command](args, vis)
    except (ConfigError, UsageError, ParseError) as exc:
        vis.show_error(f"{type(exc).__name__}: {exc}")
        return EXIT_USAGE
    except CoversError as exc:
        vis.show_error(f"{type(exc).__name__}: {exc}")
        return EXIT_FAILED
