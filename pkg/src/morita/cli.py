"""
Command-line front end: gen, verify, demo and report.

Exit codes: 0 when every check passes, 1 when a check fails or stored data
does not validate or a bundle is missing, 2 for unusable input (bad arguments,
scenarios or report paths).
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from utils.config import ALG_TOL, DEFAULT_SEED, INSTANCE_DIR
from utils.logger import logger, set_level
from utils.store import list_bundles, load_bundle, load_report, save_bundle, save_report

from .bimodule import corner_realization
from .codec import decode_scenario
from .errors import BundleNotFoundError, MoritaError, ScenarioError, ValidationError
from .fdca import relative_commutant_member, weighted_conditional_expectation
from .generator import PRESETS, InclusionSpec, Scenario, build_inclusion, build_pair, generate, preset
from .modular import (
    check_modular_condition,
    conjugation_check,
    oracle_report,
    shift_transfer_report,
    solve_modular_uniqueness,
    theta_from_quasibasis,
)
from .quasibasis import construct_for_ce, verify_quasi_basis
from .report import Report
from .suites import SUITES, resolve_suites, run_suites, verify_bundles
from .transfer import transfer


EXIT_OK, EXIT_FAILED, EXIT_INPUT = 0, 1, 2


def _tolerance(value):
    tol = float(value)
    if not tol >= np.finfo(float).eps:
        raise argparse.ArgumentTypeError(f"tolerance must be at least machine epsilon, got {value}")
    return tol


def _weights(value):
    try:
        parts = [float(w) for w in value.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"weights must be comma-separated numbers: {value}") from exc
    if len(parts) != 2 or min(parts) <= 0:
        raise argparse.ArgumentTypeError("--h needs two positive weights, e.g. 0.9,0.1")
    return tuple(parts)


def _suites(value):
    try:
        return resolve_suites(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser():
    parser = argparse.ArgumentParser(prog="morita-lab", description="Transfer of bimodule maps along Morita equivalent inclusions")
    parser.add_argument("--verbose", "-v", action="store_true", help="Log every check")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="Generate an instance bundle")
    source = gen.add_mutually_exclusive_group()
    source.add_argument("--preset", choices=sorted(PRESETS), default="corner-m2", help="Named scenario")
    source.add_argument("--scenario", type=Path, help="Scenario JSON file")
    gen.add_argument("--seed", type=int, default=None, help=f"Override the scenario seed (default {DEFAULT_SEED})")
    gen.add_argument("--name", help="Bundle name (default: preset name)")
    gen.add_argument("--out", type=Path, default=None, help=f"Instance directory (default {INSTANCE_DIR})")
    gen.add_argument("--tol", type=_tolerance, default=ALG_TOL)
    gen.add_argument("--format", choices=["text", "json"], default="text")

    verify = sub.add_parser("verify", help="Run verification suites on stored bundles")
    verify.add_argument("bundles", nargs="*", help="Bundle names (default: every stored bundle)")
    verify.add_argument("--suite", type=_suites, default=list(SUITES), help=f"'all' or a subset of {','.join(SUITES)}")
    verify.add_argument("--seed", type=int, default=DEFAULT_SEED)
    verify.add_argument("--tol", type=_tolerance, default=ALG_TOL)
    verify.add_argument("--format", choices=["text", "json"], default="text")
    verify.add_argument("--root", type=Path, default=None, help=f"Instance directory (default {INSTANCE_DIR})")
    verify.add_argument("--out", type=Path, help="Write the JSON report here")

    demo = sub.add_parser("demo", help="Weighted-trace walkthrough on C·1 ⊂ M_2")
    demo.add_argument("--h", type=_weights, default=(2 / 3, 1 / 3), help="Diagonal weight h, e.g. 0.9,0.1")
    demo.add_argument("--seed", type=int, default=DEFAULT_SEED)
    demo.add_argument("--tol", type=_tolerance, default=ALG_TOL)
    demo.add_argument("--format", choices=["text", "json"], default="text")

    report = sub.add_parser("report", help="Render a stored JSON report")
    report.add_argument("path", type=Path, help="Report file or bundle directory")
    report.add_argument("--format", choices=["text", "json"], default="text")
    return parser


def _emit(report, name, fmt):
    if fmt == "json":
        print(json.dumps(report.to_dict(name), indent=1))
    else:
        print(report.render_text(name))


def cmd_gen(args):
    if args.scenario is not None:
        try:
            with open(args.scenario, encoding="utf-8") as fh:
                scenario = decode_scenario(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ScenarioError(f"cannot read scenario {args.scenario}: {exc}") from exc
        if args.seed is not None:
            scenario = replace(scenario, seed=args.seed)
        name = args.name or args.scenario.stem
    else:
        scenario = preset(args.preset, args.seed)
        name = args.name or args.preset
    bundle = generate(scenario, name, args.tol)
    path = save_bundle(bundle, args.out)
    report = run_suites(bundle, ["construction"], args.tol, scenario.seed)
    save_report(report.to_dict(name), path / "validation.json")
    _emit(report, name, args.format)
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_verify(args):
    names = args.bundles or list_bundles(args.root)
    if not names:
        raise BundleNotFoundError(f"no bundles under {args.root or INSTANCE_DIR}")
    bundles = [load_bundle(name, args.root, args.tol) for name in names]
    results = verify_bundles(bundles, args.suite, args.tol, args.seed)
    docs = [report.to_dict(name) for name, report in results.items()]
    for name, report in results.items():
        _emit(report, name, args.format)
    if args.out is not None:
        save_report(docs[0] if len(docs) == 1 else docs, args.out)
    passed = all(report.passed for report in results.values())
    logger.info("Verified %d bundle(s): %s", len(results), "all passed" if passed else "failures found")
    return EXIT_OK if passed else EXIT_FAILED


def run_demo(weights, seed=DEFAULT_SEED, tol=ALG_TOL):
    """(report, factor): every identity of the weighted-trace walkthrough and the θ(e12) factor."""
    spec = InclusionSpec((1,), (2,), ((2,),))
    inc = build_inclusion(spec, tol)
    h = np.diag(np.asarray(weights, dtype=float)).astype(np.complex128)
    if not relative_commutant_member(inc, h, tol):
        raise ScenarioError("weight is not in the relative commutant")
    phi = weighted_conditional_expectation(inc, h, tol)
    qb = construct_for_ce(inc, phi, tol=tol)
    theta = theta_from_quasibasis(qb, tol=tol)

    report = verify_quasi_basis(qb, tol)
    report.extend(check_modular_condition(phi, theta, tol))
    report.extend(solve_modular_uniqueness(phi, theta, tol))
    report.extend(oracle_report(phi, h, theta, tol))

    scenario = Scenario(seed, spec, 2, (1,), "weighted_trace", weights=tuple(weights))
    pair = build_pair(inc, scenario, np.random.default_rng(seed), tol)
    real = corner_realization(pair, tol)
    _, _, conditions = transfer(pair, phi, tol)
    report.extend(conditions)
    report.extend(conjugation_check(real, phi, qb, tol))
    report.extend(shift_transfer_report(real, phi, h, tol))

    e12 = np.zeros((2, 2), dtype=np.complex128)
    e12[0, 1] = 1.0
    factor = theta(e12)[0, 1].real
    return report, factor


def cmd_demo(args):
    report, factor = run_demo(args.h, args.seed, args.tol)
    if args.format == "json":
        doc = report.to_dict("demo")
        doc["theta_e12_factor"] = factor
        print(json.dumps(doc, indent=1))
    else:
        print(report.render_text("demo"))
        if abs(factor - 1.0) <= 1e3 * args.tol:
            print("θ = id (h is tracial up to scale)")
        print(f"θ(e12) = {factor:.6g}·e12")
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_report(args):
    doc = load_report(args.path)
    items = doc if isinstance(doc, list) else [doc]
    passed = True
    for item in items:
        report = Report.from_dict(item)
        passed = passed and bool(item.get("pass", report.passed))
        if args.format == "json":
            print(json.dumps(item, indent=1))
        else:
            print(report.render_text(item.get("bundle", "")))
    return EXIT_OK if passed else EXIT_FAILED


COMMANDS = {"gen": cmd_gen, "verify": cmd_verify, "demo": cmd_demo, "report": cmd_report}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.verbose:
        set_level(logging.DEBUG)
    try:
        return COMMANDS[args.command](args)
    except BundleNotFoundError as exc:
        logger.error("%s", exc)
        print(f"missing bundle: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except (ScenarioError, FileNotFoundError) as exc:
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValidationError as exc:
        logger.error("Validation failed: %s", exc)
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except MoritaError as exc:
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
