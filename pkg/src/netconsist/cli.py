"""Command-line front end: ingest data, place factors, sample, report.

Subcommands:

* ``analyze``   - full pipeline; writes report.json, manifest.json, pips.csv,
  model_table.csv and optional per-chain traces into the output directory.
* ``structure`` - structural audit without sampling: pruning summary,
  bridges, independent loops and the Z matrix of the chosen method.
* ``oracle``    - exact enumeration vs sampler on small problems.

Exit codes: 0 success, 2 validation failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .analysis import build_report, model_table_csv, pips_csv, posterior_model_probs
from .design import build_design_matrix, matrix_dump
from .graphs import PLACEMENT_METHODS, comparison_graph, find_bridges, independent_loops, place_factors, z_dump
from .network import ValidationError, prune_disconnected, read_network
from .oracle import MAX_EXACT_FACTORS, enumerate_exact
from .priors import ConsistencyPrior, SpikeSlabConfig, pilot_psi, resolve_config
from .sampler import HeterogeneityPrior, McmcConfig, NumericalError, run_selection, write_trace

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _add_data_arguments(parser):
    parser.add_argument("--data", required=True, help="contrast CSV: study,t1,t2,y,se")
    parser.add_argument("--cov", default=None, help="multi-arm off-diagonal CSV: study,row,col,cov")
    parser.add_argument("--arms", default=None, help="arm-level CSV: study,treatment,se_arm")
    parser.add_argument("--reference", default=None, help="reference treatment id (default: first alphabetically)")
    parser.add_argument("--method", default="lu-ades", choices=sorted(PLACEMENT_METHODS),
                        help="inconsistency-factor placement method")


def _add_model_arguments(parser):
    parser.add_argument("--correlation", default="identity", choices=["identity", "zellner"])
    parser.add_argument("--g", default="auto", help="g-prior scale: 'auto' (= total contrasts) or a number")
    parser.add_argument("--pi-cons", type=float, default=None,
                        help="fixed prior probability of a consistent network (default 0.5)")
    parser.add_argument("--pi-cons-beta", type=float, nargs=2, metavar=("ALPHA", "BETA"), default=None,
                        help="Beta prior on the consistency probability")
    parser.add_argument("--omega", type=float, default=0.2, help="practical-significance threshold")
    parser.add_argument("--c", type=float, default=10.0, help="slab/spike scale ratio")
    parser.add_argument("--psi", default="auto", choices=["auto", "pilot"],
                        help="spike sds from the omega threshold or from a pilot run")
    parser.add_argument("--tau-prior", default="half-normal", choices=["half-normal", "uniform"],
                        help="heterogeneity prior family")
    parser.add_argument("--tau-scale", type=float, default=1.0,
                        help="half-normal scale / uniform upper bound")


def _add_mcmc_arguments(parser):
    parser.add_argument("--chains", type=int, default=2)
    parser.add_argument("--iters", type=int, default=300_000)
    parser.add_argument("--burnin", type=int, default=50_000)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--thin", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netconsist",
                                     description="Consistency assessment for network meta-analysis")
    parser.add_argument("--version", action="version", version=f"netconsist {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="place factors, sample, and write a consistency report")
    _add_data_arguments(analyze)
    _add_model_arguments(analyze)
    _add_mcmc_arguments(analyze)
    analyze.add_argument("--config", default=None, help="JSON config file; flags override its entries")
    analyze.add_argument("--out", required=True, help="output directory")
    analyze.add_argument("--traces", action="store_true", help="write per-chain draw logs")
    analyze.add_argument("--print-config", action="store_true",
                         help="print the fully resolved configuration and exit")

    structure = sub.add_parser("structure", help="structural audit without sampling")
    _add_data_arguments(structure)
    structure.add_argument("--out", default=None, help="optional directory for X/Z dumps")

    oracle = sub.add_parser("oracle", help="exact enumeration vs the sampler")
    _add_data_arguments(oracle)
    _add_mcmc_arguments(oracle)
    oracle.add_argument("--pi-cons", type=float, default=0.5)
    oracle.add_argument("--omega", type=float, default=0.2)
    oracle.add_argument("--c", type=float, default=10.0)
    oracle.add_argument("--tau", type=float, default=0.0, help="fixed heterogeneity sd for both paths")
    return parser


# config-file key -> argparse destination
_CONFIG_KEYS = {
    "method": "method", "reference": "reference", "correlation": "correlation",
    "g": "g", "pi_cons": "pi_cons", "pi_cons_beta": "pi_cons_beta",
    "omega": "omega", "c": "c", "psi": "psi",
    "tau_prior": "tau_prior", "tau_scale": "tau_scale",
    "chains": "chains", "iterations": "iters", "burn_in": "burnin",
    "seed": "seed", "thinning": "thin",
}


def _resolve_settings(args) -> dict:
    """Merge the config file (if any) with the command line into one dict.

    Explicit command-line flags win; config-file entries replace built-in
    defaults for flags left at their default value.
    """
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_settings = json.load(fh)
        unknown = set(file_settings) - set(_CONFIG_KEYS)
        if unknown:
            raise ValidationError([f"config file: unknown keys {sorted(unknown)}"])
        defaults = build_parser().parse_args(["analyze", "--data", args.data, "--out", "."])
        for key, value in file_settings.items():
            dest = _CONFIG_KEYS[key]
            if getattr(args, dest) == getattr(defaults, dest):
                setattr(args, dest, value)
    settings = {
        "method": args.method,
        "reference": args.reference,
        "correlation": args.correlation,
        "g": args.g,
        "pi_cons": args.pi_cons,
        "pi_cons_beta": list(args.pi_cons_beta) if args.pi_cons_beta else None,
        "omega": args.omega,
        "c": args.c,
        "psi": args.psi,
        "tau_prior": args.tau_prior,
        "tau_scale": args.tau_scale,
        "chains": args.chains,
        "iterations": args.iters,
        "burn_in": args.burnin,
        "seed": args.seed,
        "thinning": args.thin,
    }
    if settings["pi_cons"] is not None and settings["pi_cons_beta"] is not None:
        raise ValidationError(["choose either --pi-cons or --pi-cons-beta, not both"])
    if settings["pi_cons"] is None and settings["pi_cons_beta"] is None:
        settings["pi_cons"] = 0.5
    return settings


def _consistency_prior(settings) -> ConsistencyPrior:
    if settings["pi_cons_beta"] is not None:
        return ConsistencyPrior.from_beta(*settings["pi_cons_beta"])
    return ConsistencyPrior.fixed(settings["pi_cons"])


def _tau_prior(settings) -> HeterogeneityPrior:
    if settings["tau_prior"] == "uniform":
        return HeterogeneityPrior.uniform(settings["tau_scale"])
    return HeterogeneityPrior.half_normal(settings["tau_scale"])


def _spike_slab(settings, network, X, spec) -> SpikeSlabConfig:
    g = None if settings["g"] == "auto" else float(settings["g"])
    ss = SpikeSlabConfig(c=settings["c"], omega=settings["omega"],
                         correlation=settings["correlation"], g=g)
    ss = resolve_config(ss, spec.p, network.n_contrasts)
    if settings["psi"] == "pilot" and spec.p:
        pilot_cfg = McmcConfig(chains=2, iterations=20_000, burn_in=5_000,
                               seed=settings["seed"] + 1)
        result = pilot_psi(network, X, spec.Z, pilot_cfg, c=settings["c"],
                           tau_prior=_tau_prior(settings))
        for warning in result.warnings:
            print(f"warning: {warning}", file=sys.stderr)
        ss = SpikeSlabConfig(c=settings["c"], omega=settings["omega"], psi=result.psi,
                             correlation=settings["correlation"], g=g)
        ss = resolve_config(ss, spec.p, network.n_contrasts)
    return ss


def cmd_analyze(args) -> int:
    settings = _resolve_settings(args)
    network = read_network(args.data, args.cov, args.arms, reference=settings["reference"])
    network, removed = prune_disconnected(network)
    spec = place_factors(network, settings["method"])
    X = build_design_matrix(network)
    ss = _spike_slab(settings, network, X.entries, spec)
    resolved = dict(settings)
    resolved["psi_values"] = list(ss.psi) if ss.psi else []
    resolved["g_value"] = ss.g
    resolved["removed_treatments"] = list(removed)

    if args.print_config:
        print(json.dumps(resolved, indent=2, sort_keys=True))
        return EXIT_OK

    mcfg = McmcConfig(chains=settings["chains"], iterations=settings["iterations"],
                      burn_in=settings["burn_in"], seed=settings["seed"],
                      thinning=settings["thinning"])
    chains = run_selection(network, X.entries, spec, ss, _consistency_prior(settings),
                           mcfg, tau_prior=_tau_prior(settings), parallel=True)
    report = build_report(spec, chains, settings=resolved)

    out = args.out
    os.makedirs(out, exist_ok=True)
    manifest = {
        "inputs": {"data": args.data, "cov": args.cov, "arms": args.arms,
                   "config": getattr(args, "config", None)},
        "method": settings["method"],
        "settings": resolved,
        "seed": settings["seed"],
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(),
    }
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    with open(os.path.join(out, "report.json"), "w") as fh:
        fh.write(report.to_json())
    with open(os.path.join(out, "pips.csv"), "w") as fh:
        fh.write(pips_csv(report))
    with open(os.path.join(out, "model_table.csv"), "w") as fh:
        fh.write(model_table_csv(report))
    if args.traces and chains:
        trace_dir = os.path.join(out, "traces")
        os.makedirs(trace_dir, exist_ok=True)
        for chain in chains:
            write_trace(chain, os.path.join(trace_dir, f"chain-{chain.chain_index}.csv"))

    if report.consistent_by_construction:
        print("consistent by construction: no closed loops leave a testable factor")
    else:
        print(f"consistent-model probability: {report.consistent_prob:.4f}")
        po = report.po_consistency
        bound = {"lower": ">= ", "upper": "<= "}.get(po.bound, "")
        print(f"posterior odds of consistency: {bound}{po.value:.4g}"
              f" ({report.evidence}{' for ' + report.evidence_direction if report.evidence_direction else ''})")
        for label, value, err in zip(report.factor_labels, report.pips, report.pip_mcse):
            print(f"  PIP {label}: {value:.4f} (mc se {err:.4f})")
    return EXIT_OK


def cmd_structure(args) -> int:
    network = read_network(args.data, args.cov, args.arms, reference=args.reference)
    network, removed = prune_disconnected(network)
    graph = comparison_graph(network)
    bridges = find_bridges(graph)
    loops = independent_loops(graph)
    ids = network.treatment_ids

    print(f"treatments ({network.n_treatments}): {', '.join(ids)} (reference {network.reference})")
    if removed:
        print(f"pruned disconnected treatments: {', '.join(removed)}")
    print(f"studies: {len(network.studies)}, contrasts: {network.n_contrasts}")
    designs = sorted({s.design for s in network.studies})
    print(f"designs: {', '.join('-'.join(d) for d in designs)}")
    print(f"bridges: {', '.join(f'{ids[a]}-{ids[b]}' for a, b in sorted(bridges)) or 'none'}")
    print(f"independent loops ({len(loops)}):")
    for loop, chord in zip(loops.loops, loops.chords):
        cycle = "-".join(ids[n] for n in loop)
        print(f"  {cycle} (distinguishing edge {ids[chord[0]]}-{ids[chord[1]]})")
    spec = place_factors(network, args.method)
    print(f"method {args.method}: {spec.p} inconsistency factor(s)")
    print(z_dump(spec, network), end="")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        X = build_design_matrix(network)
        labels = [f"{s.id}:{c.t1}-{c.t2}" for s, c in network.observations()]
        with open(os.path.join(args.out, "X.csv"), "w") as fh:
            fh.write(matrix_dump(X.entries, X.columns, labels))
        with open(os.path.join(args.out, "Z.csv"), "w") as fh:
            fh.write(z_dump(spec, network))
    return EXIT_OK


def cmd_oracle(args) -> int:
    network = read_network(args.data, args.cov, args.arms, reference=args.reference)
    network, _ = prune_disconnected(network)
    spec = place_factors(network, args.method)
    if spec.p > MAX_EXACT_FACTORS:
        print(f"error: exact enumeration handles at most {MAX_EXACT_FACTORS} factors "
              f"(this placement has {spec.p})", file=sys.stderr)
        return EXIT_VALIDATION
    X = build_design_matrix(network)
    ss = resolve_config(SpikeSlabConfig(c=args.c, omega=args.omega), spec.p, network.n_contrasts)
    cprior = ConsistencyPrior.fixed(args.pi_cons)
    exact = enumerate_exact(network, X.entries, spec.Z, ss, cprior, tau_fixed=args.tau)
    mcfg = McmcConfig(chains=args.chains, iterations=args.iters, burn_in=args.burnin,
                      seed=args.seed, thinning=args.thin)
    chains = run_selection(network, X.entries, spec, ss, cprior, mcfg,
                           tau_prior=HeterogeneityPrior.fixed(args.tau), parallel=True)
    sampled = posterior_model_probs(chains)
    print("model  exact      sampled    |diff|")
    for mid in sorted(exact.model_table):
        e = exact.model_table[mid]
        s = sampled.get(mid, 0.0)
        members = "+".join(lab for j, lab in enumerate(spec.labels) if mid >> j & 1) or "(consistency)"
        print(f"{mid:5d}  {e:.6f}  {s:.6f}  {abs(e - s):.6f}  {members}")
    worst = max(abs(exact.model_table[m] - sampled.get(m, 0.0)) for m in exact.model_table)
    print(f"largest absolute difference: {worst:.6f}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"analyze": cmd_analyze, "structure": cmd_structure, "oracle": cmd_oracle}[args.command]
    try:
        return handler(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
