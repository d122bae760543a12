"""Command-line front end.

Subcommands: ``payment`` (print + verify a tier menu), ``run`` (single case
with trajectory export), ``batch`` (matched-seed scenario batches), and
``compare`` (batch preset that runs every method for the comparison
tables). Every run directory carries a ``manifest.json``; re-running any
subcommand with ``--manifest`` reproduces the artifact files byte for byte
on the same kernel backend.

Exit codes: 0 success, 2 configuration error, 3 verifier failure,
4 infeasible allocation.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import kernels
from .baselines import METHOD_CONTRACT
from .economics import (
    EconomicParams,
    GainMode,
    ParameterError,
    optimal_payment,
    payment_oracle,
    verify_ic_ir,
)
from .engine import InfeasibleAllocationError, PhysicsParams, Workspace
from .harness import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_MASTER_SEED,
    METHOD_ORDER,
    build_manifest,
    normalize_methods,
    run_batch,
    run_case,
    run_summary_payload,
    write_batch_outputs,
    write_assignments,
    write_json,
    write_trajectories,
)
from .scenarios import (
    SCENARIOS,
    GenerationConfig,
    GenerationError,
    ScenarioSpec,
    load_scenario_file,
    scenario_from_dict,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3
EXIT_INFEASIBLE = 4

OUT_ROOT_ENV = "CONTRACTALLOC_OUT"

log = logging.getLogger(__name__)


def _default_out_dir(command: str) -> Path:
    root = Path(os.environ.get(OUT_ROOT_ENV, "runs"))
    stamp = time.strftime("%Y%m%d-%H%M%S")
    candidate = root / f"{command}-{stamp}"
    suffix = 1
    while candidate.exists():
        candidate = root / f"{command}-{stamp}-{suffix}"
        suffix += 1
    return candidate


def _resolve_out(args, command: str) -> Path:
    out = Path(args.out) if args.out else _default_out_dir(command)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_scenario_ids(tokens) -> list[int]:
    ids: list[int] = []
    for tok in tokens:
        if tok == "all":
            ids.extend(sorted(SCENARIOS))
            continue
        try:
            sid = int(tok)
        except ValueError:
            raise ParameterError(f"scenario must be an id in 1..8 or 'all', got {tok!r}")
        if sid not in SCENARIOS:
            raise ParameterError(f"unknown scenario id {sid}; stock ids are 1..8")
        ids.append(sid)
    seen: set[int] = set()
    unique = [s for s in ids if not (s in seen or seen.add(s))]
    return unique


def _apply_overrides(spec: ScenarioSpec, args) -> ScenarioSpec:
    """Fold CLI parameter overrides into a scenario spec, re-validating."""
    econ_kwargs = {}
    if args.rate is not None:
        econ_kwargs["r"] = args.rate
    if args.gain_mode is not None:
        econ_kwargs["gain_mode"] = GainMode(args.gain_mode)
    phys_kwargs = {}
    for name in ("alpha", "beta", "epsilon", "r_safe", "d_coll"):
        value = getattr(args, name)
        if value is not None:
            phys_kwargs[name] = value
    if args.t_max is not None:
        phys_kwargs["t_max"] = args.t_max
    if args.workspace is not None:
        phys_kwargs["workspace"] = Workspace(*args.workspace)
    economics = replace(spec.economics, **econ_kwargs) if econ_kwargs else spec.economics
    physics = replace(spec.physics, **phys_kwargs) if phys_kwargs else spec.physics
    if econ_kwargs or phys_kwargs:
        spec = replace(spec, economics=economics, physics=physics)
    return spec


def _select_specs(args) -> list[ScenarioSpec]:
    if args.scenario_file and args.scenario:
        raise ParameterError("give either --scenario or --scenario-file, not both")
    if args.scenario_file:
        specs = [load_scenario_file(args.scenario_file)]
    elif args.scenario:
        specs = [SCENARIOS[sid] for sid in _parse_scenario_ids(args.scenario)]
    else:
        raise ParameterError("select scenarios with --scenario or --scenario-file")
    return [_apply_overrides(s, args) for s in specs]


def _parse_methods(arg) -> tuple[str, ...]:
    if arg is None:
        return (METHOD_CONTRACT,)
    tokens = [t.strip() for t in arg.split(",") if t.strip()]
    if not tokens:
        raise ParameterError("--methods needs at least one method name")
    if tokens == ["all"]:
        return METHOD_ORDER
    try:
        return normalize_methods(tokens)
    except ValueError as exc:
        raise ParameterError(str(exc)) from exc


def _generation_config(args) -> GenerationConfig:
    kwargs = {}
    if args.top_mass is not None:
        kwargs["top_mass"] = args.top_mass
    if args.concentration is not None:
        kwargs["concentration"] = args.concentration
    return GenerationConfig(**kwargs)


def _load_manifest(path, expected_command: str) -> dict:
    import json

    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("schema") != 1:
        raise ParameterError(f"unsupported manifest schema {manifest.get('schema')!r}")
    if manifest.get("command") != expected_command:
        raise ParameterError(
            f"manifest was written by {manifest.get('command')!r}, "
            f"not {expected_command!r}")
    backend = manifest.get("backend")
    if backend != kernels.BACKEND:
        raise ParameterError(
            f"manifest was produced on the {backend!r} kernel backend but this "
            f"process uses {kernels.BACKEND!r}; byte-identical replay is only "
            f"guaranteed on the same backend (set CONTRACTALLOC_KERNELS={backend})")
    return manifest


def _manifest_inputs(manifest: dict):
    specs = [scenario_from_dict(d) for d in manifest["scenarios"]]
    config = GenerationConfig(**manifest["generation"])
    methods = normalize_methods(manifest["methods"])
    return specs, config, methods, int(manifest["master_seed"]), int(manifest["cases"])


# --------------------------------------------------------------------------
# subcommands

def cmd_payment(args) -> int:
    params = EconomicParams(K=args.K, r=args.rate if args.rate is not None else 10.0,
                            gain_mode=GainMode(args.gain_mode or GainMode.TABLE_K_PLUS_1.value))
    menu = optimal_payment(params)
    print(f"tiers: {params.K}  rate: {params.r}  gain mode: {params.gain_mode.value}")

    def fmt(p: float) -> str:
        text = f"{p:.6g}"
        return text if ("." in text or "e" in text) else text + ".0"

    print("menu: (" + ", ".join(fmt(p) for p in menu.rho) + ")")

    report = verify_ic_ir(menu, params)
    print(f"worst constraint residual: {report.min_residual:.3e}")
    if params.K > 1:
        adj = max(abs(report.ic_up[(k, k + 1)]) for k in range(1, params.K))
        print(f"adjacent upward-IC slack |r - rho^k - (g(1) r - rho^(k+1))|: {adj:.3e}")
    ok = report.passed
    for line in report.failures():
        print(f"  violated: {line}")

    if args.K <= 4:
        oracle = payment_oracle(params)
        gap = max(abs(a - b) for a, b in zip(menu.rho, oracle.rho))
        print(f"oracle cross-check (vertex enumeration): max gap {gap:.3e}")
        ok = ok and gap < 1e-6
    print("verifier: " + ("PASS" if ok else "FAIL"))
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_run(args) -> int:
    if args.manifest:
        manifest = _load_manifest(args.manifest, "run")
        specs, config, methods, master_seed, _ = _manifest_inputs(manifest)
        spec = specs[0]
        case_index = int(manifest["case_index"])
    else:
        specs = _select_specs(args)
        if len(specs) != 1:
            raise ParameterError("run works on exactly one scenario")
        spec = specs[0]
        config = _generation_config(args)
        methods = _parse_methods(args.methods)
        master_seed = args.seed
        case_index = args.case
        manifest = build_manifest(command="run", scenario_specs=[spec],
                                  cases=1, master_seed=master_seed,
                                  methods=methods, config=config,
                                  case_index=case_index)

    out = _resolve_out(args, "run")
    run = run_case(spec, case_index, master_seed, methods, config)
    for method in methods:
        method_dir = out / method if len(methods) > 1 else out
        write_trajectories(method_dir, run, method)
        write_assignments(method_dir, run, method)
    write_json(out / "summary.json", run_summary_payload(run, manifest=manifest))
    write_json(out / "manifest.json", manifest)

    for rec in run.records:
        status = "converged" if rec.converged else "hit step cap"
        print(f"[{rec.method}] energy {rec.energy:.4f}  steps {rec.steps}  "
              f"min distance {rec.min_distance:.4f}  {status}")
    print(f"artifacts in {out}")
    return EXIT_OK


def _run_batches(args, command: str, default_methods: tuple[str, ...]) -> int:
    if args.manifest:
        manifest = _load_manifest(args.manifest, command)
        specs, config, methods, master_seed, cases = _manifest_inputs(manifest)
    else:
        specs = _select_specs(args)
        config = _generation_config(args)
        methods = _parse_methods(args.methods) if args.methods else default_methods
        master_seed = args.seed
        cases = args.cases
        manifest = build_manifest(command=command, scenario_specs=specs,
                                  cases=cases, master_seed=master_seed,
                                  methods=methods, config=config)

    out = _resolve_out(args, command)
    batches = []
    n_failures = 0
    for spec in specs:
        batch = run_batch(spec, cases=cases, master_seed=master_seed,
                          methods=methods, config=config)
        for case_index, message in batch.failures:
            n_failures += 1
            print(f"scenario {spec.id} case {case_index}: {message}", file=sys.stderr)
        batches.append(batch)

    if all(not b.records for b in batches):
        print("every case failed; no statistics to write", file=sys.stderr)
        infeasible = any("InfeasibleAllocationError" in msg
                         for b in batches for _, msg in b.failures)
        return EXIT_INFEASIBLE if infeasible else EXIT_CONFIG

    written = write_batch_outputs(out, batches, manifest)
    for path in written:
        print(f"wrote {path}")
    if n_failures:
        print(f"{n_failures} case(s) failed; see stderr", file=sys.stderr)
    return EXIT_OK


def cmd_batch(args) -> int:
    return _run_batches(args, "batch", (METHOD_CONTRACT,))


def cmd_compare(args) -> int:
    return _run_batches(args, "compare", METHOD_ORDER)


# --------------------------------------------------------------------------
# parser

def _add_scenario_args(sub, single_case: bool) -> None:
    sub.add_argument("--scenario", nargs="+", metavar="ID",
                     help="stock scenario id(s) 1..8, or 'all'")
    sub.add_argument("--scenario-file", metavar="PATH",
                     help="JSON file describing a custom scenario")
    sub.add_argument("--seed", type=int, default=DEFAULT_MASTER_SEED,
                     help="master seed for the matched-seed plan")
    if single_case:
        sub.add_argument("--case", type=int, default=1,
                         help="case index within the seed plan (default 1)")
        sub.add_argument("--methods", default=METHOD_CONTRACT,
                         help="comma-separated methods to run (default contract)")
    else:
        sub.add_argument("--cases", type=int, default=DEFAULT_BATCH_SIZE,
                         help=f"cases per scenario (default {DEFAULT_BATCH_SIZE})")
        sub.add_argument("--methods",
                         help="comma-separated subset of contract,robust,max,samp "
                              "or 'all'")
    sub.add_argument("--out", help="output directory (default: timestamped dir "
                                   f"under ${OUT_ROOT_ENV} or ./runs)")
    sub.add_argument("--manifest", metavar="PATH",
                     help="replay a previous run's manifest (overrides all "
                          "selection flags)")
    # economics / physics overrides
    sub.add_argument("--rate", type=float, help="base service gain r")
    sub.add_argument("--gain-mode", choices=[m.value for m in GainMode],
                     help="log-gain denominator convention")
    sub.add_argument("--alpha", type=float, help="descent gain")
    sub.add_argument("--beta", type=float, help="barrier gain")
    sub.add_argument("--epsilon", type=float, help="per-tier stop threshold")
    sub.add_argument("--t-max", type=int, help="tick cap")
    sub.add_argument("--r-safe", type=float, help="barrier activation radius")
    sub.add_argument("--d-coll", type=float, help="collision distance")
    sub.add_argument("--workspace", type=float, nargs=4,
                     metavar=("XMIN", "YMIN", "XMAX", "YMAX"))
    sub.add_argument("--top-mass", type=float,
                     help="expected belief mass on the true tier")
    sub.add_argument("--concentration", type=float,
                     help="belief sampler concentration")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contractalloc",
        description="Tier-priced service contracts with distributed robot "
                    "allocation: menu design, single runs, and batch studies.")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log engine diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)

    pay = sub.add_parser("payment", help="print and verify the optimal tier menu")
    pay.add_argument("--K", type=int, required=True, help="number of service tiers")
    pay.add_argument("--rate", "--r", dest="rate", type=float,
                     help="base service gain r (default 10)")
    pay.add_argument("--gain-mode", choices=[m.value for m in GainMode],
                     help="log-gain denominator convention")
    pay.set_defaults(func=cmd_payment)

    run = sub.add_parser("run", help="run one case and export trajectories")
    _add_scenario_args(run, single_case=True)
    run.set_defaults(func=cmd_run)

    batch = sub.add_parser("batch", help="matched-seed batch per scenario")
    _add_scenario_args(batch, single_case=False)
    batch.set_defaults(func=cmd_batch)

    comp = sub.add_parser("compare",
                          help="batch preset running all methods for the "
                               "comparison tables")
    _add_scenario_args(comp, single_case=False)
    comp.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GenerationError as exc:
        print(f"generation failed: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleAllocationError as exc:
        print(f"infeasible allocation: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
