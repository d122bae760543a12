"""Batch experiment harness: runs the contract pipeline and the baselines
over seeded scenario cases, aggregates mean/std statistics, and writes the
CSV/JSON artifacts (per-case records, summary tables, run manifests).

All aggregation is a deterministic fold in case-index order, and no output
file embeds timestamps or absolute paths, so re-running a manifest on the
same kernel backend reproduces every artifact byte for byte.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .baselines import (
    BASELINE_METHODS,
    METHOD_CONTRACT,
    METHOD_MAX,
    METHOD_ROBUST,
    METHOD_SAMPLE,
    TypeEstimate,
    count_mismatches,
    estimate_max,
    estimate_sample,
    run_robust,
    run_with_types,
    true_type_energy,
)
from .economics import PaymentMenu, optimal_payment, user_best_response
from .engine import AllocationResult, InfeasibleAllocationError
from .scenarios import (
    Case,
    CaseSeedPlan,
    GenerationConfig,
    GenerationError,
    ScenarioSpec,
    generate_case,
    scenario_to_dict,
)

METHOD_ORDER = (METHOD_CONTRACT, METHOD_ROBUST, METHOD_MAX, METHOD_SAMPLE)
DEFAULT_BATCH_SIZE = 50
DEFAULT_MASTER_SEED = 20240
MANIFEST_SCHEMA = 1

RECORD_FIELDS = (
    "scenario", "case", "method", "energy", "realized_energy", "mismatches",
    "difference", "steps", "converged", "min_distance", "degeneracies",
)


def normalize_methods(methods) -> tuple[str, ...]:
    """Validate and put method names in canonical order, deduplicated."""
    if methods is None:
        return METHOD_ORDER
    requested = list(methods)
    known = set(METHOD_ORDER)
    for name in requested:
        if name not in known:
            raise ValueError(f"unknown method {name!r}; choose from {sorted(known)}")
    return tuple(m for m in METHOD_ORDER if m in requested)


@dataclass(frozen=True)
class CaseMethodRecord:
    """Flat per-(case, method) metrics row — the unit all statistics and the
    records CSV are built from."""

    scenario: int
    case: int
    method: str
    energy: float
    realized_energy: float
    mismatches: int | None
    steps: int
    per_type_steps: tuple[int, ...]
    converged: bool
    min_distance: float
    degeneracies: int


@dataclass
class CaseRun:
    """Full product of one case: the drawn population, menu, per-method
    engine results, per-user tier labels (None for the distributional
    robust method), and the flat metric records."""

    case: Case
    menu: PaymentMenu
    results: dict[str, AllocationResult]
    labels: dict[str, tuple[int, ...] | None]
    records: list[CaseMethodRecord]


def _record_for(spec: ScenarioSpec, case_index: int, method: str,
                result: AllocationResult, energy: float, realized: float,
                mismatches: int | None) -> CaseMethodRecord:
    return CaseMethodRecord(
        scenario=spec.id,
        case=case_index,
        method=method,
        energy=float(energy),
        realized_energy=float(realized),
        mismatches=mismatches,
        steps=result.max_steps,
        per_type_steps=tuple(tr.steps for tr in result.traces),
        converged=result.all_converged,
        min_distance=float(result.min_distance),
        degeneracies=result.degeneracies,
    )


def run_case(spec: ScenarioSpec, case_index: int, master_seed: int = DEFAULT_MASTER_SEED,
             methods=None, config: GenerationConfig | None = None) -> CaseRun:
    """Generate one case and run every requested method on it.

    The contract pipeline is payment menu -> user best response -> per-tier
    allocation of the reported tiers; max/sample differ only in how the
    per-user tier label is produced; robust runs the belief-weighted
    deployment. The sample estimator draws from a stream keyed by scenario
    id, so it is part of the method, not the shared population draw.
    """
    methods = normalize_methods(methods)
    case = generate_case(spec, case_index, master_seed, config)
    plan = CaseSeedPlan(master_seed=master_seed, case=case_index)
    menu = optimal_payment(spec.economics)

    q = case.user_positions
    theta = case.true_types
    robots_by_type = case.robots_by_type()

    results: dict[str, AllocationResult] = {}
    labels: dict[str, tuple[int, ...] | None] = {}
    records: list[CaseMethodRecord] = []

    for method in methods:
        if method == METHOD_ROBUST:
            result, energy = run_robust(q, case.beliefs, robots_by_type, spec.physics)
            labels[method] = None
            mismatches = None
        else:
            if method == METHOD_CONTRACT:
                tiers = tuple(user_best_response(u.theta, menu, spec.economics)
                              for u in case.users)
            elif method == METHOD_MAX:
                tiers = tuple(estimate_max(u.p) for u in case.users)
            else:
                rng = plan.sampler_rng(spec.id)
                tiers = tuple(estimate_sample(u.p, rng) for u in case.users)
            result = run_with_types(q, tiers, robots_by_type, spec.physics)
            energy = result.total_energy
            labels[method] = tiers
            mismatches = count_mismatches(TypeEstimate(method=method, values=tiers), theta)
        realized = true_type_energy(q, theta, [tr.final_positions for tr in result.traces])
        results[method] = result
        records.append(_record_for(spec, case_index, method, result, energy,
                                   realized, mismatches))

    return CaseRun(case=case, menu=menu, results=results, labels=labels, records=records)


@dataclass
class BatchResult:
    """All per-case records for one scenario batch, plus any per-case
    failures (the batch keeps going on infeasible or ungeneratable cases)."""

    spec: ScenarioSpec
    master_seed: int
    cases: int
    methods: tuple[str, ...]
    config: GenerationConfig
    records: list[CaseMethodRecord]
    failures: list[tuple[int, str]]
    runs: list[CaseRun] | None = None


def run_batch(spec: ScenarioSpec, cases: int = DEFAULT_BATCH_SIZE,
              master_seed: int = DEFAULT_MASTER_SEED, methods=None,
              config: GenerationConfig | None = None,
              keep_runs: bool = False) -> BatchResult:
    """Run a matched-seed batch of cases (indices 1..cases).

    Per-case traces are dropped unless ``keep_runs`` (a full 8-scenario
    batch would otherwise hold hundreds of megabytes of trajectories);
    failures are collected with their case index instead of aborting the
    batch.
    """
    if cases < 1:
        raise ValueError("cases must be at least 1")
    methods = normalize_methods(methods)
    config = config or GenerationConfig()
    records: list[CaseMethodRecord] = []
    failures: list[tuple[int, str]] = []
    runs: list[CaseRun] = []
    for case_index in range(1, cases + 1):
        try:
            run = run_case(spec, case_index, master_seed, methods, config)
        except (InfeasibleAllocationError, GenerationError) as exc:
            failures.append((case_index, f"{type(exc).__name__}: {exc}"))
            continue
        records.extend(run.records)
        if keep_runs:
            runs.append(run)
    return BatchResult(spec=spec, master_seed=master_seed, cases=cases,
                       methods=methods, config=config, records=records,
                       failures=failures, runs=runs if keep_runs else None)


# --------------------------------------------------------------------------
# statistics and table-shaped summaries

@dataclass(frozen=True)
class Stats:
    """Sample mean / sample standard deviation (ddof=1; 0.0 for n=1)."""

    mean: float
    std: float
    n: int

    @classmethod
    def of(cls, values) -> "Stats":
        arr = np.asarray(list(values), dtype=np.float64)
        if arr.size == 0:
            raise ValueError("cannot summarize an empty sample")
        std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
        return cls(mean=float(arr.mean()), std=std, n=int(arr.size))

    def as_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "n": self.n}


@dataclass
class MethodSummary:
    method: str
    n_cases: int
    energy: Stats
    realized_energy: Stats
    steps: Stats
    mismatches: Stats | None
    difference: Stats | None
    converged_fraction: float
    min_distance: float
    degeneracies: int


@dataclass
class ScenarioSummary:
    scenario: int
    K: int
    M: int
    N: int
    master_seed: int
    menu: tuple[float, ...]
    failures: list[tuple[int, str]]
    methods: dict[str, MethodSummary]


def summarize_batch(batch: BatchResult) -> ScenarioSummary:
    """Aggregate one scenario batch into per-method mean/std statistics.

    Energy differences are case-matched baseline-minus-contract values and
    exist only when the contract method ran in the same batch.
    """
    spec = batch.spec
    by_method: dict[str, list[CaseMethodRecord]] = {m: [] for m in batch.methods}
    for rec in batch.records:
        by_method[rec.method].append(rec)
    contract_by_case = {rec.case: rec.energy
                        for rec in by_method.get(METHOD_CONTRACT, [])}

    methods: dict[str, MethodSummary] = {}
    for method in batch.methods:
        recs = by_method[method]
        if not recs:
            continue
        recs = sorted(recs, key=lambda r: r.case)
        diffs = None
        if method != METHOD_CONTRACT and contract_by_case:
            paired = [r.energy - contract_by_case[r.case] for r in recs
                      if r.case in contract_by_case]
            if paired:
                diffs = Stats.of(paired)
        mism = None
        if all(r.mismatches is not None for r in recs):
            mism = Stats.of([r.mismatches for r in recs])
        methods[method] = MethodSummary(
            method=method,
            n_cases=len(recs),
            energy=Stats.of([r.energy for r in recs]),
            realized_energy=Stats.of([r.realized_energy for r in recs]),
            steps=Stats.of([r.steps for r in recs]),
            mismatches=mism,
            difference=diffs,
            converged_fraction=float(np.mean([r.converged for r in recs])),
            min_distance=float(min(r.min_distance for r in recs)),
            degeneracies=int(sum(r.degeneracies for r in recs)),
        )

    return ScenarioSummary(
        scenario=spec.id,
        K=spec.K,
        M=spec.M,
        N=spec.N,
        master_seed=batch.master_seed,
        menu=optimal_payment(spec.economics).rho,
        failures=list(batch.failures),
        methods=methods,
    )


def summarize(batches: list[BatchResult]) -> list[ScenarioSummary]:
    return [summarize_batch(b) for b in sorted(batches, key=lambda b: b.spec.id)]


def _fmt(value) -> str:
    """Canonical CSV cell text: shortest round-trip repr for floats, empty
    for missing values."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def deployment_rows(summaries: list[ScenarioSummary]) -> list[dict]:
    """Contract-pipeline table: menu plus step and energy statistics."""
    rows = []
    for s in summaries:
        m = s.methods.get(METHOD_CONTRACT)
        if m is None:
            continue
        rows.append({
            "scenario": s.scenario, "K": s.K, "M": s.M, "N": s.N,
            "menu": " ".join(repr(p) for p in s.menu),
            "steps_mean": m.steps.mean, "steps_std": m.steps.std,
            "energy_mean": m.energy.mean, "energy_std": m.energy.std,
            "cases": m.n_cases,
        })
    return rows


def baseline_energy_rows(summaries: list[ScenarioSummary]) -> list[dict]:
    """Baseline energy table; realized (true-tier) columns are a non-stock
    diagnostic."""
    rows = []
    for s in summaries:
        for method in BASELINE_METHODS:
            m = s.methods.get(method)
            if m is None:
                continue
            rows.append({
                "scenario": s.scenario, "method": method,
                "energy_mean": m.energy.mean, "energy_std": m.energy.std,
                "realized_mean": m.realized_energy.mean,
                "realized_std": m.realized_energy.std,
                "cases": m.n_cases,
            })
    return rows


def mismatch_rows(summaries: list[ScenarioSummary]) -> list[dict]:
    rows = []
    for s in summaries:
        for method in (METHOD_CONTRACT, METHOD_MAX, METHOD_SAMPLE):
            m = s.methods.get(method)
            if m is None or m.mismatches is None:
                continue
            rows.append({
                "scenario": s.scenario, "method": method,
                "mismatch_mean": m.mismatches.mean,
                "mismatch_std": m.mismatches.std,
                "cases": m.n_cases,
            })
    return rows


def difference_rows(summaries: list[ScenarioSummary]) -> list[dict]:
    """Per-scenario mean/std of case-wise baseline-minus-contract energies;
    empty when only the contract method ran."""
    rows = []
    for s in summaries:
        for method in BASELINE_METHODS:
            m = s.methods.get(method)
            if m is None or m.difference is None:
                continue
            rows.append({
                "scenario": s.scenario, "method": method,
                "difference_mean": m.difference.mean,
                "difference_std": m.difference.std,
                "cases": m.difference.n,
            })
    return rows


def summary_payload(summaries: list[ScenarioSummary], *, manifest: dict | None = None) -> dict:
    """JSON-ready nested summary (stable key order comes from sort_keys at
    dump time)."""
    payload: dict = {"scenarios": {}}
    if manifest is not None:
        payload["manifest"] = manifest
    for s in summaries:
        entry: dict = {
            "K": s.K, "M": s.M, "N": s.N,
            "master_seed": s.master_seed,
            "menu": list(s.menu),
            "failures": [{"case": c, "error": msg} for c, msg in s.failures],
            "methods": {},
        }
        for method, m in s.methods.items():
            entry["methods"][method] = {
                "cases": m.n_cases,
                "energy": m.energy.as_dict(),
                "realized_energy": m.realized_energy.as_dict(),
                "steps": m.steps.as_dict(),
                "mismatches": m.mismatches.as_dict() if m.mismatches else None,
                "difference": m.difference.as_dict() if m.difference else None,
                "converged_fraction": m.converged_fraction,
                "min_distance": m.min_distance,
                "degeneracies": m.degeneracies,
            }
        payload["scenarios"][str(s.scenario)] = entry
    return payload


# --------------------------------------------------------------------------
# artifact writers (deterministic: fixed row order, repr floats, "\n" EOL)

def write_csv(path, fieldnames, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row.get(f) if isinstance(row, dict) else getattr(row, f))
                             for f in fieldnames])


def write_json(path, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def record_rows(records: list[CaseMethodRecord]) -> list[dict]:
    """Flat rows for the per-case records CSV, difference column included
    when the matching contract record exists."""
    contract = {(r.scenario, r.case): r.energy for r in records
                if r.method == METHOD_CONTRACT}
    rows = []
    ordered = sorted(records, key=lambda r: (r.scenario, r.case,
                                             METHOD_ORDER.index(r.method)))
    for r in ordered:
        ref = contract.get((r.scenario, r.case))
        diff = None if (r.method == METHOD_CONTRACT or ref is None) else r.energy - ref
        rows.append({
            "scenario": r.scenario, "case": r.case, "method": r.method,
            "energy": r.energy, "realized_energy": r.realized_energy,
            "mismatches": r.mismatches, "difference": diff,
            "steps": r.steps, "converged": r.converged,
            "min_distance": r.min_distance, "degeneracies": r.degeneracies,
        })
    return rows


def write_records_csv(path, records: list[CaseMethodRecord]) -> None:
    write_csv(path, RECORD_FIELDS, record_rows(records))


def build_manifest(*, command: str, scenario_specs: list[ScenarioSpec], cases: int,
                   master_seed: int, methods: tuple[str, ...],
                   config: GenerationConfig, case_index: int | None = None) -> dict:
    """Everything needed to reproduce a run byte-for-byte, and nothing
    environment-specific except the kernel backend (bit-level trajectories
    differ between backends, so replay verifies it)."""
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "command": command,
        "backend": kernels.BACKEND,
        "master_seed": master_seed,
        "cases": cases,
        "methods": list(methods),
        "generation": {
            "top_mass": config.top_mass,
            "concentration": config.concentration,
            "placement_retries": config.placement_retries,
        },
        "scenarios": [scenario_to_dict(s) for s in scenario_specs],
    }
    if case_index is not None:
        manifest["case_index"] = case_index
    return manifest


def write_batch_outputs(out_dir, batches: list[BatchResult], manifest: dict) -> list[Path]:
    """Write the full batch artifact set; returns the paths written."""
    out = Path(out_dir)
    summaries = summarize(batches)
    records = [rec for b in batches for rec in b.records]
    written = []

    def _write_csv(name, fields, rows):
        p = out / name
        write_csv(p, fields, rows)
        written.append(p)

    _write_csv("records.csv", RECORD_FIELDS, record_rows(records))
    _write_csv("deployment.csv",
               ("scenario", "K", "M", "N", "menu", "steps_mean", "steps_std",
                "energy_mean", "energy_std", "cases"),
               deployment_rows(summaries))
    _write_csv("baseline_energy.csv",
               ("scenario", "method", "energy_mean", "energy_std",
                "realized_mean", "realized_std", "cases"),
               baseline_energy_rows(summaries))
    _write_csv("mismatches.csv",
               ("scenario", "method", "mismatch_mean", "mismatch_std", "cases"),
               mismatch_rows(summaries))
    _write_csv("energy_differences.csv",
               ("scenario", "method", "difference_mean", "difference_std", "cases"),
               difference_rows(summaries))

    summary_path = out / "summary.json"
    write_json(summary_path, summary_payload(summaries, manifest=manifest))
    written.append(summary_path)
    manifest_path = out / "manifest.json"
    write_json(manifest_path, manifest)
    written.append(manifest_path)
    return written


# --------------------------------------------------------------------------
# single-run artifact writers (trajectories + assignment pairs)

def tier_robot_ids(case: Case) -> list[list[int]]:
    """Global robot ids grouped by tier, in the order the engine sees them."""
    groups: list[list[int]] = [[] for _ in range(case.spec.K)]
    for robot in case.robots:
        groups[robot.service_type - 1].append(robot.id)
    return groups


def write_trajectories(out_dir, run: CaseRun, method: str) -> list[Path]:
    """One CSV per tier with columns (t, type, robot_id, x, y): all recorded
    ticks plus a final row at t = steps holding the post-stop placement
    (the stop rule fires after the move, so the final row is one move past
    the last recorded tick)."""
    result = run.results[method]
    ids = tier_robot_ids(run.case)
    out = Path(out_dir)
    written = []
    for trace in result.traces:
        k = trace.type_index
        rows = []
        for t, snapshot in enumerate(trace.positions):
            for j in range(snapshot.shape[0]):
                rows.append({"t": t, "type": k, "robot_id": ids[k - 1][j],
                             "x": float(snapshot[j, 0]), "y": float(snapshot[j, 1])})
        final = trace.final_positions
        for j in range(final.shape[0]):
            rows.append({"t": trace.steps, "type": k, "robot_id": ids[k - 1][j],
                         "x": float(final[j, 0]), "y": float(final[j, 1])})
        p = out / f"trajectory_type{k}.csv"
        write_csv(p, ("t", "type", "robot_id", "x", "y"), rows)
        written.append(p)
    return written


def write_assignments(out_dir, run: CaseRun, method: str) -> Path:
    """Final user-to-robot pairs (the dashed connection lines in a service
    map plot). For the robust method every user appears once per tier."""
    result = run.results[method]
    labels = run.labels[method]
    case = run.case
    ids = tier_robot_ids(case)
    q = case.user_positions
    rows = []
    for trace in result.traces:
        k = trace.type_index
        if labels is None:
            member_ids = list(range(len(case.users)))
        else:
            member_ids = [i for i, lab in enumerate(labels) if lab == k]
        final = trace.final_positions
        for local, user_id in enumerate(member_ids):
            j = int(trace.final_assignment[local])
            rows.append({
                "type": k, "user_id": user_id,
                "user_x": float(q[user_id, 0]), "user_y": float(q[user_id, 1]),
                "robot_id": ids[k - 1][j],
                "robot_x": float(final[j, 0]), "robot_y": float(final[j, 1]),
            })
    p = Path(out_dir) / "assignments.csv"
    write_csv(p, ("type", "user_id", "user_x", "user_y", "robot_id",
                  "robot_x", "robot_y"), rows)
    return p


def run_summary_payload(run: CaseRun, manifest: dict | None = None) -> dict:
    """JSON-ready single-case summary: per-method metrics plus the per-user
    true and labelled tiers."""
    case = run.case
    payload: dict = {
        "scenario": case.spec.id,
        "case": case.index,
        "master_seed": case.master_seed,
        "menu": list(run.menu.rho),
        "d_coll": case.spec.physics.d_coll,
        "users": {
            "theta": [int(t) for t in case.true_types],
        },
        "methods": {},
    }
    if manifest is not None:
        payload["manifest"] = manifest
    for rec in run.records:
        entry = {
            "energy": rec.energy,
            "realized_energy": rec.realized_energy,
            "mismatches": rec.mismatches,
            "steps": rec.steps,
            "per_type_steps": list(rec.per_type_steps),
            "converged": rec.converged,
            "min_distance": rec.min_distance,
            "collision_free": rec.min_distance >= case.spec.physics.d_coll,
            "degeneracies": rec.degeneracies,
        }
        labels = run.labels[rec.method]
        if labels is not None:
            entry["labels"] = [int(v) for v in labels]
        payload["methods"][rec.method] = entry
    return payload
