"""Experiment orchestration: plans, the results store, staged runs, reports.

A plan is a JSON file naming the surrogate model, the control pool and the
stages to run. ``run_plan`` executes stages in dependency order against an
append-only results store; every stored numeric field is a deterministic
function of the plan and its seeds, so re-running a plan is a no-op and
re-running it into a fresh store reproduces the payloads byte for byte
(timestamps aside). ``report`` turns a store into plot-ready CSV files
plus a text summary.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .basis import ControlBasis, generate_haar_basis
from .control import (
    XY4_CYCLE,
    build_decoupling_tensor,
    build_synthesis_tensor,
    decoupling_model,
    optimize_decoupling,
    simulate_trajectory,
    synthesis_model,
    synthesis_sweep,
    with_trajectories,
)
from .markov import bootstrap_median_ci, characterize as characterize_markov, \
    compare_with_tensor
from .memory import bootstrap_cmi, memory_bound
from .qcore import NumericalError  # noqa: F401  (CLI maps it to exit code 3)
from .simulator import ExperimentRecord, SEModel, make_model, rng_stream, \
    simulate_experiment
from .tomography import (
    BoxStats,
    box_stats,
    bootstrap_ci,
    build_standard_tensor,
    enumerate_standard_keys,
    evaluate_split,
    held_out_coefficient_tables,
    predict_batch,
    qst_mle,
    reconstruction_fidelity,
    standard_sequence,
)

SCHEMA_VERSION = "1.0"
STAGES = ("characterize", "evaluate", "memory", "markov", "decouple",
          "synthesize")
STAGE_DEPS = {"evaluate": ("characterize",), "memory": ("characterize",),
              "markov": ("characterize",)}
ENV_INITS = ("zero", "plus", "bell")
POOL_BOUNDS = (10, 28)
OPTIMIZER_RESTARTS = 20
ALPHA_RANGE = (0.1, 0.8)


class ConfigError(ValueError):
    """Invalid plan or store input; the message names the offending field."""


# ---------------------------------------------------------------------------
# Plans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentPlan:
    name: str
    exchange_khz: float = 50.0
    zz_khz: float = 30.0
    duration_ns: float = 144.0
    idle_scale: float = 1.0
    env_init: str = "zero"
    env_reset: bool = False
    pool_size: int = 28
    pool_seed: int = 7
    basis_size: int = 24
    shots: int | None = 1600
    master_seed: int = 0
    resamples: int = 200
    stages: tuple[str, ...] = ("characterize", "evaluate")

    def model(self) -> SEModel:
        # standard sequences are preparation + two unitaries, so 3 intervals
        return make_model(env_init=self.env_init, steps=3,
                          exchange_khz=self.exchange_khz, zz_khz=self.zz_khz,
                          duration_ns=self.duration_ns * self.idle_scale,
                          env_reset=self.env_reset, label=self.name)

    def basis(self) -> ControlBasis:
        return generate_haar_basis(self.pool_size, self.pool_seed)

    def eval_sizes(self) -> list[int]:
        ladder = set(range(POOL_BOUNDS[0], self.basis_size + 1, 2))
        ladder.add(self.basis_size)
        return sorted(ladder)


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {message}")


def plan_from_dict(raw: dict) -> ExperimentPlan:
    """Validate a parsed plan document; errors name the field path."""
    if not isinstance(raw, dict):
        raise ConfigError("plan: expected a JSON object")
    known = {f.name for f in fields(ExperimentPlan)}
    for key in raw:
        _require(key in known, key, "unknown field")
    _require("name" in raw, "name", "required field missing")
    data = dict(raw)

    def num(path, lo=None, allow_zero=False):
        if path not in data:
            return
        v = data[path]
        _require(isinstance(v, (int, float)) and not isinstance(v, bool),
                 path, "must be a number")
        if lo is not None:
            _require(v > lo or (allow_zero and v >= lo), path,
                     f"must be {'>=' if allow_zero else '>'} {lo}")

    _require(isinstance(data["name"], str) and data["name"], "name",
             "must be a non-empty string")
    num("exchange_khz", 0.0, allow_zero=True)
    num("zz_khz", 0.0, allow_zero=True)
    num("duration_ns", 0.0)
    num("idle_scale", 0.0)
    if "env_init" in data:
        _require(data["env_init"] in ENV_INITS, "env_init",
                 f"must be one of {ENV_INITS}")
    if "env_reset" in data:
        _require(isinstance(data["env_reset"], bool), "env_reset",
                 "must be a boolean")
    for path, lo, hi in (("pool_size", *POOL_BOUNDS),
                         ("basis_size", *POOL_BOUNDS)):
        if path in data:
            v = data[path]
            _require(isinstance(v, int) and not isinstance(v, bool), path,
                     "must be an integer")
            _require(lo <= v <= hi, path, f"must be between {lo} and {hi}")
    if "shots" in data and data["shots"] is not None:
        v = data["shots"]
        _require(isinstance(v, int) and not isinstance(v, bool) and v > 0,
                 "shots", "must be a positive integer or null")
    for path in ("master_seed", "pool_seed"):
        if path in data:
            v = data[path]
            _require(isinstance(v, int) and not isinstance(v, bool), path,
                     "must be an integer")
    if "resamples" in data:
        v = data["resamples"]
        _require(isinstance(v, int) and not isinstance(v, bool) and v >= 2,
                 "resamples", "must be an integer >= 2")
    if "stages" in data:
        v = data["stages"]
        _require(isinstance(v, (list, tuple)), "stages", "must be a list")
        for i, s in enumerate(v):
            _require(s in STAGES, f"stages[{i}]",
                     f"unknown stage {s!r}; valid stages are {STAGES}")
        data["stages"] = tuple(dict.fromkeys(v))

    plan = ExperimentPlan(**data)
    if "evaluate" in plan.stages:
        _require(plan.basis_size < plan.pool_size, "basis_size",
                 "must be smaller than pool_size for a held-out evaluation")
    _require(plan.basis_size <= plan.pool_size, "basis_size",
             "must not exceed pool_size")
    return plan


def load_plan(path: str | Path) -> ExperimentPlan:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"plan file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"plan file {p}: invalid JSON ({err})") from err
    return plan_from_dict(raw)


# ---------------------------------------------------------------------------
# Results store
# ---------------------------------------------------------------------------

def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def _canonical(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


class ResultsStore:
    """Append-only line-delimited JSON store with content-hashed sidecars.

    Every record line carries the schema version, plan name, stage, seed
    and a unique record key; appends with an already-stored key are
    skipped, which is what makes interrupted runs resumable.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "sidecars").mkdir(exist_ok=True)
        self.records_path = self.root / "records.jsonl"
        self._keys: set[str] = set()
        self._records: list[dict] = []
        if self.records_path.exists():
            for i, line in enumerate(self.records_path.read_text().splitlines()):
                try:
                    doc = json.loads(line)
                except json.JSONDecodeError as err:
                    raise ConfigError(
                        f"store {self.records_path}: line {i + 1} is not JSON "
                        f"({err})") from err
                self._check_version(doc, i)
                self._keys.add(doc["key"])
                self._records.append(doc)

    def _check_version(self, doc: dict, line: int) -> None:
        version = str(doc.get("schema_version", ""))
        major = version.split(".", 1)[0]
        if major != SCHEMA_VERSION.split(".", 1)[0]:
            raise ConfigError(
                f"store {self.records_path}: line {line + 1} has schema "
                f"version {version!r}; this reader supports {SCHEMA_VERSION}")

    def has(self, key: str) -> bool:
        return key in self._keys

    def append(self, plan: str, stage: str, seed: int, key: str,
               payload: dict) -> bool:
        """Store one record; returns False when the key already exists."""
        if key in self._keys:
            return False
        doc = {"schema_version": SCHEMA_VERSION, "plan": plan, "stage": stage,
               "seed": int(seed), "key": key,
               "created_utc": datetime.now(timezone.utc).isoformat(),
               "payload": _jsonify(payload)}
        with self.records_path.open("a") as fh:
            fh.write(_canonical(doc) + "\n")
        self._keys.add(key)
        self._records.append(doc)
        return True

    def records(self, stage: str | None = None,
                kind: str | None = None) -> list[dict]:
        out = []
        for doc in self._records:
            if stage is not None and doc["stage"] != stage:
                continue
            if kind is not None and doc["payload"].get("kind") != kind:
                continue
            out.append(doc)
        return out

    def save_array(self, arr: np.ndarray) -> str:
        """Write a sidecar .npy named by the content hash of the array."""
        a = np.ascontiguousarray(arr)
        digest = hashlib.sha256()
        digest.update(a.dtype.str.encode())
        digest.update(repr(a.shape).encode())
        digest.update(a.tobytes())
        name = digest.hexdigest()
        path = self.root / "sidecars" / f"{name}.npy"
        if not path.exists():
            np.save(path, a, allow_pickle=False)
        return name

    def load_array(self, name: str) -> np.ndarray:
        path = self.root / "sidecars" / f"{name}.npy"
        if not path.exists():
            raise ConfigError(f"sidecar not found: {path}")
        return np.load(path, allow_pickle=False)

    def payload_fingerprint(self) -> str:
        """Hash of every record minus timestamps, for determinism checks."""
        digest = hashlib.sha256()
        for doc in self._records:
            stripped = {k: v for k, v in doc.items() if k != "created_utc"}
            digest.update(_canonical(stripped).encode())
            digest.update(b"\n")
        return digest.hexdigest()


# ---------------------------------------------------------------------------
# Stage execution
# ---------------------------------------------------------------------------

def resolve_stages(requested: tuple[str, ...]) -> list[str]:
    """Requested stages plus their prerequisites, in canonical order."""
    wanted = set()
    for stage in requested:
        if stage not in STAGES:
            raise ConfigError(f"stages: unknown stage {stage!r}")
        wanted.add(stage)
        wanted.update(STAGE_DEPS.get(stage, ()))
    return [s for s in STAGES if s in wanted]


def _run_characterize(plan: ExperimentPlan, store: ResultsStore,
                      model: SEModel, basis: ControlBasis) -> int:
    appended = 0
    keys = enumerate_standard_keys(len(basis.preparations), basis.size)
    for idx, (i, j, k) in enumerate(keys):
        row_keys = [f"experiment:p{i}_u{j}_u{k}:{ax}" for ax in "XYZ"]
        if all(store.has(rk) for rk in row_keys):
            continue
        rec = simulate_experiment(model, standard_sequence(basis, i, j, k),
                                  plan.shots, plan.master_seed,
                                  record_index=idx)
        for ax, row_key in zip("XYZ", row_keys):
            plus, minus = rec.counts[ax]
            payload = {"kind": "experiment", "sequence_id": rec.sequence_id,
                       "key_ijk": [i, j, k], "axis": ax,
                       "counts": [plus, minus], "shots": rec.shots,
                       "record_index": idx}
            appended += store.append(plan.name, "characterize",
                                     plan.master_seed, row_key, payload)
    return appended


def _records_from_store(plan: ExperimentPlan, store: ResultsStore,
                        ) -> dict[tuple[int, int, int], ExperimentRecord]:
    rows = store.records(stage="characterize", kind="experiment")
    grouped: dict[tuple[int, int, int], dict] = {}
    for doc in rows:
        p = doc["payload"]
        key = tuple(p["key_ijk"])
        entry = grouped.setdefault(key, {"sequence_id": p["sequence_id"],
                                         "shots": p["shots"], "counts": {}})
        entry["counts"][p["axis"]] = tuple(p["counts"])
    records = {}
    for key, entry in grouped.items():
        if set(entry["counts"]) != {"X", "Y", "Z"}:
            raise ConfigError(
                f"store: sequence {entry['sequence_id']} is missing axes; "
                "re-run the characterize stage")
        records[key] = ExperimentRecord(
            sequence_id=entry["sequence_id"], counts=entry["counts"],
            shots=entry["shots"], seed=plan.master_seed)
    expected = enumerate_standard_keys(4, plan.pool_size)
    missing = [k for k in expected if k not in records]
    if missing:
        raise ConfigError(
            f"store: characterize stage incomplete ({len(missing)} of "
            f"{len(expected)} sequences missing); re-run it")
    return records


def _states_from_records(records: dict, plan: ExperimentPlan) -> np.ndarray:
    pool = plan.pool_size
    states = np.empty((4, pool, pool, 2, 2), dtype=complex)
    for (i, j, k), rec in records.items():
        states[i, j, k] = qst_mle(rec)
    return states


def _run_evaluate(plan: ExperimentPlan, store: ResultsStore,
                  basis: ControlBasis, records: dict,
                  states: np.ndarray) -> int:
    appended = 0
    for n in plan.eval_sizes():
        key = f"evaluation:n{n}"
        if store.has(key):
            continue
        result = evaluate_split(states, basis, n)
        lo, hi = bootstrap_ci(records, basis, n, resamples=plan.resamples,
                              seed=plan.master_seed)
        table = np.array([[i, j, k, f] for (i, j, k), f in
                          sorted(result.fidelities.items())])
        sidecar = store.save_array(table)
        stats = result.stats
        payload = {"kind": "evaluation", "n": n,
                   "mean_infidelity": result.mean_infidelity,
                   "ci_lo": lo, "ci_hi": hi,
                   "median": stats.median, "q1": stats.q1, "q3": stats.q3,
                   "whisker_lo": stats.whisker_lo,
                   "whisker_hi": stats.whisker_hi,
                   "mean": stats.mean, "count": stats.count,
                   "fidelity_table": sidecar}
        appended += store.append(plan.name, "evaluate", plan.master_seed,
                                 key, payload)
    return appended


def _run_memory(plan: ExperimentPlan, store: ResultsStore,
                basis: ControlBasis, records: dict,
                states: np.ndarray) -> int:
    appended = 0
    n = plan.basis_size
    pt = build_standard_tensor(states, basis, n, build_matrix=False)
    placements_list = tuple((s,) for s in range(1, pt.steps))
    if pt.steps > 2:
        placements_list += (tuple(range(1, pt.steps)),)
    for placements in placements_list:
        key = "memory:" + "+".join(map(str, placements))
        if store.has(key):
            continue
        result = memory_bound(pt, (placements,), restarts=OPTIMIZER_RESTARTS,
                              seed=plan.master_seed)[0]
        interval = bootstrap_cmi(records, basis, n, placements, result.params,
                                 resamples=plan.resamples,
                                 seed=plan.master_seed)
        payload = {"kind": "memory_bound",
                   "placements": list(placements), "n": n,
                   "bits": result.bits, "point": interval.point,
                   "ci_lo": interval.lo, "ci_hi": interval.hi,
                   "params": list(result.params.pack()),
                   "has_filler": result.params.filler is not None,
                   "restarts": result.restarts}
        appended += store.append(plan.name, "memory", plan.master_seed, key,
                                 payload)
    return appended


def _run_markov(plan: ExperimentPlan, store: ResultsStore, model: SEModel,
                basis: ControlBasis, states: np.ndarray) -> int:
    if store.has("markov:comparison"):
        return 0
    # the baseline runs far fewer experiments than the standard grid, so
    # give it the same total measurement budget for a fair comparison
    n_grid = 4 * plan.pool_size ** 2
    n_base = 4 * (1 + 2 * basis.size)
    markov_shots = (None if plan.shots is None
                    else int(round(plan.shots * n_grid / n_base)))
    baseline = characterize_markov(model, basis, markov_shots,
                                   master_seed=plan.master_seed + 101)
    n = plan.basis_size
    pt = build_standard_tensor(states, basis, n, build_matrix=False)
    keys = enumerate_standard_keys(len(basis.preparations), basis.size)
    tables = held_out_coefficient_tables(pt, basis, keys)
    preds = predict_batch(pt, tables)
    tensor_fids = {key: reconstruction_fidelity(preds[s], states[key])
                   for s, key in enumerate(keys)}
    comparison = compare_with_tensor(tensor_fids, states, baseline)
    t_vals = np.array(list(comparison.tensor_fids.values()))
    m_vals = np.array(list(comparison.markov_fids.values()))
    t_ci = bootstrap_median_ci(t_vals, resamples=plan.resamples,
                               seed=plan.master_seed)
    m_ci = bootstrap_median_ci(m_vals, resamples=plan.resamples,
                               seed=plan.master_seed + 1)

    def stats_doc(stats: BoxStats, ci: tuple[float, float]) -> dict:
        return {"median": stats.median, "q1": stats.q1, "q3": stats.q3,
                "whisker_lo": stats.whisker_lo, "whisker_hi": stats.whisker_hi,
                "mean": stats.mean, "count": stats.count,
                "ci_lo": ci[0], "ci_hi": ci[1]}

    payload = {"kind": "markov_comparison", "n": n,
               "tensor": stats_doc(comparison.tensor_stats, t_ci),
               "markov": stats_doc(comparison.markov_stats, m_ci),
               "median_gap": comparison.median_gap}
    return int(store.append(plan.name, "markov", plan.master_seed,
                            "markov:comparison", payload))


def _trajectory_doc(traj) -> dict:
    return {"label": traj.label, "time_ns": traj.times_ns,
            "negativity": traj.negativity,
            "mutual_info_bits": traj.mutual_info_bits,
            "purity_q1": traj.purity_q1, "purity_q2": traj.purity_q2}


def _run_decouple(plan: ExperimentPlan, store: ResultsStore,
                  basis: ControlBasis) -> int:
    if store.has("decouple:result"):
        return 0
    dmodel = decoupling_model(exchange_khz=plan.exchange_khz,
                              zz_khz=plan.zz_khz)
    pt = build_decoupling_tensor(dmodel, basis, shots=plan.shots,
                                 master_seed=plan.master_seed + 202)
    result = optimize_decoupling(pt, restarts=OPTIMIZER_RESTARTS,
                                 seed=plan.master_seed)
    result = with_trajectories(result, exchange_khz=plan.exchange_khz,
                               zz_khz=plan.zz_khz)
    xy4 = simulate_trajectory(XY4_CYCLE, exchange_khz=plan.exchange_khz,
                              zz_khz=plan.zz_khz, label="xy4")
    payload = {"kind": "decoupling",
               "params": list(result.params.as_tuple()),
               "objective": result.objective,
               "identity_objective": result.identity_objective,
               "axis": list(result.axis), "angle": result.angle,
               "degenerate": result.degenerate, "restarts": result.restarts,
               "trajectories": [_trajectory_doc(result.idle_trajectory),
                                _trajectory_doc(result.decoupled_trajectory),
                                _trajectory_doc(xy4)]}
    return int(store.append(plan.name, "decouple", plan.master_seed,
                            "decouple:result", payload))


def _run_synthesize(plan: ExperimentPlan, store: ResultsStore,
                    basis: ControlBasis) -> int:
    if store.has("synthesize:sweep"):
        return 0
    smodel = synthesis_model(exchange_khz=plan.exchange_khz,
                             zz_khz=plan.zz_khz)
    pt = build_synthesis_tensor(smodel, basis, shots=plan.shots,
                                master_seed=plan.master_seed + 303)
    alpha = float(rng_stream(plan.master_seed, 606).uniform(*ALPHA_RANGE))
    points = synthesis_sweep(pt, smodel, alpha, restarts=OPTIMIZER_RESTARTS,
                             seed=plan.master_seed)
    payload = {"kind": "synthesis", "alpha": alpha,
               "points": [{"eta": p.eta,
                           "target_unitarity": p.target_unitarity,
                           "loss": p.loss,
                           "params": list(p.params.as_tuple()),
                           "process_fidelity": p.process_fidelity,
                           "realized_unitarity": p.realized_unitarity}
                          for p in points]}
    return int(store.append(plan.name, "synthesize", plan.master_seed,
                            "synthesize:sweep", payload))


def _plan_manifest(plan: ExperimentPlan) -> dict:
    doc = {f.name: getattr(plan, f.name) for f in fields(ExperimentPlan)
           if f.name != "stages"}
    doc["kind"] = "plan_manifest"
    return _jsonify(doc)


def _check_manifest(plan: ExperimentPlan, store: ResultsStore) -> None:
    """One store holds one plan configuration; staged runs must agree."""
    manifest = _plan_manifest(plan)
    existing = store.records(kind="plan_manifest")
    if not existing:
        store.append(plan.name, "plan", plan.master_seed, "plan:manifest",
                     manifest)
        return
    stored = existing[0]["payload"]
    diffs = sorted(k for k in manifest
                   if stored.get(k, object()) != manifest[k])
    if diffs:
        raise ConfigError(
            f"store {store.root}: already holds results for a different "
            f"plan configuration (fields differ: {', '.join(diffs)}); "
            "use a fresh --out directory")


def run_plan(plan: ExperimentPlan, store: ResultsStore,
             stages: tuple[str, ...] | None = None) -> dict[str, int]:
    """Execute the plan's stages; returns appended-record counts per stage.

    Already-stored records are skipped, so a rerun of the same plan is a
    no-op and an interrupted run resumes where it stopped.
    """
    _check_manifest(plan, store)
    ordered = resolve_stages(stages if stages is not None else plan.stages)
    model = plan.model()
    basis = plan.basis()
    counts: dict[str, int] = {}
    records = states = None
    for stage in ordered:
        if stage in ("evaluate", "memory", "markov") and records is None:
            records = _records_from_store(plan, store)
            states = _states_from_records(records, plan)
        if stage == "characterize":
            counts[stage] = _run_characterize(plan, store, model, basis)
        elif stage == "evaluate":
            counts[stage] = _run_evaluate(plan, store, basis, records, states)
        elif stage == "memory":
            counts[stage] = _run_memory(plan, store, basis, records, states)
        elif stage == "markov":
            counts[stage] = _run_markov(plan, store, model, basis, states)
        elif stage == "decouple":
            counts[stage] = _run_decouple(plan, store, basis)
        elif stage == "synthesize":
            counts[stage] = _run_synthesize(plan, store, basis)
    return counts


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def report(plan: ExperimentPlan, store: ResultsStore,
           out_dir: str | Path) -> dict[str, Path]:
    """Emit plot-ready CSVs plus a text summary for the stages present."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    lines = [f"plan: {plan.name}", f"pool: {plan.pool_size} "
             f"(seed {plan.pool_seed}), shots: {plan.shots}",
             f"master seed: {plan.master_seed}"]

    evaluations = sorted(store.records(stage="evaluate", kind="evaluation"),
                         key=lambda d: d["payload"]["n"])
    if not evaluations:
        raise ConfigError(
            "report requires the 'evaluate' stage; run it before reporting")

    rows = [[p["n"], p["mean_infidelity"], p["ci_lo"], p["ci_hi"]]
            for p in (d["payload"] for d in evaluations)]
    path = out / "fidelity_vs_n.csv"
    _write_csv(path, ["n", "mean_infidelity", "ci_lo", "ci_hi"], rows)
    written["fidelity_vs_n"] = path

    rows = [[p["n"], p["median"], p["q1"], p["q3"], p["whisker_lo"],
             p["whisker_hi"], p["mean"], p["count"]]
            for p in (d["payload"] for d in evaluations)]
    path = out / "box_stats.csv"
    _write_csv(path, ["n", "median", "q1", "q3", "whisker_lo", "whisker_hi",
                      "mean", "count"], rows)
    written["box_stats"] = path

    at_n = next((d["payload"] for d in evaluations
                 if d["payload"]["n"] == plan.basis_size),
                evaluations[-1]["payload"])
    lines.append(f"reconstruction: held-out fidelity median "
                 f"{at_n['median']:.4f} at n={at_n['n']} "
                 f"(mean infidelity {at_n['mean_infidelity']:.3e}, "
                 f"95% CI [{at_n['ci_lo']:.3e}, {at_n['ci_hi']:.3e}])")

    memory_rows = store.records(stage="memory", kind="memory_bound")
    if memory_rows:
        rows, texts = [], []
        for doc in memory_rows:
            p = doc["payload"]
            name = "+".join(str(s) for s in p["placements"])
            rows.append([name, p["bits"], p["ci_lo"], p["ci_hi"]])
            texts.append(f"slots {name}: {p['bits']:.4f} bits "
                         f"[{p['ci_lo']:.4f}, {p['ci_hi']:.4f}]")
        path = out / "memory_bounds.csv"
        _write_csv(path, ["placements", "bits", "ci_lo", "ci_hi"], rows)
        written["memory_bounds"] = path
        lines.append("memory bounds: " + "; ".join(texts))

    markov_rows = store.records(stage="markov", kind="markov_comparison")
    if markov_rows:
        p = markov_rows[0]["payload"]
        rows = [[name, s["median"], s["q1"], s["q3"], s["whisker_lo"],
                 s["whisker_hi"], s["ci_lo"], s["ci_hi"]]
                for name, s in (("tensor", p["tensor"]),
                                ("markov", p["markov"]))]
        path = out / "markov_comparison.csv"
        _write_csv(path, ["model", "median", "q1", "q3", "whisker_lo",
                          "whisker_hi", "ci_lo", "ci_hi"], rows)
        written["markov_comparison"] = path
        lines.append(f"markov comparison: tensor median "
                     f"{p['tensor']['median']:.4f} vs composed "
                     f"{p['markov']['median']:.4f} "
                     f"(gap {100 * p['median_gap']:.3f}pp)")

    decouple_rows = store.records(stage="decouple", kind="decoupling")
    if decouple_rows:
        p = decouple_rows[0]["payload"]
        rows = []
        for traj in p["trajectories"]:
            for t, neg, mi, p1, p2 in zip(traj["time_ns"], traj["negativity"],
                                          traj["mutual_info_bits"],
                                          traj["purity_q1"],
                                          traj["purity_q2"]):
                rows.append([traj["label"], t, neg, mi, p1, p2])
        path = out / "control_trajectories.csv"
        _write_csv(path, ["label", "time_ns", "negativity",
                          "mutual_info_bits", "purity_q1", "purity_q2"], rows)
        written["control_trajectories"] = path
        axis = ", ".join(f"{v:.4f}" for v in p["axis"])
        lines.append(f"decoupling: angle {p['angle']:.4f} about ({axis}), "
                     f"objective {p['objective']:.3e}, degenerate: "
                     f"{'yes' if p['degenerate'] else 'no'}")

    synth_rows = store.records(stage="synthesize", kind="synthesis")
    if synth_rows:
        p = synth_rows[0]["payload"]
        rows = [[q["eta"], q["target_unitarity"], q["loss"],
                 q["process_fidelity"], q["realized_unitarity"]]
                for q in p["points"]]
        path = out / "synthesis_sweep.csv"
        _write_csv(path, ["eta", "target_unitarity", "loss",
                          "process_fidelity", "realized_unitarity"], rows)
        written["synthesis_sweep"] = path
        best = max(p["points"], key=lambda q: q["process_fidelity"])
        lines.append(f"synthesis: alpha {p['alpha']:.4f}, peak process "
                     f"fidelity {best['process_fidelity']:.4f} at eta "
                     f"{best['eta']:.2f}")

    summary = out / "summary.txt"
    summary.write_text("\n".join(lines) + "\n")
    written["summary"] = summary
    return written
