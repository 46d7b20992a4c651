"""Batch command-line interface.

Subcommands: ``generate``, ``solve``, ``train``, ``qaplib fetch``,
``qaplib bench``, ``describe``, and ``rerun``.  Every run writes its outputs
into one directory per invocation together with a ``manifest.json`` recording
the command, resolved configuration, master seed, and output inventory; the
``rerun`` subcommand replays a manifest into a fresh directory and verifies
that the deterministic outputs are bit-identical.

Output conventions:

* ``results.csv`` — deterministic result rows (no timings); byte-stable
  across reruns with the same arguments on one platform.
* ``results.jsonl`` — the same rows plus volatile fields (``wall_ms``,
  optional cost trajectories).
* ``metrics.jsonl`` — training only, one JSON line per epoch.

Exit codes: 0 success, 2 usage error, 3 data/validation error, 4 numerical
abort.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime
import io
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, qaplib
from .core import (
    QapInstance,
    gap as gap_of,
    generate_instance,
    identity_assignment,
    instance_from_json,
    instance_to_json,
    objective,
)
from .errors import (
    CheckpointError,
    NumericalAbortError,
    ParseError,
    SawtQapError,
    ValidationError,
)
from .nn import Adam
from .policy import SawtConfig, SawtPolicy, load_policy, save_policy
from .rl import TrainConfig, evaluate, train
from .solvers import (
    BRUTE_FORCE_MAX_N,
    TabuConfig,
    brute_force,
    greedy_descent,
    spectral_matching,
    tabu_search,
)

RESULTS_SCHEMA = 1
MANIFEST_SCHEMA = 1
_RESULT_COLUMNS = ("instance", "solver", "seed", "steps", "best_cost", "reference", "gap", "flag")

SOLVERS = ("brute", "greedy", "tabu", "sm", "sawt")


# ---------------------------------------------------------------------------
# Small shared helpers.
# ---------------------------------------------------------------------------


def _utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def _derive_seeds(master: int, count: int) -> list[int]:
    """Per-instance RNG seeds split from the master seed (SeedSequence spawn)."""
    children = np.random.SeedSequence(master).spawn(count)
    return [int(c.generate_state(1)[0]) for c in children]


def _fmt(value) -> str:
    """Deterministic cell formatting: shortest-round-trip floats, plain ints."""
    if value is None or value == "":
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _prepare_run_dir(out: str | None) -> Path:
    if not out:
        raise ValidationError("this command writes files; pass --out RUN_DIR")
    run_dir = Path(out)
    if (run_dir / "manifest.json").exists():
        raise ValidationError(
            f"{run_dir} already contains a manifest.json; every run directory "
            "holds exactly one run — pick a fresh --out"
        )
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def _write_manifest(
    run_dir: Path,
    args,
    command: str,
    config: dict,
    started_at: str,
    deterministic: list[str],
    volatile: list[str],
) -> None:
    manifest = {
        "schema_version": MANIFEST_SCHEMA,
        "results_schema": RESULTS_SCHEMA,
        "command": command,
        "argv": list(getattr(args, "_argv", [])),
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "config": config,
        "started_at": started_at,
        "finished_at": _utc_now(),
        "outputs": {"deterministic": deterministic, "volatile": volatile},
    }
    (run_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )


def _write_results(run_dir: Path, rows: list[dict], jsonl_rows: list[dict]) -> None:
    """results.csv from the deterministic rows, results.jsonl from the full rows."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_RESULT_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row.get(col)) for col in _RESULT_COLUMNS])
    (run_dir / "results.csv").write_text(buf.getvalue())
    with open(run_dir / "results.jsonl", "w") as fh:
        for row in jsonl_rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _print_summary(rows: list[dict]) -> None:
    costs = [r["best_cost"] for r in rows]
    print(f"instances: {len(rows)}")
    if costs:
        print(f"mean best cost: {np.mean(costs):.6f}")
    gaps = [r["gap"] for r in rows if r.get("gap") not in (None, "")]
    if gaps:
        print(f"mean gap vs reference: {np.mean(gaps):.2f}%")
    flagged = [r["instance"] for r in rows if r.get("flag")]
    if flagged:
        print(f"flagged rows (excluded from gap aggregate): {', '.join(flagged)}")


def _load_instance_file(path: Path) -> QapInstance:
    if path.suffix == ".dat":
        return qaplib.parse_qaplib(path.read_text(), name=path.stem)
    return instance_from_json(path.read_text())


def _collect_instance_paths(specs: list[str]) -> list[Path]:
    paths: list[Path] = []
    for spec in specs:
        p = Path(spec)
        if p.is_dir():
            found = sorted(
                q
                for q in p.iterdir()
                if q.suffix in (".json", ".dat")
                and q.name not in ("index.json", "manifest.json")
            )
            if not found:
                raise ValidationError(f"no .json/.dat instance files in {p}")
            paths.extend(found)
        elif p.is_file():
            paths.append(p)
        else:
            raise FileNotFoundError(f"instance path not found: {spec}")
    return paths


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    if args.count < 0:
        raise ValidationError(f"--count must be >= 0, got {args.count}")
    started = _utc_now()
    run_dir = _prepare_run_dir(args.out)
    files = []
    for k in range(args.count):
        inst = generate_instance(args.n, p=args.p, seed=args.seed + k)
        fname = f"{inst.name}.json"
        (run_dir / fname).write_text(instance_to_json(inst))
        files.append(fname)
    index = {
        "schema_version": 1,
        "n": args.n,
        "count": args.count,
        "p": args.p,
        "seed": args.seed,
        "files": files,
    }
    (run_dir / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    config = {k: getattr(args, k) for k in ("n", "count", "p", "seed")}
    _write_manifest(
        run_dir, args, "generate", config, started,
        deterministic=["index.json", *files], volatile=[],
    )
    print(f"wrote {args.count} instances to {run_dir}")
    return 0


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


def _reference_costs(instances: list[QapInstance], mode: str, threads: int) -> tuple[dict[int, float], str]:
    """Reference cost per instance index, per the documented hierarchy.

    ``auto`` uses brute force up to n = BRUTE_FORCE_MAX_N and a seeded
    5000-step tabu search beyond; ``brute``/``tabu`` force one method; a path
    loads a JSON mapping of instance name to cost; ``none`` disables gaps.
    """
    if mode == "none":
        return {}, "none"
    if mode in ("auto", "brute", "tabu"):
        def ref_one(item):
            idx, inst = item
            method = mode
            if method == "auto":
                method = "brute" if inst.n <= BRUTE_FORCE_MAX_N else "tabu"
            if method == "brute":
                return idx, brute_force(inst).cost
            return idx, tabu_search(inst, config=TabuConfig(max_steps=5000, rng_seed=0)).cost

        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            pairs = list(pool.map(ref_one, enumerate(instances)))
        return dict(pairs), mode
    table = json.loads(Path(mode).read_text())
    refs = {}
    for idx, inst in enumerate(instances):
        if inst.name in table:
            refs[idx] = float(table[inst.name])
    return refs, mode


def _solve_one(inst: QapInstance, solver: str, steps: int, seed: int,
               record_trajectory: bool) -> dict:
    t0 = time.perf_counter()
    trajectory = None
    if solver == "brute":
        sol = brute_force(inst)
    elif solver == "greedy":
        sol = greedy_descent(inst, max_steps=steps)
    elif solver == "tabu":
        cfg = TabuConfig(max_steps=steps, rng_seed=seed)
        if record_trajectory:
            sol, history = tabu_search(inst, config=cfg, return_history=True)
            stride = max(1, len(history) // 100)
            trajectory = [float(h) for h in history[::stride]]
        else:
            sol = tabu_search(inst, config=cfg)
    elif solver == "sm":
        sol = spectral_matching(inst).assignment
    else:  # pragma: no cover - guarded by argparse choices
        raise ValidationError(f"unknown solver {solver!r}")
    wall_ms = int((time.perf_counter() - t0) * 1000)
    row = {
        "best_cost": float(sol.cost),
        "sigma": sol.sigma.tolist(),
        "wall_ms": wall_ms,
    }
    if trajectory is not None:
        row["trajectory"] = trajectory
    return row


def cmd_solve(args) -> int:
    started = _utc_now()
    paths = _collect_instance_paths(args.instances)
    instances = [_load_instance_file(p) for p in paths]
    run_dir = _prepare_run_dir(args.out)
    seeds = _derive_seeds(args.seed, len(instances))

    if args.solver == "sawt":
        if not args.checkpoint:
            raise ValidationError("--checkpoint is required for solver 'sawt'")
        policy, _, _ = load_policy(args.checkpoint)
        t0 = time.perf_counter()
        res = evaluate(policy, instances, steps=args.steps, seed=args.seed)
        wall_ms = int((time.perf_counter() - t0) * 1000)
        partials = [
            {
                "best_cost": float(res.best_costs[i]),
                "sigma": res.best_sigmas[i].tolist(),
                "wall_ms": wall_ms // max(1, len(instances)),
            }
            for i in range(len(instances))
        ]
    else:
        def work(item):
            idx, inst = item
            return idx, _solve_one(inst, args.solver, args.steps, seeds[idx],
                                    args.record_trajectory)

        with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
            done = dict(pool.map(work, enumerate(instances)))
        partials = [done[i] for i in range(len(instances))]

    if args.fp64_check:
        for inst, part in zip(instances, partials):
            check = objective(inst, np.asarray(part["sigma"]))
            if not np.isclose(check, part["best_cost"], rtol=1e-9, atol=1e-9):
                raise NumericalAbortError(
                    "fp64 re-verification of best_cost failed",
                    diagnostics={
                        "instance": inst.name,
                        "reported": part["best_cost"],
                        "recomputed": float(check),
                    },
                )

    refs, ref_mode = _reference_costs(instances, args.reference, args.threads)
    rows: list[dict] = []
    jsonl_rows: list[dict] = []
    for idx, (inst, part) in enumerate(zip(instances, partials)):
        ref = refs.get(idx)
        flag = ""
        gap_val = None
        if ref is not None:
            if ref == 0:
                flag = "zero_reference"
            else:
                gap_val = gap_of(part["best_cost"], ref)
        row = {
            "instance": inst.name,
            "solver": args.solver,
            "seed": seeds[idx] if args.solver in ("tabu",) else args.seed,
            "steps": args.steps,
            "best_cost": part["best_cost"],
            "reference": ref,
            "gap": gap_val,
            "flag": flag,
        }
        row_jsonl = dict(row)
        row_jsonl["wall_ms"] = part["wall_ms"]
        row_jsonl["sigma"] = part["sigma"]
        if "trajectory" in part:
            row_jsonl["trajectory"] = part["trajectory"]
        rows.append(row)
        jsonl_rows.append(row_jsonl)

    _write_results(run_dir, rows, jsonl_rows)

    config = {
        "solver": args.solver,
        "steps": args.steps,
        "reference": ref_mode,
        "instances": [str(p) for p in paths],
        "checkpoint": args.checkpoint,
        "fp64_check": args.fp64_check,
        "record_trajectory": args.record_trajectory,
    }
    _write_manifest(
        run_dir, args, "solve", config, started,
        deterministic=["results.csv"], volatile=["results.jsonl"],
    )
    print(f"solver: {args.solver}  steps: {args.steps}")
    _print_summary(rows)
    return 0


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

_TRAIN_OVERRIDES = (
    "epochs", "batch_size", "episode_length", "lr", "entropy_beta", "eval_every",
    "eval_steps",
)
_DATA_KEYS = ("n", "count", "p", "eval_count")
_DATA_DEFAULTS = {"n": 6, "count": 256, "p": 0.7, "eval_count": 64}


def _resolve_train_config(args) -> tuple[TrainConfig, SawtConfig, dict]:
    """Defaults < config file < CLI flags, mirroring TrainConfig/SawtConfig keys."""
    file_cfg: dict = {}
    if args.config:
        file_cfg = json.loads(Path(args.config).read_text())
        unknown = set(file_cfg) - {"train", "model", "data"}
        if unknown:
            raise ValidationError(
                f"unknown top-level config keys: {sorted(unknown)} "
                "(expected 'train', 'model', 'data')"
            )
    train_kwargs = dict(file_cfg.get("train", {}))
    for key in _TRAIN_OVERRIDES:
        value = getattr(args, key, None)
        if value is not None:
            train_kwargs[key] = value
    if args.seed is not None:
        train_kwargs["seed"] = args.seed
    model_kwargs = dict(file_cfg.get("model", {}))
    data = {**_DATA_DEFAULTS, **file_cfg.get("data", {})}
    for key in _DATA_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    try:
        return TrainConfig(**train_kwargs), SawtConfig(**model_kwargs), data
    except TypeError as err:
        raise ValidationError(f"bad config key: {err}") from None


def cmd_train(args) -> int:
    started = _utc_now()
    train_cfg, model_cfg, data = _resolve_train_config(args)
    run_dir = _prepare_run_dir(args.out)

    if args.data:
        paths = _collect_instance_paths([args.data])
        instances = [_load_instance_file(p) for p in paths]
    else:
        instances = [
            generate_instance(data["n"], p=data["p"], seed=train_cfg.seed + k)
            for k in range(data["count"])
        ]
    eval_instances = None
    if data["eval_count"]:
        eval_instances = [
            generate_instance(data["n"], p=data["p"], seed=1_000_000 + train_cfg.seed + k)
            for k in range(data["eval_count"])
        ]

    start_epoch = 0
    optimizer = None
    if args.resume:
        policy, optimizer, meta = load_policy(
            args.resume, optimizer_factory=lambda p: Adam(p, lr=train_cfg.lr)
        )
        start_epoch = int(meta.get("epoch", -1)) + 1
        print(f"resuming from {args.resume} at epoch {start_epoch}")
    else:
        policy = SawtPolicy(model_cfg, seed=train_cfg.seed)

    ckpt_path = run_dir / "policy.ckpt"
    result = train(
        policy,
        instances,
        train_cfg,
        eval_instances=eval_instances,
        metrics_path=run_dir / "metrics.jsonl",
        checkpoint_path=ckpt_path,
        log=lambda row: print(
            f"epoch {row['epoch']:3d}  best_cost_mean {row['best_cost_mean']:.4f}  "
            f"loss {row['loss']:.4f}  entropy {row['entropy']:.3f}"
            + (f"  eval {row['eval_cost_mean']:.4f}" if "eval_cost_mean" in row else "")
        ),
        start_epoch=start_epoch,
        optimizer=optimizer,
    )
    if not result.history:  # epochs=0: still leave a loadable checkpoint
        save_policy(ckpt_path, policy, result.optimizer,
                    meta={"epoch": start_epoch - 1, "train_config": train_cfg.to_dict()})

    config = {
        "train": train_cfg.to_dict(),
        "model": model_cfg.to_dict(),
        "data": data if not args.data else {"data_dir": args.data},
        "resume": args.resume,
        "start_epoch": start_epoch,
    }
    _write_manifest(
        run_dir, args, "train", config, started,
        deterministic=[], volatile=["metrics.jsonl", "policy.ckpt"],
    )
    print(f"trained {len(result.history)} epochs; checkpoint at {ckpt_path}")
    return 0


# ---------------------------------------------------------------------------
# qaplib fetch / bench
# ---------------------------------------------------------------------------


def cmd_qaplib_fetch(args) -> int:
    for name in args.names:
        written = qaplib.fetch(name, data_dir=args.data_dir, base_url=args.base_url)
        for path in written:
            print(f"{name}: {path}")
    return 0


def cmd_qaplib_bench(args) -> int:
    started = _utc_now()
    names = []
    for part in args.names:
        names.extend(x for x in part.replace(",", " ").split() if x)
    if not names:
        raise ValidationError("qaplib bench needs at least one instance name")
    run_dir = _prepare_run_dir(args.out)
    entries = []
    for name in names:
        try:
            entries.append(qaplib.load_entry(name, data_dir=args.data_dir))
        except FileNotFoundError:
            raise FileNotFoundError(
                f"QAPLIB instance {name!r} is not available locally; run "
                f"`sawt-qap qaplib fetch {name}` (and set SAWT_QAP_DATA_DIR) first"
            ) from None
    seeds = _derive_seeds(args.seed, len(entries))

    def work(item):
        idx, entry = item
        return idx, _solve_one(entry.instance, args.solver, args.steps, seeds[idx], False)

    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        done = dict(pool.map(work, enumerate(entries)))

    rows: list[dict] = []
    jsonl_rows: list[dict] = []
    for idx, entry in enumerate(entries):
        part = done[idx]
        bound = entry.upper_bound
        flag = ""
        gap_val = None
        if bound is None:
            flag = "no_bound"
        elif bound == 0:
            flag = "zero_bound"
        else:
            gap_val = gap_of(part["best_cost"], bound)
        row = {
            "instance": entry.name,
            "solver": args.solver,
            "seed": seeds[idx] if args.solver == "tabu" else args.seed,
            "steps": args.steps,
            "best_cost": part["best_cost"],
            "reference": bound,
            "gap": gap_val,
            "flag": flag,
        }
        rows.append(row)
        jr = dict(row)
        jr["wall_ms"] = part["wall_ms"]
        jr["sigma"] = part["sigma"]
        jsonl_rows.append(jr)

    _write_results(run_dir, rows, jsonl_rows)

    # Per-category mean/min/max over rows that have a usable gap.
    by_cat: dict[str, list[float]] = {}
    for row in rows:
        if row["gap"] is None:
            continue
        category = qaplib.parse_name(row["instance"])[0]
        by_cat.setdefault(category, []).append(row["gap"])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("category", "count", "mean_gap", "min_gap", "max_gap"))
    for category in sorted(by_cat):
        gaps = by_cat[category]
        writer.writerow(
            [category, len(gaps), _fmt(float(np.mean(gaps))),
             _fmt(float(np.min(gaps))), _fmt(float(np.max(gaps)))]
        )
    (run_dir / "categories.csv").write_text(buf.getvalue())

    config = {"names": names, "solver": args.solver, "steps": args.steps,
              "data_dir": args.data_dir}
    _write_manifest(
        run_dir, args, "qaplib bench", config, started,
        deterministic=["results.csv", "categories.csv"], volatile=["results.jsonl"],
    )
    _print_summary(rows)
    for category in sorted(by_cat):
        gaps = by_cat[category]
        print(
            f"category {category}: n={len(gaps)} mean={np.mean(gaps):.2f}% "
            f"min={np.min(gaps):.2f}% max={np.max(gaps):.2f}%"
        )
    return 0


# ---------------------------------------------------------------------------
# describe / rerun
# ---------------------------------------------------------------------------


def cmd_describe(args) -> int:
    if args.checkpoint:
        policy, _, meta = load_policy(args.checkpoint)
        desc = policy.describe()
        desc["meta"] = meta
    else:
        model_kwargs = {}
        if args.config:
            model_kwargs = json.loads(Path(args.config).read_text()).get("model", {})
        desc = SawtPolicy(SawtConfig(**model_kwargs), seed=0).describe()
    print(json.dumps(desc, indent=2, sort_keys=True))
    return 0


def cmd_rerun(args) -> int:
    manifest_path = Path(args.manifest)
    if not manifest_path.is_file():
        raise FileNotFoundError(f"manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    original_dir = manifest_path.parent
    argv = list(manifest.get("argv", []))
    if not argv:
        raise ValidationError("manifest records no argv; cannot rerun")

    new_argv = []
    skip = False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok == "--out":
            skip = True
            continue
        if tok.startswith("--out="):
            continue
        new_argv.append(tok)
    new_argv += ["--out", str(args.out)]

    code = main(new_argv)
    if code != 0:
        print(f"rerun failed with exit code {code}", file=sys.stderr)
        return code

    mismatches = []
    for rel in manifest.get("outputs", {}).get("deterministic", []):
        old_file = original_dir / rel
        new_file = Path(args.out) / rel
        if not old_file.is_file():
            mismatches.append(f"{rel}: original missing")
        elif not new_file.is_file():
            mismatches.append(f"{rel}: rerun did not produce it")
        elif old_file.read_bytes() != new_file.read_bytes():
            mismatches.append(f"{rel}: bytes differ")
    if mismatches:
        for m in mismatches:
            print(f"mismatch — {m}", file=sys.stderr)
        return 3
    n = len(manifest.get("outputs", {}).get("deterministic", []))
    print(f"rerun reproduced {n} deterministic output file(s) bit-identically")
    return 0


# ---------------------------------------------------------------------------
# Parser.
# ---------------------------------------------------------------------------


def _common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=0,
                     help="master seed; per-instance seeds are split from it "
                          "via numpy SeedSequence.spawn (default: 0)")
    sub.add_argument("--threads", type=int, default=1,
                     help="worker threads across instances (default: 1)")
    sub.add_argument("--out", type=str, default=None,
                     help="run directory; receives manifest.json and results")
    sub.add_argument("--config", type=str, default=None,
                     help="JSON config file with 'train'/'model'/'data' sections")
    sub.add_argument("--fp64-check", action="store_true",
                     help="re-verify every reported cost with a float64 "
                          "objective recomputation (exit 4 on mismatch)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sawt-qap",
        description="QAP toolkit: instance generation, classical solvers, "
                    "and a learned swap policy.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser(
        "generate", help="write random instances as JSON",
        description="Generate Euclidean-distance/sparse-flow instances; "
                    "instance k uses seed = --seed + k. Writes one JSON file "
                    "per instance plus index.json and manifest.json.",
    )
    p.add_argument("--n", type=int, required=True, help="instance size")
    p.add_argument("--count", type=int, default=1, help="number of instances (default: 1)")
    p.add_argument("--p", type=float, default=0.7,
                   help="flow sparsification probability (default: 0.7)")
    _common_flags(p)
    p.set_defaults(func=cmd_generate)

    p = subs.add_parser(
        "solve", help="run a solver over instance files",
        description="Solve instances (.json from `generate` or QAPLIB .dat). "
                    "Writes results.csv (deterministic) and results.jsonl "
                    "(adds wall_ms/sigma/trajectory).",
    )
    p.add_argument("--instances", nargs="+", required=True,
                   help="instance files and/or directories")
    p.add_argument("--solver", choices=SOLVERS, required=True, help="solver to run")
    p.add_argument("--steps", type=int, default=5000,
                   help="search budget: tabu/greedy iterations or sawt swap "
                        "steps; ignored by brute/sm (default: 5000)")
    p.add_argument("--checkpoint", type=str, default=None,
                   help="policy checkpoint (required for --solver sawt)")
    p.add_argument("--reference", type=str, default="auto",
                   help="gap reference: auto (brute for n<=%d else tabu-5000), "
                        "brute, tabu, none, or a JSON file of name->cost "
                        "(default: auto)" % BRUTE_FORCE_MAX_N)
    p.add_argument("--record-trajectory", action="store_true",
                   help="store a downsampled best-cost trajectory per instance "
                        "in results.jsonl (tabu only)")
    _common_flags(p)
    p.set_defaults(func=cmd_solve)

    p = subs.add_parser(
        "train", help="train the swap policy",
        description="Train on generated instances (or --data instance files). "
                    "Config resolution: TrainConfig defaults, then --config "
                    "file sections {train, model, data}, then CLI flags. "
                    "Writes metrics.jsonl, policy.ckpt (every epoch), "
                    "policy_best.ckpt (at best eval), and manifest.json.",
    )
    p.add_argument("--data", type=str, default=None,
                   help="directory of instance files (otherwise instances are "
                        "generated per the data config)")
    p.add_argument("--n", type=int, default=None, help="generated instance size")
    p.add_argument("--count", type=int, default=None, help="generated training instances")
    p.add_argument("--p", type=float, default=None, help="generated flow sparsity")
    p.add_argument("--eval-count", dest="eval_count", type=int, default=None,
                   help="held-out generated instances for eval")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--episode-length", dest="episode_length", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--entropy-beta", dest="entropy_beta", type=float, default=None)
    p.add_argument("--eval-every", dest="eval_every", type=int, default=None)
    p.add_argument("--eval-steps", dest="eval_steps", type=int, default=None)
    p.add_argument("--resume", type=str, default=None,
                   help="checkpoint to resume from (continues epoch numbering)")
    _common_flags(p)
    p.set_defaults(func=cmd_train, seed=None)

    p = subs.add_parser("qaplib", help="QAPLIB data commands")
    qsubs = p.add_subparsers(dest="qaplib_command", required=True)

    pf = qsubs.add_parser(
        "fetch", help="download QAPLIB instances into the local cache",
        description="Download <name>.dat (and .sln when published) from the "
                    "QAPLIB mirror into the data directory. Base URL: "
                    "--base-url, else $SAWT_QAPLIB_URL, else the public site. "
                    "Cache: --data-dir, else $SAWT_QAP_DATA_DIR, else "
                    "~/.cache/sawt-qap/qaplib.",
    )
    pf.add_argument("names", nargs="+", help="instance names, e.g. nug12 tai20a")
    pf.add_argument("--data-dir", type=str, default=None, help="cache directory")
    pf.add_argument("--base-url", type=str, default=None, help="mirror base URL")
    _common_flags(pf)
    pf.set_defaults(func=cmd_qaplib_fetch)

    pb = qsubs.add_parser(
        "bench", help="benchmark a solver against QAPLIB best-known values",
        description="Solve named QAPLIB instances and report gaps vs the "
                    "embedded best-known values. Zero-bound instances are "
                    "flagged and excluded from gap aggregates (their absolute "
                    "cost still appears in best_cost). Writes results.csv, "
                    "categories.csv, results.jsonl.",
    )
    pb.add_argument("names", nargs="+", help="instance names (comma or space separated)")
    pb.add_argument("--solver", choices=[s for s in SOLVERS if s != "sawt"],
                    default="tabu", help="solver to benchmark (default: tabu)")
    pb.add_argument("--steps", type=int, default=5000,
                    help="search budget (default: 5000)")
    pb.add_argument("--data-dir", type=str, default=None, help="QAPLIB cache directory")
    _common_flags(pb)
    pb.set_defaults(func=cmd_qaplib_bench)

    p = subs.add_parser(
        "describe", help="print the policy parameter census as JSON",
        description="Without --checkpoint, describes a freshly initialized "
                    "model built from the --config file's 'model' section "
                    "(or defaults).",
    )
    p.add_argument("--checkpoint", type=str, default=None, help="saved policy to describe")
    _common_flags(p)
    p.set_defaults(func=cmd_describe)

    p = subs.add_parser(
        "rerun", help="replay a manifest and verify bit-identical outputs",
        description="Re-executes the argv recorded in a manifest.json with a "
                    "fresh --out and byte-compares every deterministic output "
                    "file. Exit 0 when identical, 3 on any mismatch.",
    )
    p.add_argument("manifest", help="path to a run's manifest.json")
    p.add_argument("--out", type=str, required=True, help="fresh run directory")
    p.set_defaults(func=cmd_rerun)

    return parser


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    args._argv = list(argv)
    try:
        return args.func(args) or 0
    except NumericalAbortError as err:
        print(f"numerical abort: {err}", file=sys.stderr)
        if err.diagnostics:
            print(json.dumps(err.diagnostics, default=str, sort_keys=True),
                  file=sys.stderr)
        return 4
    except (ValidationError, ParseError, CheckpointError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except SawtQapError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except OSError as err:  # missing files, unreachable mirrors
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
