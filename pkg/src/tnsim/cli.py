"""Command-line front end: circuit generation, runs, benchmarks, factoring.

Subcommands: gen, run, bench, shor.  Run records are emitted as JSON on
stdout (or one CSV row with ``--output csv``); timings cover engine
execution only, on the monotonic clock, at millisecond resolution.  The
``TNSIM_ORACLE_CAP`` environment variable overrides the dense-oracle qubit
cap used by ``--compare``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict

import numpy as np

from . import kernels
from .circuit import Circuit, generate_random_structured, read_circuit, write_circuit
from .cluster import ClusterConfig, run_cluster_tebd
from .dmrg import DmrgConfig, run_dmrg
from .errors import SimulationError
from .mps import Mps, overlap, write_snapshot
from .oracle import exact_fidelity, qubit_cap, simulate_dense
from .shor import ShorParams, build_order_finding_circuit, run_shor
from .tebd import TebdConfig, run_tebd
from .tensor import TruncationPolicy

CSV_FIELDS = [
    "algorithm",
    "num_qubits",
    "num_layers",
    "family",
    "seed",
    "wall_time_s",
    "fidelity_estimate",
    "max_chi",
]


def _read_meta(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        return payload.get("meta", {}) if isinstance(payload, dict) else {}
    except (OSError, json.JSONDecodeError):
        return {}


def _engine_dispatch(circuit: Circuit, args) -> tuple[Mps, float, int, dict]:
    """Run the selected engine; returns (state, fidelity, max_chi, details)."""
    policy = TruncationPolicy(chi_max=args.chi_max, cutoff_eta=args.cutoff)
    initial = Mps.from_product_state([0] * circuit.num_qubits)
    if args.algorithm == "tebd":
        final, ledger, stats = run_tebd(circuit, initial, TebdConfig(policy))
        details = {
            "per_layer_max_chi": stats.per_layer_max_chi,
            "truncation_count": stats.truncation_count,
            "num_gates": stats.num_gates,
        }
        return final, ledger.fidelity_estimate, stats.max_chi, {
            "wall_time_s": stats.wall_time_s,
            **details,
        }
    if args.algorithm == "cluster-tebd":
        cfg = ClusterConfig(
            q_max=args.q_max,
            policy=policy,
            l_max=args.l_max,
            parallel_clusters=args.parallel_clusters,
        )
        final, ledger, stats = run_cluster_tebd(circuit, initial, cfg)
        return final, ledger.fidelity_estimate, stats.max_chi, {
            "wall_time_s": stats.wall_time_s,
            "num_iterations": stats.num_iterations,
            "num_fallback_layers": stats.num_fallback_layers,
            "total_flops": stats.total_flops,
            "iterations": stats.iterations,
        }
    if args.algorithm == "dmrg":
        cfg = DmrgConfig(
            l_max=args.l_max or 4,
            chi_max_dmrg=args.chi_max_dmrg,
            chi_max_svd=args.chi_max_svd,
            q_max=args.q_max,
            n_sweeps=args.sweeps,
            grouping_mode=args.grouping,
            seed=args.seed,
        )
        final, proxy, stats = run_dmrg(circuit, cfg, initial)
        return final, proxy, stats.max_chi, {
            "wall_time_s": stats.wall_time_s,
            "truncation_count": stats.truncation_count,
            "steps": stats.steps,
        }
    raise ValueError(f"unknown algorithm {args.algorithm!r}")


def _run_record(circuit: Circuit, args, path: str | None) -> dict:
    meta = _read_meta(path) if path else {}
    final, fidelity, max_chi, details = _engine_dispatch(circuit, args)
    record = {
        "algorithm": args.algorithm,
        "kernel_backend": kernels.BACKEND,
        "circuit": {
            "path": path,
            "num_qubits": circuit.num_qubits,
            "num_layers": circuit.num_layers,
            "family": meta.get("family"),
            "seed": meta.get("seed"),
        },
        "config": {
            "chi_max": args.chi_max,
            "cutoff": args.cutoff,
            "q_max": args.q_max,
            "l_max": args.l_max,
            "chi_max_dmrg": args.chi_max_dmrg,
            "chi_max_svd": args.chi_max_svd,
            "sweeps": args.sweeps,
            "grouping": args.grouping,
            "seed": args.seed,
        },
        "wall_time_s": round(details.pop("wall_time_s"), 3),
        "fidelity_estimate": fidelity,
        "max_chi": max_chi,
        "details": details,
    }
    if getattr(args, "compare", False):
        policy = TruncationPolicy(chi_max=args.chi_max, cutoff_eta=args.cutoff)
        ref, ref_ledger, _ = run_tebd(
            circuit, Mps.from_product_state([0] * circuit.num_qubits), TebdConfig(policy)
        )
        compare = {
            "tebd_overlap_sq": float(abs(overlap(ref, final)) ** 2),
            "tebd_fidelity_estimate": ref_ledger.fidelity_estimate,
        }
        if circuit.num_qubits <= qubit_cap():
            sv = simulate_dense(circuit, [0] * circuit.num_qubits)
            compare["oracle_fidelity"] = exact_fidelity(final, sv)
            compare["oracle_fidelity_tebd"] = exact_fidelity(ref, sv)
        record["compare"] = compare
    if getattr(args, "dump_state", None):
        write_snapshot(final, args.dump_state)
        record["state_snapshot"] = args.dump_state
    return record


def _emit_record(record: dict, output: str) -> None:
    if output == "csv":
        row = {
            "algorithm": record["algorithm"],
            "num_qubits": record["circuit"]["num_qubits"],
            "num_layers": record["circuit"]["num_layers"],
            "family": record["circuit"].get("family"),
            "seed": record["circuit"].get("seed"),
            "wall_time_s": record["wall_time_s"],
            "fidelity_estimate": record["fidelity_estimate"],
            "max_chi": record["max_chi"],
        }
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS)
        writer.writeheader()
        writer.writerow(row)
        sys.stdout.write(buf.getvalue())
    else:
        json.dump(record, sys.stdout, default=_json_default)
        sys.stdout.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def cmd_gen(args) -> int:
    circuit = generate_random_structured(
        args.num_qubits, args.num_layers, args.family, args.seed
    )
    write_circuit(circuit, args.out)
    # append generator metadata for benchmark records (ignored by readers)
    with open(args.out, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    payload["meta"] = {"family": args.family, "seed": args.seed}
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, separators=(",", ":"), sort_keys=True)
        fh.write("\n")
    print(
        json.dumps(
            {
                "path": args.out,
                "num_qubits": circuit.num_qubits,
                "num_layers": circuit.num_layers,
                "num_gates": len(circuit.gates),
            }
        )
    )
    return 0


def cmd_run(args) -> int:
    circuit = read_circuit(args.circuit)
    record = _run_record(circuit, args, args.circuit)
    _emit_record(record, args.output)
    return 0


def _bench_cell(cell: dict) -> dict:
    """One (circuit, seed, algorithm) bench cell; must stay picklable."""
    ns = argparse.Namespace(**cell["args"])
    try:
        circuit = generate_random_structured(
            cell["num_qubits"], cell["num_layers"], cell["family"], cell["seed"]
        )
        record = _run_record(circuit, ns, None)
        record["circuit"]["family"] = cell["family"]
        record["circuit"]["seed"] = cell["seed"]
        record["label"] = cell["label"]
        record["status"] = "ok"
        return record
    except Exception as exc:  # partial-failure report, not a crash
        return {
            "label": cell["label"],
            "status": "error",
            "error": {"type": type(exc).__name__, "message": str(exc)},
            "circuit": {
                "num_qubits": cell["num_qubits"],
                "num_layers": cell["num_layers"],
                "family": cell["family"],
                "seed": cell["seed"],
            },
        }


def _algorithm_args(spec: dict, base_seed: int) -> dict:
    return {
        "algorithm": spec["name"],
        "chi_max": int(spec.get("chi_max", 64)),
        "cutoff": float(spec.get("cutoff", 0.0)),
        "q_max": int(spec.get("q_max", 20)),
        "l_max": spec.get("l_max"),
        "chi_max_dmrg": int(spec.get("chi_max_dmrg", 256)),
        "chi_max_svd": int(spec.get("chi_max_svd", 4096)),
        "sweeps": int(spec.get("sweeps", 3)),
        "grouping": spec.get("grouping", "adaptive"),
        "seed": base_seed,
        "compare": False,
        "dump_state": None,
        "parallel_clusters": bool(spec.get("parallel_clusters", False)),
    }


def cmd_bench(args) -> int:
    with open(args.suite, "r", encoding="utf-8") as fh:
        suite = json.load(fh)
    cells = []
    for circ in suite["circuits"]:
        for seed in circ["seeds"]:
            for alg in suite["algorithms"]:
                label = alg.get("label") or alg["name"]
                cells.append(
                    {
                        "num_qubits": circ["num_qubits"],
                        "num_layers": circ["num_layers"],
                        "family": circ.get("family", "nonclifford"),
                        "seed": seed,
                        "label": label,
                        "args": _algorithm_args(alg, seed),
                    }
                )
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            records = list(pool.map(_bench_cell, cells))
    else:
        records = [_bench_cell(cell) for cell in cells]

    # aggregate per (circuit shape, label)
    groups: dict[tuple, list[dict]] = {}
    for rec in records:
        circ = rec["circuit"]
        key = (circ["num_qubits"], circ["num_layers"], circ["family"], rec["label"])
        groups.setdefault(key, []).append(rec)
    aggregates = []
    for (nq, nl, family, label), recs in sorted(groups.items()):
        ok = [r for r in recs if r["status"] == "ok"]
        agg = {
            "label": label,
            "num_qubits": nq,
            "num_layers": nl,
            "family": family,
            "n_samples": len(recs),
            "n_failed": len(recs) - len(ok),
        }
        if ok:
            times = [r["wall_time_s"] for r in ok]
            fids = [r["fidelity_estimate"] for r in ok]
            agg.update(
                mean_wall_time_s=float(np.mean(times)),
                std_wall_time_s=float(np.std(times)),
                mean_fidelity=float(np.mean(fids)),
                std_fidelity=float(np.std(fids)),
            )
        aggregates.append(agg)

    # fixed-over-adaptive runtime ratio per circuit shape, where both exist
    speedups = []
    by_shape: dict[tuple, dict[str, dict]] = {}
    for agg in aggregates:
        if "mean_wall_time_s" not in agg:
            continue
        shape = (agg["num_qubits"], agg["num_layers"], agg["family"])
        by_shape.setdefault(shape, {})[agg["label"]] = agg
    for shape, labelled in sorted(by_shape.items()):
        fixed = [a for label, a in labelled.items() if "fixed" in label]
        adaptive = [a for label, a in labelled.items() if "adaptive" in label]
        if len(fixed) == 1 and len(adaptive) == 1:
            speedups.append(
                {
                    "num_qubits": shape[0],
                    "num_layers": shape[1],
                    "family": shape[2],
                    "speedup_fixed_over_adaptive": fixed[0]["mean_wall_time_s"]
                    / adaptive[0]["mean_wall_time_s"],
                }
            )

    if args.records:
        with open(args.records, "w", encoding="utf-8") as fh:
            for rec in records:
                json.dump(rec, fh, default=_json_default)
                fh.write("\n")
    if args.output == "csv":
        fields = [
            "label", "num_qubits", "num_layers", "family", "n_samples", "n_failed",
            "mean_wall_time_s", "std_wall_time_s", "mean_fidelity", "std_fidelity",
        ]
        writer = csv.DictWriter(sys.stdout, fieldnames=fields)
        writer.writeheader()
        for agg in aggregates:
            writer.writerow({k: agg.get(k) for k in fields})
    else:
        json.dump(
            {"aggregates": aggregates, "speedups": speedups, "records": records},
            sys.stdout,
            default=_json_default,
        )
        sys.stdout.write("\n")
    return 0


def cmd_shor(args) -> int:
    params = ShorParams(
        n_to_factor=args.number,
        base=args.base,
        epsilon=args.epsilon,
        seed=args.seed,
    )
    if args.report_only:
        params.validate()
        base = params.base
        if base is None:
            base = params.pick_base(np.random.default_rng(args.seed))
        circuit, report = build_order_finding_circuit(
            ShorParams(args.number, base, args.epsilon, args.seed)
        )
        print(json.dumps({"report_only": True, "base": base, **asdict(report)}))
        return 0
    result = run_shor(
        params,
        backend=args.backend,
        chi_max=args.chi_max,
        cutoff=args.cutoff,
        q_max=args.q_max,
        l_max=args.l_max,
        max_attempts=args.samples,
    )
    payload = asdict(result)
    payload["report"] = asdict(result.report)
    print(json.dumps(payload, default=_json_default))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tnsim",
        description="Finite-fidelity MPS simulation of quantum circuits",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a random-structured circuit file")
    gen.add_argument("num_qubits", type=int)
    gen.add_argument("num_layers", type=int)
    gen.add_argument("family", choices=["clifford", "nonclifford"])
    gen.add_argument("seed", type=int)
    gen.add_argument("out")
    gen.set_defaults(func=cmd_gen)

    run = sub.add_parser("run", help="simulate a circuit file with one engine")
    run.add_argument("circuit")
    run.add_argument("algorithm", choices=["tebd", "cluster-tebd", "dmrg"])
    _common_engine_flags(run)
    run.add_argument("--compare", action="store_true",
                     help="also run standard TEBD and the dense oracle when feasible")
    run.add_argument("--dump-state", default=None, metavar="PATH",
                     help="write the final MPS snapshot to PATH")
    run.add_argument("--output", choices=["json", "csv"], default="json")
    run.set_defaults(func=cmd_run)

    bench = sub.add_parser("bench", help="run a benchmark suite file")
    bench.add_argument("suite")
    bench.add_argument("--jobs", type=int, default=1)
    bench.add_argument("--records", default=None, metavar="PATH",
                       help="write raw per-cell records as JSON lines")
    bench.add_argument("--output", choices=["json", "csv"], default="json")
    bench.set_defaults(func=cmd_bench)

    shor = sub.add_parser("shor", help="end-to-end factoring attempt")
    shor.add_argument("number", type=int)
    shor.add_argument("--base", type=int, default=None)
    shor.add_argument("--epsilon", type=float, default=1e-3)
    shor.add_argument("--backend", default="cluster-tebd",
                      choices=["tebd", "cluster-tebd", "dmrg", "statevector"])
    shor.add_argument("--chi-max", type=int, default=64)
    shor.add_argument("--cutoff", type=float, default=0.0)
    shor.add_argument("--q-max", type=int, default=14)
    shor.add_argument("--l-max", type=int, default=512)
    shor.add_argument("--seed", type=int, default=0)
    shor.add_argument("--samples", type=int, default=10,
                      help="sampling attempts before giving up")
    shor.add_argument("--report-only", action="store_true",
                      help="build the circuit and print counts without simulating")
    shor.set_defaults(func=cmd_shor)
    return parser


def _common_engine_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--chi-max", type=int, default=64)
    sub.add_argument("--cutoff", type=float, default=0.0)
    sub.add_argument("--q-max", type=int, default=20)
    sub.add_argument("--l-max", type=int, default=None)
    sub.add_argument("--chi-max-dmrg", type=int, default=256)
    sub.add_argument("--chi-max-svd", type=int, default=4096)
    sub.add_argument("--sweeps", type=int, default=3)
    sub.add_argument("--grouping", choices=["adaptive", "fixed"], default="adaptive")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--parallel-clusters", action="store_true")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SimulationError as exc:
        json.dump(
            {"error": {"type": type(exc).__name__, "message": str(exc)}}, sys.stdout
        )
        sys.stdout.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
