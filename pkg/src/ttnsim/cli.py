"""
Command-line front end: ``ttnsim <command> --config run.json``.

Commands:
    build-ttno      Compile the Hamiltonian of the config into a TTNO and
                    write a JSON report.
    evolve          Run a time evolution and write a CSV with a sidecar JSON.
    compare-exact   Run a time evolution and the exact state-vector
                    evolution and write the pointwise error of the first
                    operator.
    trotter-scan    Final-time Trotter error of a two-site model for every
                    time step, both splitting orders and all basis and Bell
                    states.

Exit codes: 0 success, 2 configuration error, 3 capability error,
4 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional

import numpy as np
import scipy

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .evolution.run import Method, TimeEvoConfig, run
from .evolution.trotter import TrotterSplitting
from .models import (TfiSpec, build_q_tree, error_series, exact_evolution, exact_expectations,
                     loglog_slope, random_pauli_hamiltonian, random_simple_hamiltonian,
                     single_excited_neighbour_operator, tfi_hamiltonian, tfi_trotter_splitting,
                     trotter_final_error, two_qubit_test_states)
from .operators import (DENSE_CAP, CapabilityError, Hamiltonian, TensorProduct, pauli_library,
                        projector_library, to_dense)
from .tensor_core import SvdParameters
from .tree import TreeTopology
from .ttno import ttno_from_dense, ttno_from_hamiltonian
from .ttns import TTNS, product_state

log = logging.getLogger("ttnsim")

EXIT_OK, EXIT_CONFIG, EXIT_CAPABILITY, EXIT_NUMERIC = 0, 2, 3, 4

# Dense operator checks hold a full matrix, so they stop well below the
# state-vector cap.
OPERATOR_MATRIX_CAP = 2 ** 10


@dataclass
class Model:
    tree: TreeTopology
    dims: Dict[str, int]
    ham: Hamiltonian
    tfi: Optional[TfiSpec] = None

    @property
    def symbols(self) -> Dict[str, np.ndarray]:
        return {**pauli_library(), **projector_library(), **self.ham.symbol_table}


def _complex_matrix(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


def build_model(spec: Mapping, rng: np.random.Generator) -> Model:
    name = spec["name"]
    if name == "tfi":
        tfi = TfiSpec(spec["L"], spec["J"], spec["g"], spec["four_site"])
        tree, dims = build_q_tree(tfi.L)
        return Model(tree, dims, tfi_hamiltonian(tfi), tfi)
    if name == "single_excited_neighbour":
        tree, dims = build_q_tree(2)
        return Model(tree, dims, single_excited_neighbour_operator())
    if name == "simple_two_qubit":
        tree = TreeTopology.from_edges("a", [("a", "b")])
        return Model(tree, {"a": 2, "b": 2}, random_simple_hamiltonian(rng, ("a", "b")))
    try:
        tree = TreeTopology.from_dict(spec["tree"])
    except ValueError as exc:
        raise ConfigError(f"Invalid tree description: {exc}") from exc
    if name == "random":
        dims = {n: 2 for n in tree.depth_first()}
        num_terms = int(rng.integers(spec["min_terms"], spec["max_terms"] + 1))
        ham = random_pauli_hamiltonian(rng, tree, num_terms, spec["unit_coefficients"])
        return Model(tree, dims, ham)
    symbols = {**pauli_library(), **projector_library()}
    symbols.update({k: _complex_matrix(v) for k, v in spec["symbols"].items()})
    unknown = set(spec["dims"]) - set(tree.depth_first())
    if unknown:
        raise ConfigError(f"Dimensions given for unknown nodes {sorted(unknown)}")
    dims = {n: spec["dims"].get(n, 2) for n in tree.depth_first()}
    ham = Hamiltonian(symbol_table=symbols)
    for term in spec["terms"]:
        for node, symbol in term["factors"].items():
            if node not in dims:
                raise ConfigError(f"Term acts on unknown node {node!r}")
            if symbol not in symbols:
                raise ConfigError(f"Unknown operator symbol {symbol!r}")
            if symbols[symbol].shape != (dims[node], dims[node]):
                raise ConfigError(f"Symbol {symbol!r} does not fit node {node!r}")
        ham.add_term(complex(*term["coeff"]), term["factors"])
    return Model(tree, dims, ham)


def build_initial_state(spec: Optional[Mapping], model: Model) -> TTNS:
    tree, dims = model.tree, model.dims
    if spec is None:
        spec = {"neel_like": True} if model.tfi is not None else {"product": {}}
    if "neel_like" in spec:
        dist = tree.distances_from(tree.root)
        levels = {n: dist[n] % 2 for n in tree.depth_first()}
        local = {n: np.eye(dims[n], dtype=complex)[levels[n]] for n in tree.depth_first()}
        return product_state(tree, local)
    given = spec["product"]
    unknown = set(given) - set(dims)
    if unknown:
        raise ConfigError(f"Initial state given for unknown nodes {sorted(unknown)}")
    local = {}
    for node in tree.depth_first():
        value = given.get(node, "0")
        if isinstance(value, str):
            vec = np.eye(dims[node], dtype=complex)[int(value)]
        else:
            vec = np.array([complex(re, im) for re, im in value])
            if vec.shape != (dims[node],) or not np.linalg.norm(vec) > 0:
                raise ConfigError(f"Local state of {node!r} must be a non-zero vector "
                                  f"of length {dims[node]}")
            vec = vec / np.linalg.norm(vec)
        local[node] = vec
    return product_state(tree, local)


def build_operators(spec: Mapping, model: Model) -> Dict[str, TensorProduct]:
    if not spec:
        spec = {"M": "total_magnetisation"}
    ops = {}
    for name, value in spec.items():
        if value == "total_magnetisation":
            ops[name] = TensorProduct({n: "Z" for n in model.tree.depth_first()})
            continue
        for node in value["factors"]:
            if node not in model.dims:
                raise ConfigError(f"Operator {name!r} acts on unknown node {node!r}")
        ops[name] = TensorProduct(value["factors"])
    return ops


def _edge_label(edge) -> str:
    return f"{edge[0]}-{edge[1]}"


def _tebd_splitting(model: Model) -> TrotterSplitting:
    if model.tfi is not None:
        return tfi_trotter_splitting(model.tfi)
    for _, tp in model.ham.terms:
        sites = list(tp)
        if len(sites) > 2 or (len(sites) == 2 and not model.tree.are_adjacent(*sites)):
            raise CapabilityError("TEBD from a config supports one-site terms and two-site terms "
                                  "on neighbouring nodes; use a TDVP method")
    return TrotterSplitting.from_hamiltonian(model.ham, order=2)


def _evolve(cfg: RunConfig, model: Model, psi: TTNS):
    method = Method(cfg.method["name"])
    ops = build_operators(cfg.operators, model)
    if method is Method.TEBD:
        engine_input = _tebd_splitting(model)
    else:
        engine_input = ttno_from_hamiltonian(model.ham, model.tree, model.dims)
    params = SvdParameters(max_bond_dim=cfg.method["max_bond_dim"], rel_tol=cfg.method["rel_tol"],
                           total_tol=cfg.method["total_tol"], renorm=cfg.method["renorm"])
    evo = TimeEvoConfig(cfg.method["dt"], cfg.method["T"], ops, svd_params=params,
                        max_bond_dim=cfg.method["max_bond_dim"], symbols=model.symbols)
    return run(psi, method, engine_input, evo), ops


def _sidecar(path: Path, command: str, cfg: RunConfig, runtime: float, **extra):
    info = {
        "command": command,
        "config": cfg.to_dict(),
        "method": cfg.method["name"],
        "versions": {"ttnsim": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "runtime_seconds": runtime,
        **extra,
    }
    path.write_text(json.dumps(info, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_build_ttno(cfg: RunConfig, out: Path) -> dict:
    model = build_model(cfg.model, np.random.default_rng(cfg.seed))
    ttno = ttno_from_hamiltonian(model.ham, model.tree, model.dims)
    report = {
        "bond_dims": {_edge_label(e): d for e, d in ttno.bond_dims().items()},
        "total_entries": ttno.total_entries(),
        "dense_check": None,
    }
    if cfg.checks["dense"] or cfg.checks["compare_svd"]:
        order = model.tree.depth_first()
        dense = to_dense(model.ham, order, model.dims, cap=OPERATOR_MATRIX_CAP)
        if cfg.checks["dense"]:
            err = float(np.max(np.abs(ttno.to_matrix() - dense)))
            report["dense_check"] = err <= 1e-12
            report["dense_max_error"] = err
        if cfg.checks["compare_svd"]:
            svd_dims = ttno_from_dense(dense, model.tree, model.dims).bond_dims()
            report["svd_bond_dims"] = {_edge_label(e): d for e, d in svd_dims.items()}
            report["equal_on_all_edges"] = svd_dims == ttno.bond_dims()
    path = out / f"{cfg.output or 'ttno_report'}.json"
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    log.info("TTNO with %d stored entries, bond dimensions %s", report["total_entries"],
             report["bond_dims"])
    if "equal_on_all_edges" in report:
        log.info("equal on all edges: %s", str(report["equal_on_all_edges"]).lower())
    return report


def cmd_evolve(cfg: RunConfig, out: Path):
    start = time.perf_counter()
    model = build_model(cfg.model, np.random.default_rng(cfg.seed))
    result, _ = _evolve(cfg, model, build_initial_state(cfg.initial_state, model))
    stem = cfg.output or "evolve"
    result.write_csv(out / f"{stem}.csv")
    _sidecar(out / f"{stem}.json", "evolve", cfg, time.perf_counter() - start)
    log.info("Wrote %d time points to %s", len(result.times), out / f"{stem}.csv")
    return result


def cmd_compare_exact(cfg: RunConfig, out: Path) -> np.ndarray:
    start = time.perf_counter()
    model = build_model(cfg.model, np.random.default_rng(cfg.seed))
    psi = build_initial_state(cfg.initial_state, model)
    order = model.tree.depth_first()
    total = int(np.prod([model.dims[n] for n in order], dtype=np.int64))
    if total > DENSE_CAP:
        raise CapabilityError(f"Hilbert space dimension {total} exceeds the cap {DENSE_CAP} "
                              "of the exact reference")
    psi0 = psi.to_vector()
    result, ops = _evolve(cfg, model, psi)
    name, op = next(iter(ops.items()))
    states = exact_evolution(model.ham, psi0, cfg.method["dt"], cfg.method["T"], order, model.dims)
    exact = exact_expectations(states, op, order, model.dims, model.symbols)
    errors = error_series(exact, result.values[name])
    stem = cfg.output or "compare_exact"
    with open(out / f"{stem}.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "error"])
        writer.writerows([f"{t:.17g}", f"{e:.17g}"] for t, e in zip(result.times, errors))
    max_error = float(np.max(errors))
    _sidecar(out / f"{stem}.json", "compare-exact", cfg, time.perf_counter() - start,
             operator=name, max_error=max_error)
    print(f"max error of {name}: {max_error:.6e}")
    return errors


def _scan_state(args):
    ham, vector, dts, final_time, order, dims = args
    rows = {}
    for splitting_order in (1, 2):
        splitting = TrotterSplitting.from_hamiltonian(ham, splitting_order)
        rows[splitting_order] = [trotter_final_error(ham, splitting, vector, dt, final_time,
                                                     order, dims) for dt in dts]
    return rows


def cmd_trotter_scan(cfg: RunConfig, out: Path, jobs: int = 1) -> dict:
    start = time.perf_counter()
    model = build_model(cfg.model, np.random.default_rng(cfg.seed))
    if len(model.dims) != 2 or any(d != 2 for d in model.dims.values()):
        raise ConfigError("trotter-scan needs a model on two qubits")
    order = model.tree.depth_first()
    dts, final_time = list(cfg.scan["dts"]), cfg.scan["T"]
    states = two_qubit_test_states()
    tasks = [(model.ham, vec, dts, final_time, order, model.dims) for vec in states.values()]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_scan_state, tasks))
    else:
        results = [_scan_state(t) for t in tasks]
    slopes = {1: {}, 2: {}}
    stem = cfg.output or "trotter_scan"
    with open(out / f"{stem}.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["dt", "order", "state", "error"])
        for splitting_order in (1, 2):
            for state, rows in zip(states, results):
                errs = rows[splitting_order]
                writer.writerows([f"{dt:.17g}", splitting_order, state, f"{e:.17g}"]
                                 for dt, e in zip(dts, errs))
                fit = len(set(dts)) > 1 and all(e > 0 for e in errs)
                slopes[splitting_order][state] = loglog_slope(dts, errs) if fit else None
    summary = {"first_order": slopes[1], "strang": slopes[2]}
    _sidecar(out / f"{stem}.json", "trotter-scan", cfg, time.perf_counter() - start,
             slopes=summary)
    for label, values in summary.items():
        fitted = [v for v in values.values() if v is not None]
        if fitted:
            log.info("%s slopes between %.3f and %.3f", label, min(fitted), max(fitted))
    return summary


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ttnsim", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("build-ttno", "evolve", "compare-exact", "trotter-scan"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=".", help="Output directory")
        p.add_argument("--seed", type=int, help="Overrides the seed of the config")
        p.add_argument("--quiet", action="store_true", help="Only report errors")
        if name == "build-ttno":
            p.add_argument("--compare-svd", action="store_true",
                           help="Compare bond dimensions with a dense SVD compression")
        if name in ("evolve", "compare-exact"):
            p.add_argument("--method", choices=[m.value for m in Method])
        if name == "trotter-scan":
            p.add_argument("--jobs", type=int, default=1, help="Parallel worker processes")
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("The seed must be an unsigned 64-bit integer")
        cfg.seed = args.seed
    if getattr(args, "method", None):
        cfg.method["name"] = args.method
    if getattr(args, "compare_svd", False):
        cfg.checks["compare_svd"] = True
    return cfg


def main(argv: Optional[List[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "build-ttno":
            cmd_build_ttno(cfg, out)
        elif args.command == "evolve":
            cmd_evolve(cfg, out)
        elif args.command == "compare-exact":
            cmd_compare_exact(cfg, out)
        else:
            if args.jobs < 1:
                raise ConfigError("--jobs must be at least 1")
            cmd_trotter_scan(cfg, out, args.jobs)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    except FloatingPointError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
