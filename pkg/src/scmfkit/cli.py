"""Batch front door: config ingestion, subcommand dispatch, result emission.

Every run echoes its fully resolved configuration into the result document;
identical configs and seeds produce byte-identical documents (anything
volatile lives in the sibling .meta.json).  Exit codes: 0 success, 1 a run
that finished but did not converge / was infeasible, 2 usage or config
errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields as dataclass_fields
from pathlib import Path

import numpy as np

from . import edf, fock_oracle, reporting, search
from .check import run_checks
from .errors import BracketError, ConfigError, NotRepresentable, ScmfkitError
from .fock_oracle import SearchOptions, enumerate_basis, ground_state, hamiltonian_from_config
from .scf import SolverConfig, solve_hf, solve_hfb, solve_ks, solve_ksbdg

DEFAULT_SEED = 42

SOLVER_KEYS = {f.name for f in dataclass_fields(SolverConfig)}

MODEL_PRESET_KEYS = {
    "hubbard_chain": {"L", "tau", "U", "periodic"},
    "pairing": {"levels", "spacing", "G"},
}
FUNCTIONAL_PRESET_KEYS = {
    "lattice1d": {"L", "spacing", "mass", "t0", "t3", "gamma", "potential", "active",
                  "pairing_strength", "spring"},
    "ks_partitioned": {"L", "spacing", "mass", "t0", "t3", "gamma", "potential", "active",
                       "pairing_strength", "spring"},
    "hf_from_hamiltonian": {"hamiltonian"},
    "hfb_from_hamiltonian": {"hamiltonian"},
}


def env_seed() -> int:
    raw = os.environ.get("SCMFKIT_SEED")
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError as err:
        raise ConfigError(f"SCMFKIT_SEED must be an integer, got {raw!r}") from err


def parse_inline_spec(text) -> dict:
    """'name:key=val,key=val', a JSON file path, or an already-parsed mapping."""
    if isinstance(text, dict):
        return dict(text)
    path = Path(text)
    if path.suffix == ".json" or path.exists():
        return load_json_config(path)
    name, _, args = text.partition(":")
    out = {"preset": name}
    if args:
        for chunk in args.split(","):
            key, _, value = chunk.partition("=")
            if not _ or not key:
                raise ConfigError(f"malformed inline parameter {chunk!r} in {text!r}")
            out[key] = _coerce(value)
    return out


def _coerce(value: str):
    for caster in (int, float):
        try:
            return caster(value)
        except ValueError:
            continue
    if value.lower() in ("true", "false"):
        return value.lower() == "true"
    return value


def load_json_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(
            f"{path}:{err.lineno}:{err.colno}: malformed JSON ({err.msg})"
        ) from err


def _reject_unknown(section: dict, allowed, where: str):
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys {unknown} in {where} (allowed: {sorted(allowed)})")


def _validate_model_config(cfg: dict, presets) -> dict:
    if "preset" in cfg:
        name = cfg["preset"]
        if name not in presets:
            raise ConfigError(f"unknown preset {name!r} (known: {sorted(presets)})")
        _reject_unknown({k: v for k, v in cfg.items() if k != "preset"}, presets[name],
                        f"preset {name!r}")
    else:
        _reject_unknown(cfg, {"M", "t", "V", "sector"}, "explicit model definition")
    return cfg


def build_solver_config(section: dict, seed: int) -> SolverConfig:
    _reject_unknown(section, SOLVER_KEYS, "the solver section")
    merged = {"seed": seed, **section}
    try:
        return SolverConfig(**merged)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad solver section: {err}") from err


def _resolved_config(args, extra: dict) -> dict:
    out = {"command": args.command, "seed": args.seed, "output": str(args.out)}
    out.update(extra)
    return out


# ---------------------------------------------------------------------------
# subcommand bodies


def _emit_report(args, report, config, name):
    sections = reporting.solver_sections(report)
    reporting.write_result(args.out, name, config, sections)
    if args.plot:
        from .plots import save_report_figure

        save_report_figure(report, Path(args.out) / f"{name}.png", title=name)
    status = "converged" if report.converged else "NOT CONVERGED"
    print(f"{name}: {status} E = {report.energy:.12g} ({report.iterations} iterations)"
          f" -> {Path(args.out) / (name + '.txt')}")
    for warning in report.warnings:
        print(f"  warning: {warning}")
    return 0 if report.converged else 1


def cmd_solve_hf(args):
    model_cfg = _validate_model_config(parse_inline_spec(args.model), MODEL_PRESET_KEYS)
    ham = hamiltonian_from_config(model_cfg)
    cfg = build_solver_config(args.solver_section, args.seed)
    report = solve_hf(ham.t, ham.vbar, args.n_particles, cfg)
    config = _resolved_config(args, {"model": model_cfg, "N": args.n_particles,
                                     "solver": args.solver_section})
    return _emit_report(args, report, config, args.tag or "solve-hf")


def cmd_solve_hfb(args):
    model_cfg = _validate_model_config(parse_inline_spec(args.model), MODEL_PRESET_KEYS)
    ham = hamiltonian_from_config(model_cfg)
    cfg = build_solver_config(args.solver_section, args.seed)
    report = solve_hfb(ham.t, ham.vbar, args.n_particles, cfg)
    config = _resolved_config(args, {"model": model_cfg, "N": args.n_particles,
                                     "solver": args.solver_section})
    return _emit_report(args, report, config, args.tag or "solve-hfb")


def cmd_solve_ks(args):
    fn_cfg = _validate_model_config(parse_inline_spec(args.functional), FUNCTIONAL_PRESET_KEYS)
    functional = edf.functional_from_config(dict(fn_cfg))
    cfg = build_solver_config(args.solver_section, args.seed)
    report = solve_ks(functional, args.n_particles, cfg)
    config = _resolved_config(args, {"functional": fn_cfg, "N": args.n_particles,
                                     "solver": args.solver_section})
    return _emit_report(args, report, config, args.tag or "solve-ks")


def cmd_solve_ksbdg(args):
    fn_cfg = _validate_model_config(parse_inline_spec(args.functional), FUNCTIONAL_PRESET_KEYS)
    functional = edf.functional_from_config(dict(fn_cfg))
    cfg = build_solver_config(args.solver_section, args.seed)
    report = solve_ksbdg(functional, args.n_particles, cfg)
    config = _resolved_config(args, {"functional": fn_cfg, "N": args.n_particles,
                                     "solver": args.solver_section})
    return _emit_report(args, report, config, args.tag or "solve-ksbdg")


def cmd_oracle(args):
    model_cfg = _validate_model_config(parse_inline_spec(args.model), MODEL_PRESET_KEYS)
    ham = hamiltonian_from_config(model_cfg)
    if args.sector == "full":
        basis = enumerate_basis(ham.num_orbitals, "full")
    else:
        basis = enumerate_basis(ham.num_orbitals, "fixed", args.n_particles)
    energy, state = ground_state(ham, basis)
    rho = fock_oracle.one_body_density(state)
    config = _resolved_config(args, {"model": model_cfg, "N": args.n_particles,
                                     "sector": args.sector})
    sections = {
        "result": {"task": "oracle", "energy": energy, "basis_size": basis.size},
        "natural_occupations": rho.eigenvalues,
        "density": rho.array,
    }
    if args.sector == "full":
        sections["kappa"] = fock_oracle.pairing_tensor_of(state).array
    name = args.tag or "oracle"
    reporting.write_result(args.out, name, config, sections)
    print(f"{name}: E0 = {energy:.12g} on {basis.size} states -> "
          f"{Path(args.out) / (name + '.txt')}")
    return 0


def _parse_grid(spec: str):
    try:
        lo, hi, num = spec.split(":")
        grid = np.linspace(float(lo), float(hi), int(num))
    except ValueError as err:
        raise ConfigError(f"grid must be 'lo:hi:npoints', got {spec!r}") from err
    return grid


def _scan_variable(spec: str, dim: int):
    kind, _, index = spec.partition(":")
    if kind == "occ":
        return edf.site_density(int(index), dim)
    if kind == "element":
        k, l = index.split(",")
        return edf.matrix_element(int(k), int(l), dim)
    raise ConfigError(f"unknown scan variable {spec!r} (use occ:K or element:K,L)")


def cmd_hk_scan(args):
    model_cfg = _validate_model_config(parse_inline_spec(args.model), MODEL_PRESET_KEYS)
    ham = hamiltonian_from_config(model_cfg)
    basis = enumerate_basis(ham.num_orbitals, "fixed", args.n_particles)
    variable = _scan_variable(args.var, ham.num_orbitals)
    grid = _parse_grid(args.grid)
    opts = SearchOptions(seed=args.seed, restarts=args.restarts)
    curve = search.hk_scan(ham, basis, variable, grid, opts)
    e0, _ = ground_state(ham, basis)
    q_min, e_min = curve.minimum()
    name = args.tag or "hk-scan"
    config = _resolved_config(args, {"model": model_cfg, "N": args.n_particles,
                                     "var": args.var, "grid": args.grid,
                                     "restarts": args.restarts})
    reporting.write_csv(args.out, name, reporting.CURVE_HEADER, curve.rows())
    sections = {
        "result": {
            "task": "hk-scan",
            "minimum_parameter": q_min,
            "minimum_value": e_min,
            "oracle_energy": e0,
            "infeasible_points": sum(1 for f in curve.flags if f != "ok"),
        }
    }
    reporting.write_result(args.out, name, config, sections)
    if args.plot:
        from .plots import save_curve_figure

        save_curve_figure(curve, Path(args.out) / f"{name}.png",
                          title=f"constrained-search landscape along {args.var}",
                          xlabel=args.var, ylabel="energy")
    infeasible = sum(1 for f in curve.flags if f != "ok")
    print(f"{name}: min {e_min:.12g} at {q_min:.6g}; oracle E0 {e0:.12g}; "
          f"{infeasible} infeasible points -> {Path(args.out) / (name + '.csv')}")
    return 0 if infeasible < len(curve.flags) else 1


def cmd_appendix(args):
    bundle = search.appendix_scan(args.d, grid_step=args.grid_step)
    curve, kinks = bundle["curve"], bundle["kinks"]
    name = args.tag or "appendix"
    config = _resolved_config(args, {"d": args.d, "grid_step": args.grid_step or 1e-3 * args.d})
    reporting.write_csv(args.out, name, reporting.CURVE_HEADER, curve.rows())
    y_min, value_min = bundle["minimum"]
    sections = {
        "result": {
            "task": "appendix",
            "d": args.d,
            "two_step_minimum": value_min,
            "two_step_argmin": y_min,
            "direct_minimum": bundle["direct_minimum"],
            "kink_count": len(kinks.kinks),
            "kink_threshold": kinks.threshold,
        },
        "kinks": {f"kink{i}": k.location for i, k in enumerate(kinks.kinks)},
        "kink_jumps": {f"kink{i}": k.jump for i, k in enumerate(kinks.kinks)},
    }
    reporting.write_result(args.out, name, config, sections)
    if args.plot:
        from .plots import save_curve_figure

        save_curve_figure(curve, Path(args.out) / f"{name}.png", kinks=kinks,
                          title=f"inner-minimized landscape, d={args.d}",
                          xlabel="y", ylabel="min_x phi(x, y)")
    print(f"{name}: min {value_min:.12g} at y={y_min:.6g}; kinks at "
          f"{[round(k, 6) for k in kinks.locations]} -> {Path(args.out) / (name + '.csv')}")
    return 0


def cmd_probe_rep(args):
    dim, n = args.dimension, args.n_particles
    if args.vars == "full":
        variables = edf.full_matrix_variables(dim)
    elif args.vars == "sites":
        variables = [edf.site_density(x, dim) for x in range(dim)]
    else:
        raise ConfigError(f"unknown variable family {args.vars!r} (use full or sites)")
    if args.target_model:
        model_cfg = _validate_model_config(parse_inline_spec(args.target_model),
                                           MODEL_PRESET_KEYS)
        ham = hamiltonian_from_config(model_cfg)
        if ham.num_orbitals != dim:
            raise ConfigError("target model dimension differs from --M")
        _, psi = ground_state(ham, enumerate_basis(dim, "fixed", n))
        rho_target = fock_oracle.one_body_density(psi).array
        target_desc = {"model": model_cfg}
    else:
        rng = np.random.default_rng(args.seed)
        raw = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        q_mat, _ = np.linalg.qr(raw)
        rho_target = q_mat[:, :n] @ q_mat[:, :n].conj().T
        target_desc = {"random_slater_seed": args.seed}
    targets = [complex(variable.evaluator(rho_target)) for variable in variables]
    result = search.ks_representability_probe(variables, targets, dim, n,
                                              restarts=args.restarts, seed=args.seed)
    name = args.tag or "probe-rep"
    config = _resolved_config(args, {"M": dim, "N": n, "vars": args.vars,
                                     "target": target_desc, "restarts": args.restarts})
    sections = {
        "result": {
            "task": "probe-rep",
            "feasible": result.feasible,
            "residual": result.residual,
        },
        "restart_residuals": np.array(result.restart_residuals),
        "density": result.density,
    }
    reporting.write_result(args.out, name, config, sections)
    verdict = "feasible" if result.feasible else "infeasible"
    print(f"{name}: {verdict}, residual {result.residual:.3e} -> "
          f"{Path(args.out) / (name + '.txt')}")
    return 0 if result.feasible or args.expect_infeasible else 1


def cmd_check(args):
    names = args.only.split(",") if args.only else None
    results = run_checks(names)
    width = max(len(name) for name, _, _ in results)
    failures = 0
    for name, ok, detail in results:
        status = "PASS" if ok else "FAIL"
        failures += 0 if ok else 1
        print(f"{status}  {name:<{width}}  {detail}")
    print(f"{len(results) - failures}/{len(results)} checks passed")
    return 0 if failures == 0 else 1


def cmd_sweep(args):
    runs = load_json_config(args.sweep)
    if not isinstance(runs, list):
        raise ConfigError("a sweep file must hold a JSON list of run configs")
    worst = 0
    for index, run in enumerate(runs):
        if not isinstance(run, dict) or "command" not in run:
            raise ConfigError(f"sweep entry {index} needs a 'command' key")
        run = dict(run)
        command = run.pop("command")
        argv = [command]
        for key, value in run.items():
            flag = "--" + key.replace("_", "-")
            if isinstance(value, dict):
                argv.extend([flag, json.dumps(value)])
            elif isinstance(value, bool):
                if value:
                    argv.append(flag)
            else:
                argv.extend([flag, str(value)])
        argv.extend(["--out", str(Path(args.out) / f"run_{index:03d}")])
        code = main(argv)
        worst = max(worst, code)
    return worst


# ---------------------------------------------------------------------------
# argument plumbing


def _add_common(parser):
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--tag", default=None, help="basename for emitted files")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the seed (default: SCMFKIT_SEED or 42)")
    parser.add_argument("--config", default=None,
                        help="JSON run config supplying any section")
    plot = parser.add_mutually_exclusive_group()
    plot.add_argument("--plot", dest="plot", action="store_true", default=True,
                      help="render figures next to the data files (default)")
    plot.add_argument("--no-plot", dest="plot", action="store_false")


def _add_solver_flags(parser):
    parser.add_argument("--N", dest="n_particles", type=int, required=False,
                        help="particle number")
    parser.add_argument("--alpha", type=float, default=None, help="density mixing")
    parser.add_argument("--tol", type=float, default=None, help="density tolerance")
    parser.add_argument("--max-iter", type=int, default=None)
    parser.add_argument("--guess", choices=("core", "random", "provided"), default=None)
    parser.add_argument("--kappa-seed", type=float, default=None)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="scmfkit",
        description="self-consistent mean-field solvers with an exact Fock-space oracle",
    )
    sub = parser.add_subparsers(dest="command")

    for name, needs_model in (("solve-hf", True), ("solve-hfb", True),
                              ("solve-ks", False), ("solve-ksbdg", False)):
        p = sub.add_parser(name, help=f"run the {name.split('-')[1]} solver")
        if needs_model:
            p.add_argument("--model", default=None,
                           help="preset 'name:k=v,...' or JSON definition file")
        else:
            p.add_argument("--functional", default=None,
                           help="preset 'name:k=v,...' or JSON definition file")
        _add_solver_flags(p)
        _add_common(p)

    p = sub.add_parser("oracle", help="exact ground state by dense diagonalization")
    p.add_argument("--model", default=None)
    p.add_argument("--N", dest="n_particles", type=int, default=None)
    p.add_argument("--sector", choices=("fixed", "full"), default="fixed")
    _add_common(p)

    p = sub.add_parser("hk-scan", help="constrained-search landscape along one variable")
    p.add_argument("--model", default=None)
    p.add_argument("--N", dest="n_particles", type=int, required=True)
    p.add_argument("--var", required=True, help="occ:K or element:K,L")
    p.add_argument("--grid", required=True, help="lo:hi:npoints")
    p.add_argument("--restarts", type=int, default=8)
    _add_common(p)

    p = sub.add_parser("appendix", help="two-step-minimization demo curve and kinks")
    p.add_argument("--d", type=float, default=1.0)
    p.add_argument("--grid-step", type=float, default=None)
    _add_common(p)

    p = sub.add_parser("probe-rep", help="representability probe over idempotent densities")
    p.add_argument("--M", dest="dimension", type=int, required=True)
    p.add_argument("--N", dest="n_particles", type=int, required=True)
    p.add_argument("--vars", default="full", help="full or sites")
    p.add_argument("--target-model", default=None,
                   help="use this model's correlated ground state as the target")
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--expect-infeasible", action="store_true",
                   help="exit 0 even when the target is infeasible")
    _add_common(p)

    p = sub.add_parser("check", help="run the built-in invariant suite")
    p.add_argument("--only", default=None, help="comma-separated check names")
    _add_common(p)

    parser.add_argument("--sweep", default=None,
                        help="JSON list of run configs executed in order")
    parser.add_argument("--out", default="results", help="output root for --sweep")
    return parser


def _merge_config_file(args):
    """Fill unset flags from the --config JSON sections."""
    args.solver_section = {}
    raw = {}
    if getattr(args, "config", None):
        raw = load_json_config(args.config)
        _reject_unknown(raw, {"model", "functional", "solver", "task", "output"},
                        str(args.config))
    solver = dict(raw.get("solver", {}))
    flag_map = {"alpha": "mixing", "tol": "density_tol", "max_iter": "max_iter",
                "guess": "initial_guess", "kappa_seed": "kappa_seed"}
    for flag, key in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            solver[key] = value
    args.solver_section = solver
    task = raw.get("task", {})
    aliases = {"N": "n_particles", "M": "dimension"}
    for key, value in task.items():
        attr = aliases.get(key, key.replace("-", "_"))
        if not hasattr(args, attr):
            raise ConfigError(f"unknown task key {key!r} in {args.config}")
        if getattr(args, attr) in (None, False):
            setattr(args, attr, value)
    if "model" in raw and getattr(args, "model", None) is None:
        args.model = raw["model"]
    if "functional" in raw and getattr(args, "functional", None) is None:
        args.functional = raw["functional"]
    output = raw.get("output", {})
    _reject_unknown(output, {"directory", "tag", "plot"}, "the output section")
    if "directory" in output and args.out == "results":
        args.out = output["directory"]
    if "tag" in output and args.tag is None:
        args.tag = output["tag"]
    if "plot" in output:
        args.plot = bool(output["plot"])


COMMANDS = {
    "solve-hf": cmd_solve_hf,
    "solve-hfb": cmd_solve_hfb,
    "solve-ks": cmd_solve_ks,
    "solve-ksbdg": cmd_solve_ksbdg,
    "oracle": cmd_oracle,
    "hk-scan": cmd_hk_scan,
    "appendix": cmd_appendix,
    "probe-rep": cmd_probe_rep,
    "check": cmd_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return 2 if err.code not in (0, None) else 0
    try:
        if args.sweep:
            return cmd_sweep(args)
        if not args.command:
            parser.print_help()
            return 2
        if getattr(args, "seed", None) is None:
            args.seed = env_seed()
        if args.command in ("solve-hf", "solve-hfb", "solve-ks", "solve-ksbdg",
                            "oracle", "hk-scan", "probe-rep"):
            _merge_config_file(args)
            needs_n = args.command not in ("oracle",)
            if needs_n and args.n_particles is None:
                raise ConfigError("--N (particle number) is required")
            if args.command == "oracle" and args.sector == "fixed" and args.n_particles is None:
                raise ConfigError("--N is required for the fixed sector")
            if hasattr(args, "model") and args.model is None:
                raise ConfigError("--model (or a config-file model section) is required")
            if hasattr(args, "functional") and args.functional is None:
                raise ConfigError("--functional (or a config-file section) is required")
        return COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except NotRepresentable as err:
        print(f"infeasible: {err}", file=sys.stderr)
        return 1
    except BracketError as err:
        print(f"chemical-potential search failed: {err}", file=sys.stderr)
        print(f"  sampled (mu, N): {err.trace[:8]}...", file=sys.stderr)
        return 1
    except ScmfkitError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
