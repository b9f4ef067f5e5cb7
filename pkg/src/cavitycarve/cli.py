"""Command-line front end.

Subcommands:

* ``spectrum`` - reflectivity spectrum CSV over a detuning grid
* ``compile``  - graph JSON -> carving schedule JSON
* ``run``      - execute a schedule (or compile a graph on the fly) and
  emit a run-report JSON
* ``sweep``    - run a sweep-spec JSON to a CSV/JSON table, optionally with
  seeded coupling jitter
* ``validate`` - self-check suite (oracle equivalences and invariants)

All rates in config files are dimensionless multiples of the atomic
linewidth.  Config files are flat ``key = value`` text; unknown keys are
rejected with their line number.

Exit codes: 0 success; 1 validation failure; 2 bad input (config, files,
flags, unsupported strategy); 3 heralding impossible; 4 qubit cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .analysis import (
    SweepSpec,
    atomic_write_text,
    robustness_rows_to_csv,
    robustness_uneven,
    sweep,
    sweep_rows_to_csv,
    sweep_rows_to_json,
)
from .carving import (
    NO_CLICK_MODELS,
    HeraldImpossibleError,
    ProbePolicy,
    UniformReflection,
)
from .cavity import AtomSite, CavityParams, reflectivity_spectrum
from .protocol import (
    STRATEGIES,
    CompileError,
    ProtocolError,
    ProtocolProgram,
    UnsupportedStrategyError,
    compile_graph,
    gray_even_parity_masks,
    run_program,
)
from .qstate import GraphSpec, QubitCapError

__all__ = ["Config", "ConfigError", "parse_config", "parse_sweep_spec", "main"]

SPECTRUM_CSV_HEADER = "# cavitycarve spectrum v1"

EXIT_OK = 0
EXIT_VALIDATE_FAILED = 1
EXIT_BAD_INPUT = 2
EXIT_HERALD_IMPOSSIBLE = 3
EXIT_QUBIT_CAP = 4


class ConfigError(ValueError):
    """Config file rejected; message carries the offending line number."""


@dataclass(frozen=True)
class Config:
    """Flat run configuration.  Rates are in units of the atomic linewidth;
    ``atom_g``/``atom_phase`` hold per-atom overrides of the defaults."""

    gamma: float = 1.0
    kappa_wg: float = 200.0
    kappa_sc: float = 200.0
    g: float = 20.0
    phase_arg: float = 0.0
    delta: float = 0.0
    n_photons: int = 1
    no_click: str = "coherent"
    seed: int = 0
    n_atoms: int = 1
    atom_g: Mapping[int, float] = field(default_factory=dict)
    atom_phase: Mapping[int, float] = field(default_factory=dict)

    def params_for(self, n_atoms: int) -> CavityParams:
        atoms = tuple(
            AtomSite(
                g=self.atom_g.get(i, self.g),
                phase_arg=self.atom_phase.get(i, self.phase_arg),
            )
            for i in range(n_atoms)
        )
        return CavityParams(
            kappa_wg=self.kappa_wg,
            kappa_sc=self.kappa_sc,
            atoms=atoms,
            gamma=self.gamma,
        )

    def policy(self) -> ProbePolicy:
        return ProbePolicy(self.n_photons, self.no_click)


_FLOAT_KEYS = ("gamma", "kappa_wg", "kappa_sc", "g", "phase_arg", "delta")
_INT_KEYS = ("n_photons", "seed", "n_atoms")
_ATOM_KEY = re.compile(r"^(g|phase_arg)_(\d+)$")


def parse_config(text: str, source: str = "<config>") -> Config:
    """Parse flat ``key = value`` config text.

    Blank lines and ``#`` comments are allowed; unknown and duplicate keys
    are rejected with the line number.
    """
    values: dict[str, object] = {}
    atom_g: dict[int, float] = {}
    atom_phase: dict[int, float] = {}
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        try:
            if key in _FLOAT_KEYS:
                values[key] = float(value)
            elif key in _INT_KEYS:
                values[key] = int(value)
            elif key == "no_click":
                if value not in NO_CLICK_MODELS:
                    raise ConfigError(
                        f"{source}:{lineno}: no_click must be one of"
                        f" {NO_CLICK_MODELS}, got {value!r}"
                    )
                values[key] = value
            else:
                match = _ATOM_KEY.match(key)
                if match is None:
                    raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
                index = int(match.group(2))
                if match.group(1) == "g":
                    atom_g[index] = float(value)
                else:
                    atom_phase[index] = float(value)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from exc
    try:
        return Config(atom_g=atom_g, atom_phase=atom_phase, **values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def _load_config(path: Optional[str]) -> Optional[Config]:
    if path is None:
        return None
    with open(path) as fh:
        return parse_config(fh.read(), source=path)


def _load_graph(path: str) -> GraphSpec:
    with open(path) as fh:
        data = json.load(fh)
    return GraphSpec.from_json_dict(data)


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write_text(out, text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_spectrum(args: argparse.Namespace) -> int:
    config = _load_config(args.config) or Config()
    n_atoms = args.n_atoms if args.n_atoms is not None else config.n_atoms
    if n_atoms < 0:
        raise ConfigError("n-atoms must be non-negative")
    if args.points < 2:
        raise ConfigError("need at least two grid points")
    params = config.params_for(n_atoms)
    step = (args.delta_max - args.delta_min) / (args.points - 1)
    deltas = [args.delta_min + i * step for i in range(args.points)]
    lines = [SPECTRUM_CSV_HEADER, "delta,re_r,im_r,R"]
    for point in reflectivity_spectrum(params, deltas):
        lines.append(
            f"{point.delta!r},{point.r.real!r},{point.r.imag!r},{point.R!r}"
        )
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_compile(args: argparse.Namespace) -> int:
    graph = _load_graph(args.graph)
    program = compile_graph(graph, args.strategy)
    _emit(json.dumps(program.to_json_dict(), indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    if (args.schedule is None) == (args.graph is None):
        raise ConfigError("run needs exactly one of --schedule or --graph")
    if args.schedule is not None:
        with open(args.schedule) as fh:
            try:
                program = ProtocolProgram.from_json_dict(json.load(fh))
            except (KeyError, ValueError, TypeError) as exc:
                raise ConfigError(f"{args.schedule}: {exc}") from exc
    else:
        program = compile_graph(_load_graph(args.graph), args.strategy)
    config = _load_config(args.config)
    params = config.params_for(program.num_qubits) if config is not None else None
    delta = config.delta if config is not None else 0.0
    n_photons = args.np if args.np is not None else (
        config.n_photons if config is not None else 1
    )
    no_click = args.no_click if args.no_click is not None else (
        config.no_click if config is not None else "coherent"
    )
    policy = ProbePolicy(n_photons, no_click)
    report = run_program(program, params, policy, delta)
    _emit(json.dumps(report.to_json_dict(), indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    with open(args.spec) as fh:
        try:
            spec = parse_sweep_spec(json.load(fh), source=args.spec)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"{args.spec}: {exc}") from exc
    if args.jitter:
        rows = robustness_uneven(spec, args.jitter, args.seed, args.samples)
        _emit(robustness_rows_to_csv(rows), args.out)
        return EXIT_OK
    rows = sweep(spec)
    _emit(sweep_rows_to_csv(rows), args.out)
    if args.json_out is not None:
        atomic_write_text(args.json_out, sweep_rows_to_json(rows))
    return EXIT_OK


_SWEEP_KEYS = {
    "graphs",
    "strategy",
    "cooperativities",
    "kwg_fractions",
    "n_photons",
    "no_click_model",
    "kappa",
    "gamma",
}


def parse_sweep_spec(data: dict, source: str = "<sweep>") -> SweepSpec:
    """Build a SweepSpec from its JSON form.

    ``graphs`` is either a family descriptor
    (``{"family": "path", "n_min": 2, "n_max": 8}``, ``{"family": "square"}``,
    ``{"family": "grid", "width": 2, "height": 3}``) or an explicit list of
    graph dicts ``{"n": ..., "edges": [...]}``.
    """
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: sweep spec must be a JSON object")
    unknown = set(data) - _SWEEP_KEYS
    if unknown:
        raise ConfigError(f"{source}: unknown sweep keys {sorted(unknown)}")
    if "graphs" not in data:
        raise ConfigError(f"{source}: sweep spec needs a 'graphs' entry")
    graphs_spec = data["graphs"]
    if isinstance(graphs_spec, list):
        graphs = tuple(GraphSpec.from_json_dict(g) for g in graphs_spec)
    elif isinstance(graphs_spec, dict):
        family = graphs_spec.get("family")
        if family == "path":
            n_min = int(graphs_spec["n_min"])
            n_max = int(graphs_spec["n_max"])
            if n_min < 1 or n_max < n_min:
                raise ConfigError(f"{source}: need 1 <= n_min <= n_max")
            graphs = tuple(GraphSpec.path(n) for n in range(n_min, n_max + 1))
        elif family == "square":
            graphs = (GraphSpec.cycle(4),)
        elif family == "grid":
            graphs = (
                GraphSpec.grid(int(graphs_spec["width"]), int(graphs_spec["height"])),
            )
        else:
            raise ConfigError(f"{source}: unknown graph family {family!r}")
    else:
        raise ConfigError(f"{source}: 'graphs' must be a list or a family object")
    kwargs = {}
    if "cooperativities" in data:
        kwargs["cooperativities"] = tuple(
            None if c is None else float(c) for c in data["cooperativities"]
        )
    if "kwg_fractions" in data:
        kwargs["kwg_fractions"] = tuple(float(f) for f in data["kwg_fractions"])
    if "n_photons" in data:
        kwargs["n_photons"] = tuple(int(n) for n in data["n_photons"])
    for key in ("strategy", "no_click_model"):
        if key in data:
            kwargs[key] = str(data[key])
    for key in ("kappa", "gamma"):
        if key in data:
            kwargs[key] = float(data[key])
    try:
        return SweepSpec(graphs=graphs, **kwargs)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def _check_critical_null() -> None:
    params = CavityParams(kappa_wg=200.0, kappa_sc=200.0, atoms=(), gamma=1.0)
    (point,) = reflectivity_spectrum(params, [0.0])
    assert point.R < 1e-12, f"empty-register resonant R = {point.R}"


def _check_dense_solve() -> None:
    from .cavity import reflection_coefficient, reflection_dense_solve

    for n in range(1, 5):
        atoms = tuple(AtomSite(g=15.0 + 3.0 * i) for i in range(n))
        params = CavityParams(kappa_wg=170.0, kappa_sc=230.0, atoms=atoms)
        for delta in (-35.0, 0.0, 12.5):
            a = reflection_coefficient(params, delta)
            b = reflection_dense_solve(params, delta)
            assert abs(a - b) < 1e-10, f"N={n} delta={delta}: {a} vs {b}"


def _check_gray_masks() -> None:
    for width in range(2, 6):
        masks = gray_even_parity_masks(width)
        assert masks[0] == 0
        assert len(set(masks)) == 2 ** (width - 1)
        for m in masks:
            assert bin(m).count("1") % 2 == 0
        for a, b in zip(masks, masks[1:]):
            assert bin(a ^ b).count("1") == 2


def _check_bell() -> None:
    program = compile_graph(GraphSpec.path(2))
    report = run_program(program)
    assert abs(report.probability - 0.5) < 1e-12, report.probability
    assert report.fidelity >= 1.0 - 1e-10, report.fidelity


def _check_path4() -> None:
    for strategy, ideal in (("two-atom", 0.125), ("multi-atom", 0.25)):
        report = run_program(compile_graph(GraphSpec.path(4), strategy))
        assert abs(report.probability - ideal) < 1e-12, (strategy, report.probability)
        assert report.fidelity >= 1.0 - 1e-10, (strategy, report.fidelity)


def _check_square() -> None:
    report = run_program(compile_graph(GraphSpec.cycle(4)))
    assert abs(report.probability - 0.125) < 1e-12, report.probability
    assert report.fidelity >= 1.0 - 1e-10, report.fidelity


def _check_coset_uniformity() -> None:
    import numpy as np

    from .analysis import build_params

    rng = np.random.default_rng(20230817)
    scales = tuple(float(s) for s in 1.0 + 0.2 * rng.uniform(-1.0, 1.0, 4))
    params = build_params(4, 20.0, 0.5, g_scale=scales)
    report = run_program(compile_graph(GraphSpec.path(4)), params)
    assert report.fidelity >= 1.0 - 1e-9, report.fidelity
    for stats in report.factor_uniformity:
        assert stats.ratio_dev <= 1e-12, stats


def _check_capture_factor() -> None:
    model = UniformReflection(r_coupled=-math.sqrt(0.8), r_empty=0.0)
    program = compile_graph(GraphSpec.path(2))
    ideal = run_program(program)
    report = run_program(program, model, ProbePolicy(2, "coherent"))
    for p, p_ideal in zip(report.per_carve_p_click, ideal.per_carve_p_click):
        assert abs(p / p_ideal - 0.96) < 1e-12, (p, p_ideal)


def _check_roundtrip() -> None:
    program = compile_graph(GraphSpec.cycle(4))
    clone = ProtocolProgram.from_json_dict(
        json.loads(json.dumps(program.to_json_dict()))
    )
    a = run_program(program)
    b = run_program(clone)
    assert a.probability == b.probability and a.fidelity == b.fidelity


_VALIDATIONS = (
    ("critical-coupling null reflection", _check_critical_null),
    ("closed form matches dense solver", _check_dense_solve),
    ("gray mask schedule properties", _check_gray_masks),
    ("bell pair: p = 1/2, fidelity 1", _check_bell),
    ("4-vertex path, both strategies", _check_path4),
    ("square graph state", _check_square),
    ("coset uniformity with uneven couplings", _check_coset_uniformity),
    ("sequential capture factor 0.96", _check_capture_factor),
    ("schedule JSON round trip", _check_roundtrip),
)


def cmd_validate(args: argparse.Namespace) -> int:
    failures = 0
    for name, check in _VALIDATIONS:
        try:
            check()
        except AssertionError as exc:
            failures += 1
            print(f"FAIL - {name}: {exc}")
        else:
            print(f"ok   - {name}")
    print(f"{len(_VALIDATIONS) - failures}/{len(_VALIDATIONS)} checks passed")
    return EXIT_OK if failures == 0 else EXIT_VALIDATE_FAILED


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cavitycarve",
        description="Simulate heralded graph-state carving in an atom-cavity system.",
        epilog="Exit codes: 0 ok, 1 validation failure, 2 bad input,"
        " 3 heralding impossible, 4 qubit cap exceeded.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_spec = sub.add_parser("spectrum", help="reflectivity spectrum CSV")
    p_spec.add_argument("--config", help="flat key=value config file")
    p_spec.add_argument("--n-atoms", type=int, default=None, dest="n_atoms")
    p_spec.add_argument("--delta-min", type=float, default=-300.0)
    p_spec.add_argument("--delta-max", type=float, default=300.0)
    p_spec.add_argument("--points", type=int, default=601)
    p_spec.add_argument("--out", help="output CSV path (stdout if omitted)")
    p_spec.set_defaults(func=cmd_spectrum)

    p_compile = sub.add_parser("compile", help="graph JSON -> schedule JSON")
    p_compile.add_argument("--graph", required=True, help="graph JSON file")
    p_compile.add_argument("--strategy", choices=STRATEGIES, default="two-atom")
    p_compile.add_argument("--out", help="output JSON path (stdout if omitted)")
    p_compile.set_defaults(func=cmd_compile)

    p_run = sub.add_parser("run", help="execute a schedule or graph")
    p_run.add_argument("--schedule", help="schedule JSON from 'compile'")
    p_run.add_argument("--graph", help="graph JSON file (compiled on the fly)")
    p_run.add_argument("--strategy", choices=STRATEGIES, default="two-atom")
    p_run.add_argument("--config", help="cavity config (ideal limit if omitted)")
    p_run.add_argument("--np", type=int, default=None, help="probe photons per carving")
    p_run.add_argument("--no-click", choices=NO_CLICK_MODELS, default=None)
    p_run.add_argument("--out", help="output JSON path (stdout if omitted)")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a sweep-spec JSON")
    p_sweep.add_argument("--spec", required=True, help="sweep spec JSON file")
    p_sweep.add_argument("--out", help="output CSV path (stdout if omitted)")
    p_sweep.add_argument("--json-out", help="also write nested JSON report")
    p_sweep.add_argument(
        "--jitter",
        type=float,
        default=0.0,
        help="uneven-coupling robustness mode: fractional coupling jitter",
    )
    p_sweep.add_argument("--seed", type=int, default=0, help="jitter RNG seed")
    p_sweep.add_argument("--samples", type=int, default=8, help="jitter samples per row")
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="run the built-in check suite")
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except QubitCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_QUBIT_CAP
    except HeraldImpossibleError as exc:
        print(f"error: heralding impossible: {exc}", file=sys.stderr)
        return EXIT_HERALD_IMPOSSIBLE
    except (
        ConfigError,
        FileNotFoundError,
        json.JSONDecodeError,
        UnsupportedStrategyError,
        CompileError,
        ProtocolError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
