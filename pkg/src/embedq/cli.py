"""Command-line experiment runner.

Subcommands ``qtable``, ``density``, ``ldos``, ``survival`` and ``basis``.
Settings come from an optional YAML (or JSON) file given with ``--config``
and are overridden by flags. Every run writes its data files plus
``manifest.json`` into ``--out``; data files are byte-identical for an
identical configuration, the manifest additionally records wall time.

Exit codes: 0 success, 2 configuration error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ._validation import DomainError
from .ensemble import EnsembleRunSpec
from .fock import enumerate_basis, format_basis
from .observables import (
    EmptyWindowError,
    NoQualifyingStatesError,
    WindowSpec,
    density_run,
    quench_run,
    survival_theory,
    theory_bin_density,
    theory_density,
)
from .qfunc import QuadratureError
from .qparam import EnsembleKind, SystemSpec, q_for

__all__ = ["ExperimentConfig", "RunManifest", "ConfigError", "load_config", "main"]

logger = logging.getLogger("embedq")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

TABLE_SETS = {
    "fermion": [(12, 6), (20, 8), (50, 10)],
    "boson": [(5, 10), (10, 20)],
}


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    """All knobs of one CLI run; defaults are the quench settings of the reference study."""

    kind: str = "FEGOE"
    N: int = 12
    m: int = 6
    k: list[int] = field(default_factory=lambda: [1])
    members: int = 1000
    lam: float = 0.5
    delta: float = 0.2
    center: float = 0.0
    delta1: float = 0.01
    bins: int = 50
    range: tuple[float, float] = (-3.0, 3.0)
    t_max: float = 5.0
    t_steps: int = 500
    seed: int = 0
    mean_field: bool | None = None
    theory_points: int = 601
    out: str = "results"
    format: str = "csv"
    workers: int | None = None
    kinds: list[str] | None = None
    sets: list[tuple[int, int]] | None = None

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        aliases = {"lambda": "lam"}
        clean = {}
        for key, value in data.items():
            key = aliases.get(key, key)
            if key not in names:
                raise ConfigError(f"unknown configuration key {key!r}")
            clean[key] = value
        return cls(**clean).normalized()

    def normalized(self) -> "ExperimentConfig":
        c = dataclasses.replace(self)
        try:
            c.kind = EnsembleKind.parse(c.kind).name
            c.k = parse_k(c.k)
            c.range = tuple(float(x) for x in c.range)
            c.kinds = None if c.kinds is None else [EnsembleKind.parse(x).name for x in c.kinds]
            c.sets = None if c.sets is None else [tuple(int(v) for v in s) for s in c.sets]
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if c.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {c.format!r}")
        if c.members < 1:
            raise ConfigError("members must be at least 1")
        if not c.lam >= 0:
            raise ConfigError(f"lambda must be non-negative, got {c.lam}")
        if not (c.delta > 0 and c.delta1 > 0):
            raise ConfigError("window half-widths delta and delta1 must be positive")
        if c.bins < 1 or len(c.range) != 2 or not c.range[1] > c.range[0]:
            raise ConfigError(f"invalid binning: {c.bins} bins over {c.range}")
        if not c.t_max > 0 or c.t_steps < 1:
            raise ConfigError("time grid needs t_max > 0 and t_steps >= 1")
        if c.workers is not None and c.workers < 1:
            raise ConfigError("workers must be at least 1")
        if c.seed < 0:
            raise ConfigError("seed must be non-negative")
        return c

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.t_steps + 1)

    def systems(self) -> list[SystemSpec]:
        try:
            return [SystemSpec(self.N, self.m, k, self.kind) for k in self.k]
        except DomainError as exc:
            raise ConfigError(f"{exc} (N={self.N}, m={self.m}, kind={self.kind})") from None

    def run_spec(self, system: SystemSpec, mean_field_default: bool) -> EnsembleRunSpec:
        mean_field = mean_field_default if self.mean_field is None else bool(self.mean_field)
        return EnsembleRunSpec(system, members=self.members, lam=self.lam, seed=self.seed, mean_field=mean_field)

    def echo(self) -> dict:
        d = dataclasses.asdict(self)
        d["range"] = list(self.range)
        if self.sets is not None:
            d["sets"] = [list(s) for s in self.sets]
        return d


@dataclass
class RunManifest:
    command: str
    config: dict
    runs: list[dict] = field(default_factory=list)
    files: dict[str, str] = field(default_factory=dict)
    wall_time_s: float = 0.0

    def write(self, out: Path) -> Path:
        path = out / "manifest.json"
        path.write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n")
        return path


def parse_k(value) -> list[int]:
    """``3``, ``[1, 2]``, ``"2-6"`` or ``"1,3,5"`` to a sorted list of ranks."""
    if isinstance(value, int):
        return [value]
    if isinstance(value, (list, tuple)):
        return sorted({int(v) for v in value})
    ks: set[int] = set()
    for part in str(value).split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            ks.update(range(int(lo), int(hi) + 1))
        elif part:
            ks.add(int(part))
    if not ks:
        raise ConfigError(f"no body rank in {value!r}")
    return sorted(ks)


def load_config(path) -> dict:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a key-value mapping")
    return data


# output helpers


def _fmt(x) -> str:
    return f"{float(x):.9g}"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_csv(path: Path, header: list[str], columns) -> None:
    rows = zip(*columns)
    body = "".join(",".join(_fmt(v) for v in row) + "\n" for row in rows)
    path.write_text(",".join(header) + "\n" + body)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _floats(a) -> list[float]:
    return [float(_fmt(v)) for v in np.asarray(a).ravel()]


def _q12(q: float) -> float:
    return float(f"{q:.12g}")


def _stem(prefix: str, s: SystemSpec) -> str:
    return f"{prefix}_{s.kind.name}_N{s.N}_m{s.m}_k{s.k}"


class _Output:
    def __init__(self, cfg: ExperimentConfig, manifest: RunManifest):
        self.dir = Path(cfg.out)
        self.format = cfg.format
        self.manifest = manifest
        self.dir.mkdir(parents=True, exist_ok=True)

    def table(self, stem: str, header: list[str], columns, meta: dict) -> None:
        if self.format == "csv":
            path = self.dir / f"{stem}.csv"
            _write_csv(path, header, columns)
        else:
            path = self.dir / f"{stem}.json"
            _write_json(path, {"meta": meta, **{h: _floats(c) for h, c in zip(header, columns)}})
        self.manifest.files[path.name] = _sha256(path)


# subcommands


def cmd_qtable(cfg: ExperimentConfig, manifest: RunManifest) -> int:
    kinds = cfg.kinds or ["FEGOE", "FEGUE", "BEGUE"]
    rows, failures = [], 0
    for name in kinds:
        kind = EnsembleKind.parse(name)
        for N, m in cfg.sets or TABLE_SETS[kind.statistics]:
            for k in range(1, m + 1):
                try:
                    q = q_for(SystemSpec(N, m, k, kind))
                except DomainError as exc:
                    failures += 1
                    logger.error("skipping %s N=%d m=%d k=%d: %s", kind.name, N, m, k, exc)
                    rows.append({"kind": kind.name, "N": N, "m": m, "k": k, "q": None, "error": str(exc)})
                    continue
                rows.append({"kind": kind.name, "N": N, "m": m, "k": k, "q": _q12(q), "q3": f"{q:.3f}"})
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.format == "csv":
        path = out / "qtable.csv"
        lines = ["kind,N,m,k,q"]
        for r in rows:
            q = r["q3"] if r["q"] is not None else "error"
            lines.append(f"{r['kind']},{r['N']},{r['m']},{r['k']},{q}")
        path.write_text("\n".join(lines) + "\n")
    else:
        path = out / "qtable.json"
        _write_json(path, {"rows": rows})
    manifest.files[path.name] = _sha256(path)
    manifest.runs = [{k: v for k, v in r.items() if k != "q3"} for r in rows]
    if failures:
        logger.warning("%d table rows were invalid and skipped", failures)
    return EXIT_OK


def _run_meta(s: SystemSpec, run: EnsembleRunSpec, q: float) -> dict:
    return {
        "kind": s.kind.name, "N": s.N, "m": s.m, "k": s.k,
        "dimension": s.dimension, "k_dimension": s.k_dimension,
        "members": run.members, "seed": run.seed, "lambda": run.lam,
        "mean_field": run.mean_field, "q": _q12(q),
    }


def cmd_density(cfg: ExperimentConfig, manifest: RunManifest) -> int:
    out = _Output(cfg, manifest)
    for s in cfg.systems():
        run = cfg.run_spec(s, mean_field_default=False)
        q = q_for(s)
        res = density_run(run, cfg.bins, cfg.range, cfg.workers)
        h = res.histogram
        meta = _run_meta(s, run, q) | {"area": h.area(), "outside_fraction": h.outside_fraction,
                                       "mu2": res.moment(2), "mu4": res.moment(4)}
        out.table(_stem("density", s), ["bin_center", "density"], [h.centers, h.density], meta)
        grid = np.linspace(*cfg.range, cfg.theory_points)
        out.table(_stem("density", s) + "_theory", ["E", "density"], [grid, theory_density(grid, q).y], meta)
        out.table(_stem("density", s) + "_theory_bins", ["bin_center", "density"],
                  [h.centers, theory_bin_density(h.edges, q)], meta)
        manifest.runs.append(meta)
    return EXIT_OK


def _quench(cfg: ExperimentConfig, s: SystemSpec):
    run = cfg.run_spec(s, mean_field_default=True)
    window = WindowSpec(cfg.center, cfg.delta)
    return run, quench_run(run, window, cfg.delta1, cfg.times(), cfg.bins, cfg.range, cfg.workers)


def cmd_ldos(cfg: ExperimentConfig, manifest: RunManifest) -> int:
    out = _Output(cfg, manifest)
    for s in cfg.systems():
        run, res = _quench(cfg, s)
        q = q_for(s)
        h = res.ldos
        meta = _run_meta(s, run, q) | {"center": cfg.center, "delta": cfg.delta, "area": h.area(),
                                       "window_states": h.events, "outside_fraction": h.outside_fraction}
        out.table(_stem("ldos", s), ["bin_center", "density"], [h.centers, h.density], meta)
        grid = np.linspace(*cfg.range, cfg.theory_points)
        out.table(_stem("ldos", s) + "_theory", ["E", "density"], [grid, theory_density(grid, q).y], meta)
        manifest.runs.append(meta)
    return EXIT_OK


def cmd_survival(cfg: ExperimentConfig, manifest: RunManifest) -> int:
    out = _Output(cfg, manifest)
    t = cfg.times()
    for s in cfg.systems():
        run, res = _quench(cfg, s)
        q = q_for(s)
        F = res.survival
        meta = _run_meta(s, run, q) | {"delta1": cfg.delta1, "states": F.meta["states"],
                                       "states_per_member": F.meta["states_per_member"]}
        out.table(_stem("survival", s), ["t", "F"], [F.x, F.y], meta)
        out.table(_stem("survival", s) + "_theory", ["t", "F"], [t, survival_theory(q, t).y], meta)
        manifest.runs.append(meta)
    return EXIT_OK


def cmd_basis(cfg: ExperimentConfig, manifest: RunManifest) -> int:
    statistics = EnsembleKind.parse(cfg.kind).statistics
    try:
        table = enumerate_basis(cfg.N, cfg.m, statistics)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"basis_{statistics}_N{cfg.N}_m{cfg.m}.txt"
    path.write_text(format_basis(table))
    manifest.files[path.name] = _sha256(path)
    manifest.runs.append({"statistics": statistics, "N": cfg.N, "m": cfg.m, "dimension": len(table)})
    return EXIT_OK


COMMANDS = {
    "qtable": cmd_qtable,
    "density": cmd_density,
    "ldos": cmd_ldos,
    "survival": cmd_survival,
    "basis": cmd_basis,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON file with configuration keys")
    common.add_argument("--seed", type=int)
    common.add_argument("--members", type=int)
    common.add_argument("--out")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--workers", type=int, help="worker processes (default: all cores)")
    common.add_argument("--kind", help="FEGOE, FEGUE, BEGOE or BEGUE")
    common.add_argument("--N", type=int, dest="N")
    common.add_argument("--m", type=int, dest="m")
    common.add_argument("--k", help="body ranks, e.g. 3, 2-6 or 1,3,5")
    common.add_argument("--lambda", type=float, dest="lam")
    common.add_argument("--delta", type=float)
    common.add_argument("--center", type=float)
    common.add_argument("--delta1", type=float)
    common.add_argument("--bins", type=int)
    common.add_argument("--t-max", type=float, dest="t_max")
    common.add_argument("--t-steps", type=int, dest="t_steps")
    mf = common.add_mutually_exclusive_group()
    mf.add_argument("--mean-field", action="store_true", default=None, dest="mean_field")
    mf.add_argument("--no-mean-field", action="store_false", default=None, dest="mean_field")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="embedq", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("qtable", parents=[common], help="q for the reference (N, m) sets, all k")
    sub.add_parser("density", parents=[common], help="ensemble spectral density and theory curve")
    sub.add_parser("ldos", parents=[common], help="LDOS after a quench and theory curve")
    sub.add_parser("survival", parents=[common], help="Monte-Carlo survival probability and theory curve")
    sub.add_parser("basis", parents=[common], help="dump the occupation basis, one state per line")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    data = load_config(args.config) if args.config else {}
    overrides = {
        key: getattr(args, key)
        for key in ("seed", "members", "out", "format", "workers", "kind", "N", "m", "k", "lam",
                    "delta", "center", "delta1", "bins", "t_max", "t_steps", "mean_field")
        if getattr(args, key) is not None
    }
    if "lambda" in data and "lam" in overrides:
        del data["lambda"]
    return ExperimentConfig.from_mapping({**data, **overrides})


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    start = time.perf_counter()
    try:
        cfg = resolve_config(args)
        if cfg.workers is None:
            cfg.workers = os.cpu_count() or 1
        manifest = RunManifest(args.command, cfg.echo())
        if args.command in ("density", "ldos", "survival"):
            cfg.systems()
        code = COMMANDS[args.command](cfg, manifest)
    except ConfigError as exc:
        print(f"embedq: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EmptyWindowError, NoQualifyingStatesError, QuadratureError, ArithmeticError,
            np.linalg.LinAlgError) as exc:
        print(f"embedq: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DomainError as exc:
        print(f"embedq: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    manifest.wall_time_s = round(time.perf_counter() - start, 3)
    manifest.write(Path(cfg.out))
    return code


if __name__ == "__main__":
    sys.exit(main())
