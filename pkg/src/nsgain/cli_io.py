"""
Command-line entry points, run configuration and artifact I/O.

Usage::

    nsgain simulate --config run.yaml
    nsgain verify --suite gronwall --config run.yaml [--allow-hash-mismatch]
    nsgain sweep --config sweep.yaml
    nsgain report --merge DIR

Artifacts go under ``$NSGAIN_OUTPUT_ROOT/<output.dir>`` (default root
``./nsgain_runs``). Every CSV starts with ``# schema_version`` and
``# config_hash`` comment lines; JSON files carry the same two keys.

Exit codes: 0 all checks pass, 1 a check failed, 2 configuration or input
error, 3 solver fault (partial artifacts written), 4 config hash mismatch.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import (
    BlowUpError,
    ConfigError,
    CorruptArtifactError,
    IntegratorFaultError,
    MissingInputError,
    NSGainError,
)
from .evolution import SCHEME_ORDER, StepperConfig, Trajectory, complex_ray_solve, heat_gain_check, heat_trajectory, nse_solve
from .paraproduct import lemma_constant_sweep
from .regularity_harness import (
    INITIAL_KINDS,
    LADDER_OFFSETS,
    PROFILES,
    ForceSpec,
    InitialSpec,
    fit_constant,
    fit_h1_constant,
    fit_shell_constant,
    force_metadata,
    gronwall_chain_check,
    h1_persistence_check,
    riccati_check,
    riccati_required_C,
    shell_duhamel_family,
    synthesize_force,
    synthesize_initial,
    good_time_bound,
    good_time_select,
)
from .report import VerificationReport, _jsonable
from .spectral_core import GridSpec, SpectralField, norm_from_coeffs, read_spectral_csv, write_spectral_csv

SCHEMA_VERSION = 1
OUTPUT_ROOT_ENV = "NSGAIN_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "nsgain_runs"

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2
EXIT_SOLVER = 3
EXIT_HASH = 4

SUITES = ("energy", "lemma", "gronwall", "shell-duhamel", "h1-persistence", "riccati", "heat-gain")
# sections whose content defines the simulated run; verify/sweep/output settings do not
RUN_SECTIONS = ("grid", "equation", "stepper", "force", "initial", "seed")
DIAG_KEYS = ("l2", "h1", "h_alpha1", "h_alpha2", "dissipation", "energy_rhs", "energy_margin")
TRAJECTORY_COLUMNS = ("t",) + DIAG_KEYS
SIMULATE_OUTPUTS = ("metadata.json", "trajectory.csv", "shells.csv", "force.csv", "initial.csv")

_REQUIRED = object()


class HashMismatchError(NSGainError):
    """Stored artifacts were produced by a different configuration."""


# ---------------------------------------------------------------------------
# configuration

# (type, default); ``None`` type means any YAML value, a tuple type lists alternatives
_SCHEMA = {
    "grid": {"N": (int, _REQUIRED), "nu": (float, _REQUIRED), "dealias": (float, 2.0 / 3.0)},
    "equation": (str, "nse"),
    "stepper": {
        "scheme": (str, "IF-RK4"),
        "dt": (float, 0.005),
        "T": (float, 1.0),
        "record_every": (int, 50),
        "cfl": (float, 0.5),
        "energy_tol": (float, 10.0),
    },
    "force": {
        "alpha": (float, -1.0),
        "profile": (str, "critical_log"),
        "delta": (float, 0.25),
        "seed": (int, "seed"),
        "amplitude": (float, 1.0),
        "stream": (int, 101),
    },
    "initial": {
        "kind": (str, "random"),
        "slope": (float, 3.0),
        "amplitude": (float, 1.0),
        "seed": (int, "seed"),
        "kmax": ((float, type(None)), None),
        "mode": (list, [1, 0]),
        "stream": (int, 202),
    },
    "seed": (int, 0),
    "output": {"dir": ((str, type(None)), None), "spectral_dumps": (bool, False)},
    "verify": {
        "energy": {},
        "lemma": {
            "betas": (list, [0.25, 0.5, 0.75, 1.0]),
            "ensemble_size": (int, 20),
            "resolutions": (list, [32, 64]),
            "growth_tol": (float, 0.5),
        },
        "gronwall": {"eps": (float, 0.1), "t_select": (float, 0.1), "C": ((float, type(None)), None)},
        "shell-duhamel": {"p": (float, 0.25), "qs": ((list, type(None)), None), "C": ((float, type(None)), None)},
        "h1-persistence": {"C": ((float, type(None)), None)},
        "riccati": {
            "thetas": (list, [-math.pi / 4, -math.pi / 6, math.pi / 6, math.pi / 4]),
            "galerkin_modes": (int, 256),
            "s_max": (float, 1.0),
            "dt": (float, 1e-3),
            "alpha": ((float, type(None)), None),
            "C": ((float, type(None)), None),
            "fd_tol": (float, 1e-3),
        },
        "heat-gain": {"n_times": (int, 11), "alpha": ((float, type(None)), None)},
    },
    "sweep": {
        "N": ((list, type(None)), None),
        "seeds": ((list, type(None)), None),
        "alpha": ((list, type(None)), None),
        "workers": (int, 1),
        "stable_tol": (float, 0.10),
        "growth_min": (float, 0.25),
    },
}


def _line_map(node, prefix=(), out=None) -> dict:
    """Map key paths to 1-based source lines from a composed YAML node."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = prefix + (str(k.value),)
            out[path] = k.start_mark.line + 1
            _line_map(v, path, out)
    return out


def _coerce(value, typ, dotted, line):
    alts = typ if isinstance(typ, tuple) else (typ,)
    if value is None and type(None) in alts:
        return None
    if float in alts and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if int in alts and isinstance(value, int) and not isinstance(value, bool):
        return int(value)
    if int in alts and isinstance(value, float) and value.is_integer():
        return int(value)
    if float in alts and str not in alts and isinstance(value, str):
        # YAML 1.1 reads exponent forms without a dot, such as 2e-6, as strings
        try:
            return float(value)
        except ValueError:
            pass
    for a in alts:
        if a not in (int, float, type(None)) and isinstance(value, a):
            return value
    names = " or ".join("null" if a is type(None) else a.__name__ for a in alts)
    raise ConfigError(f"expected {names}, got {value!r}", field=dotted, line=line)


def _materialize(schema: dict, data, lines: dict, path=()) -> dict:
    dotted_sec = ".".join(path)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("expected a mapping", field=dotted_sec or None, line=lines.get(path))
    unknown = sorted(set(map(str, data)) - set(schema))
    if unknown:
        key = unknown[0]
        raise ConfigError(f"unknown key (allowed: {', '.join(sorted(schema))})", field=".".join(path + (key,)), line=lines.get(path + (key,)))
    out = {}
    for key, spec in schema.items():
        p = path + (key,)
        dotted = ".".join(p)
        if isinstance(spec, dict):
            out[key] = _materialize(spec, data.get(key), lines, p)
            continue
        typ, default = spec
        if key not in data:
            if default is _REQUIRED:
                raise ConfigError("required field is missing", field=dotted, line=lines.get(path))
            out[key] = copy.deepcopy(default)
            continue
        out[key] = _coerce(data[key], typ, dotted, lines.get(p))
    return out


def canonical_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))


def config_hash(data: dict, sections=RUN_SECTIONS) -> str:
    """SHA-1 of the canonical JSON of the given config sections."""
    return hashlib.sha1(canonical_json({k: data[k] for k in sections}).encode()).hexdigest()


@dataclass
class RunConfig:
    """Parsed configuration with every default filled in."""

    data: dict
    lines: dict = field(default_factory=dict, repr=False)
    source: str | None = None

    @property
    def hash(self) -> str:
        return config_hash(self.data)

    @property
    def sweep_hash(self) -> str:
        return config_hash(self.data, RUN_SECTIONS + ("sweep",))

    @property
    def seed(self) -> int:
        return self.data["seed"]

    def line(self, dotted: str):
        return self.lines.get(tuple(dotted.split(".")))

    def run_dir(self, root=None) -> Path:
        return output_root(root) / self.data["output"]["dir"]

    def to_yaml(self) -> str:
        return yaml.safe_dump(_jsonable(self.data), sort_keys=True, default_flow_style=False)

    def grid(self, N: int | None = None) -> GridSpec:
        g = self.data["grid"]
        return GridSpec(int(N or g["N"]), g["nu"], g["dealias"])

    def stepper(self, record_every: int | None = None) -> StepperConfig:
        s = self.data["stepper"]
        return StepperConfig(
            dt=s["dt"],
            scheme=s["scheme"],
            T_final=s["T"],
            record_every=record_every or s["record_every"],
            cfl=s["cfl"],
            energy_tol=s["energy_tol"],
        )

    def force_spec(self, N: int | None = None, alpha: float | None = None, seed: int | None = None) -> ForceSpec:
        f = dict(self.data["force"])
        f["N"] = int(N or self.data["grid"]["N"])
        if alpha is not None:
            f["alpha"] = float(alpha)
        if seed is not None:
            f["seed"] = int(seed)
        return ForceSpec(**f)

    def initial_spec(self, seed: int | None = None) -> InitialSpec:
        i = dict(self.data["initial"])
        i["mode"] = tuple(i["mode"])
        if seed is not None:
            i["seed"] = int(seed)
        return InitialSpec(**i)

    @property
    def alpha(self) -> float:
        return self.data["force"]["alpha"]


def _validate(cfg: RunConfig):
    d = cfg.data

    def bad(msg, dotted):
        raise ConfigError(msg, field=dotted, line=cfg.line(dotted))

    if d["equation"] not in ("nse", "heat"):
        bad("must be 'nse' or 'heat'", "equation")
    if d["stepper"]["scheme"] not in SCHEME_ORDER:
        bad(f"must be one of {sorted(SCHEME_ORDER)}", "stepper.scheme")
    if d["force"]["profile"] not in PROFILES:
        bad(f"must be one of {list(PROFILES)}", "force.profile")
    if d["initial"]["kind"] not in INITIAL_KINDS:
        bad(f"must be one of {list(INITIAL_KINDS)}", "initial.kind")
    for sec, builder in (("grid", cfg.grid), ("stepper", cfg.stepper), ("force", cfg.force_spec), ("initial", cfg.initial_spec)):
        try:
            builder()
        except (ValueError, TypeError) as err:
            raise ConfigError(str(err), field=sec, line=cfg.line(sec)) from None
    for key in ("N", "seeds", "alpha"):
        v = d["sweep"][key]
        if v is not None and len(v) == 0:
            bad("sweep list is empty", f"sweep.{key}")


def parse_config(text: str, source: str | None = None) -> RunConfig:
    """Parse YAML text into a RunConfig; errors name the field and line."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(err, 'problem', err)}", line=mark.line + 1 if mark else None) from None
    lines = _line_map(node) if node is not None else {}
    data = _materialize(_SCHEMA, raw, lines)
    for sec in ("force", "initial"):
        if data[sec]["seed"] == "seed":
            data[sec]["seed"] = data["seed"]
    rv = data["verify"]
    for suite in ("riccati", "heat-gain"):
        if rv[suite]["alpha"] is None:
            rv[suite]["alpha"] = data["force"]["alpha"]
    cfg = RunConfig(data, lines, source)
    _validate(cfg)
    if data["output"]["dir"] is None:
        data["output"]["dir"] = f"run-{cfg.hash[:12]}"
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists() or path.is_dir():
        raise ConfigError(f"config file {path} does not exist")
    return parse_config(path.read_text(), str(path))


def output_root(root=None) -> Path:
    return Path(root or os.environ.get(OUTPUT_ROOT_ENV) or DEFAULT_OUTPUT_ROOT)


# ---------------------------------------------------------------------------
# artifact writing and reading


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_table(path, header, rows, chash: str) -> Path:
    """CSV with schema/hash comment lines and repr-formatted floats."""
    path = Path(path)
    buf = io.StringIO()
    buf.write(f"# schema_version: {SCHEMA_VERSION}\n# config_hash: {chash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    _atomic_write(path, buf.getvalue())
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    _atomic_write(path, json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n")
    return path


def read_table(path, expected_header=None, chash: str | None = None):
    """Parse a CSV written by ``write_table``; returns ``(comments, header, float array)``."""
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"{path} does not exist")
    comments, body = {}, []
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            if ":" in line:
                k, v = line[1:].split(":", 1)
                comments[k.strip()] = v.strip()
        elif line.strip():
            body.append(line)
    if comments.get("schema_version") != str(SCHEMA_VERSION):
        raise CorruptArtifactError(path, f"missing or unsupported schema_version {comments.get('schema_version')!r}")
    if "config_hash" not in comments:
        raise CorruptArtifactError(path, "missing config_hash comment")
    if chash is not None and comments["config_hash"] != chash:
        raise HashMismatchError(f"{path} has config_hash {comments['config_hash']}, expected {chash}")
    if not body:
        raise CorruptArtifactError(path, "no header row")
    rows = list(csv.reader(body))
    header = rows[0]
    if expected_header is not None and list(header) != list(expected_header):
        raise CorruptArtifactError(path, f"header {header} does not match {list(expected_header)}")
    data = []
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise CorruptArtifactError(path, f"data row {i - 1} has {len(r)} fields, expected {len(header)}")
        try:
            data.append([float(x) for x in r])
        except ValueError:
            raise CorruptArtifactError(path, f"data row {i - 1} has a non-numeric field") from None
    arr = np.array(data, dtype=float).reshape(len(data), len(header))
    return comments, header, arr


def _dump_field(u: SpectralField, path: Path, chash: str):
    write_spectral_csv(u, path, comments=(f"schema_version: {SCHEMA_VERSION}", f"config_hash: {chash}"))


def _read_field(path: Path, chash: str) -> SpectralField:
    if not path.is_file():
        raise MissingInputError(f"{path} does not exist")
    text = path.read_text().splitlines()
    tags = dict(l[1:].split(":", 1) for l in text[1:4] if l.startswith("#") and ":" in l)
    tags = {k.strip(): v.strip() for k, v in tags.items()}
    if tags.get("config_hash") != chash:
        raise HashMismatchError(f"{path} has config_hash {tags.get('config_hash')}, expected {chash}")
    try:
        return read_spectral_csv(path)
    except (ValueError, KeyError, IndexError, StopIteration) as err:
        raise CorruptArtifactError(path, f"unreadable spectral dump ({err})") from None


# ---------------------------------------------------------------------------
# simulate


def _build_inputs(cfg: RunConfig, N=None, alpha=None, seed=None):
    spec = cfg.force_spec(N, alpha, seed)
    f = synthesize_force(spec, cfg.data["grid"]["nu"], cfg.data["grid"]["dealias"])
    u0 = synthesize_initial(cfg.initial_spec(seed), f.grid)
    return spec, f, u0


def run_trajectory(cfg: RunConfig, f: SpectralField, u0: SpectralField, alpha: float, record_every=None):
    """Solve per the config; returns ``(trajectory, error or None)``."""
    st = cfg.stepper(record_every)
    try:
        if cfg.data["equation"] == "heat":
            return heat_trajectory(u0, f, st.step_times(), alpha, st.record_every), None
        return nse_solve(u0, f, st, alpha=alpha), None
    except (BlowUpError, IntegratorFaultError) as err:
        partial = getattr(err, "partial", None)
        if partial is None:
            raise
        return partial, err


def cmd_simulate(cfg: RunConfig, root=None) -> int:
    h = cfg.hash
    out = cfg.run_dir(root)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "config.yaml", cfg.to_yaml())
    spec, f, u0 = _build_inputs(cfg)
    _dump_field(f, out / "force.csv", h)
    _dump_field(u0, out / "initial.csv", h)
    traj, err = run_trajectory(cfg, f, u0, cfg.alpha)
    d = traj.diagnostics
    write_table(out / "trajectory.csv", TRAJECTORY_COLUMNS, ([t] + [d[k][i] for k in DIAG_KEYS] for i, t in enumerate(traj.times)), h)
    write_table(out / "shells.csv", ["t"] + [f"q{q}" for q in traj.shell_qs], ([t, *traj.shell_norms[i]] for i, t in enumerate(traj.times)), h)
    artifacts = list(SIMULATE_OUTPUTS) + ["config.yaml"]
    if cfg.data["output"]["spectral_dumps"]:
        (out / "snapshots").mkdir(exist_ok=True)
        for j, (t, u) in enumerate(zip(traj.snapshot_times, traj.snapshots)):
            name = f"snapshots/u_{j:05d}.csv"
            _dump_field(u, out / name, h)
            artifacts.append(name)
    meta = {
        "schema_version": SCHEMA_VERSION,
        "config_hash": h,
        "status": "complete" if err is None else "partial",
        "error": None if err is None else f"{type(err).__name__}: {err}",
        "equation": cfg.data["equation"],
        "alpha": cfg.alpha,
        "grid": cfg.data["grid"],
        "seed": cfg.seed,
        "n_times": int(traj.times.size),
        "t_end": float(traj.times[-1]),
        "solver": traj.meta,
        "force": force_metadata(spec, f, [cfg.alpha + o for o in LADDER_OFFSETS]),
        "artifacts": sorted(artifacts),
    }
    write_json(out / "metadata.json", meta)
    if err is not None:
        print(f"solver fault: {err}; partial artifacts in {out}", file=sys.stderr)
        return EXIT_SOLVER
    print(f"simulate: {traj.times.size} times written to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


@dataclass
class RunArtifacts:
    meta: dict
    trajectory: Trajectory
    force: SpectralField
    initial: SpectralField


def _missing_message(out: Path, missing) -> str:
    return (
        f"run directory {out} lacks {', '.join(missing)}; "
        f"`nsgain simulate --config FILE` must produce {', '.join(SIMULATE_OUTPUTS)} first"
    )


def load_run(cfg: RunConfig, root=None, allow_hash_mismatch: bool = False) -> RunArtifacts:
    """Rebuild the simulated trajectory from the artifacts in the run directory."""
    out = cfg.run_dir(root)
    missing = [n for n in SIMULATE_OUTPUTS if not (out / n).is_file()]
    if missing:
        raise MissingInputError(_missing_message(out, missing))
    try:
        meta = json.loads((out / "metadata.json").read_text())
    except json.JSONDecodeError as err:
        raise CorruptArtifactError(out / "metadata.json", f"invalid JSON ({err.msg})") from None
    stored = meta.get("config_hash")
    if stored != cfg.hash and not allow_hash_mismatch:
        raise HashMismatchError(f"artifacts in {out} carry config_hash {stored}, the config hashes to {cfg.hash}")
    h = stored
    _, _, tr = read_table(out / "trajectory.csv", TRAJECTORY_COLUMNS, h)
    _, sh_head, sh = read_table(out / "shells.csv", None, h)
    if tr.shape[0] == 0:
        raise CorruptArtifactError(out / "trajectory.csv", "no data rows")
    if sh.shape[0] != tr.shape[0] or not np.array_equal(sh[:, 0], tr[:, 0]):
        raise CorruptArtifactError(out / "shells.csv", "times do not match trajectory.csv")
    if np.any(np.diff(tr[:, 0]) <= 0) or not np.all(np.isfinite(tr)):
        raise CorruptArtifactError(out / "trajectory.csv", "times not increasing or non-finite values")
    try:
        qs = [int(c[1:]) for c in sh_head[1:]]
    except ValueError:
        raise CorruptArtifactError(out / "shells.csv", "shell columns must be named q<index>") from None
    f = _read_field(out / "force.csv", h)
    u0 = _read_field(out / "initial.csv", h)
    alpha = float(meta.get("alpha", cfg.alpha))
    fn = {
        "h_minus1": norm_from_coeffs(f.grid, f.coeffs, -1.0),
        "h_alpha": norm_from_coeffs(f.grid, f.coeffs, alpha),
        "l2": norm_from_coeffs(f.grid, f.coeffs, 0.0),
    }
    traj = Trajectory(
        grid=f.grid,
        alpha=alpha,
        times=tr[:, 0],
        diagnostics={k: tr[:, i + 1] for i, k in enumerate(DIAG_KEYS)},
        shell_qs=qs,
        shell_norms=sh[:, 1:],
        snapshot_times=np.array([0.0]),
        snapshots=[u0],
        force_norms=fn,
        meta=dict(meta.get("solver", {})),
    )
    return RunArtifacts(meta, traj, f, u0)


def _energy_scale(u0: SpectralField, f: SpectralField) -> float:
    g = u0.grid
    return (
        g.nu * norm_from_coeffs(g, u0.coeffs, 1.0) ** 2
        + norm_from_coeffs(g, f.coeffs, -1.0) ** 2 / g.nu
        + norm_from_coeffs(g, u0.coeffs, 0.0) ** 2
    )


def suite_energy(cfg, run: RunArtifacts, prov) -> list:
    """Energy inequality with the discrete tolerance ``energy_tol dt t S``."""
    tr = run.trajectory
    d = tr.diagnostics
    t = tr.times
    S = _energy_scale(run.initial, run.force)
    dt, tol_C = cfg.data["stepper"]["dt"], cfg.data["stepper"]["energy_tol"]
    lhs = d["l2"] ** 2 + d["dissipation"]
    margin = d["energy_rhs"] - lhs
    with np.errstate(divide="ignore", invalid="ignore"):
        measured = np.where((margin < 0) & (t > 0) & (S > 0), -margin / (dt * t * S), 0.0)
    rep = VerificationReport(
        "energy",
        t,
        lhs,
        d["energy_rhs"] + tol_C * dt * t * S,
        constants={"C_measured": float(measured.max()), "C_allowed": float(tol_C), "dt": float(dt), "scale": float(S)},
        provenance=prov,
        extra={"raw_margin": margin},
    )
    return [rep]


def suite_lemma(cfg, run, prov) -> list:
    """Ensemble ratio of the nonlinear-term estimate must not grow with resolution."""
    p = cfg.data["verify"]["lemma"]
    sweep = lemma_constant_sweep(p["betas"], p["ensemble_size"], p["resolutions"], seed=cfg.seed)
    reports = []
    for beta, ens in sweep.items():
        Ns = ens.resolutions
        mx = np.array([ens.per_resolution[N]["max_ratio"] for N in Ns])
        reports.append(
            VerificationReport(
                f"lemma_ratio_growth[beta={beta!r}]",
                np.array(Ns, dtype=float),
                mx,
                np.full(len(Ns), (1.0 + p["growth_tol"]) * mx[0]),
                constants={"beta": beta, "C_estimate": ens.max_ratio, "growth": ens.growth},
                provenance=prov,
                extra=ens.to_dict(),
            )
        )
    return reports


def suite_gronwall(cfg, run, prov) -> list:
    p = cfg.data["verify"]["gronwall"]
    tr = run.trajectory
    t0 = good_time_select(tr, p["t_select"], p["eps"], run.force)
    i0 = tr.index_of(t0)
    bound = good_time_bound(tr, p["eps"], run.force)
    good = VerificationReport("good_time", [t0], [tr.diagnostics["h1"][i0] ** 2], [bound], {"eps": p["eps"]}, prov)
    chain = gronwall_chain_check(tr, run.force, tr.alpha, t0, C=p["C"], provenance=prov)
    return [good, chain]


def suite_shell(cfg, run, prov) -> list:
    p = cfg.data["verify"]["shell-duhamel"]
    tr = run.trajectory
    qs = p["qs"] if p["qs"] is not None else tr.shell_qs
    fam = shell_duhamel_family(tr, run.force, qs, p["p"], C=p["C"])
    if fam["missing"]:
        raise MissingInputError(f"shells {fam['missing']} are not in shells.csv (recorded {tr.shell_qs})")
    return [fam["reports"][q] for q in sorted(fam["reports"])]


def suite_h1(cfg, run, prov) -> list:
    p = cfg.data["verify"]["h1-persistence"]
    return [h1_persistence_check(run.trajectory, run.force, C=p["C"], provenance=prov)]


def suite_riccati(cfg, run, prov) -> list:
    p = cfg.data["verify"]["riccati"]
    nu = cfg.data["grid"]["nu"]
    rays = [
        complex_ray_solve(run.initial, run.force, float(th), p["s_max"], galerkin_modes=p["galerkin_modes"], dt=p["dt"], alpha=p["alpha"])
        for th in p["thetas"]
    ]
    C = p["C"]
    if C is None:
        C = fit_constant(np.concatenate([riccati_required_C(r, p["alpha"], r.theta, nu, p["fd_tol"])[0] for r in rays]))
    return [riccati_check(r, p["alpha"], r.theta, nu, C=C, fd_tol=p["fd_tol"], provenance=prov) for r in rays]


def suite_heat(cfg, run, prov) -> list:
    p = cfg.data["verify"]["heat-gain"]
    T = cfg.data["stepper"]["T"]
    rep = heat_gain_check(run.initial, run.force, cfg.data["grid"]["nu"], p["alpha"], np.linspace(0.0, T, p["n_times"]))
    rep.provenance = prov
    return [rep]


SUITE_FUNCS = {
    "energy": suite_energy,
    "lemma": suite_lemma,
    "gronwall": suite_gronwall,
    "shell-duhamel": suite_shell,
    "h1-persistence": suite_h1,
    "riccati": suite_riccati,
    "heat-gain": suite_heat,
}
# suites that only need the synthesized inputs, not the trajectory
_NEEDS_TRAJECTORY = {"energy", "gronwall", "shell-duhamel", "h1-persistence"}


def _report_rows(reports):
    for r in reports:
        C = r.constants.get("C", r.constants.get("C_measured", r.constants.get("C_estimate")))
        yield [r.inequality, r.passed, r.min_margin, C, r.times.size]


REPORT_COLUMNS = ("inequality", "passed", "min_margin", "constant", "n_times")


def cmd_verify(cfg: RunConfig, suite: str, root=None, allow_hash_mismatch: bool = False) -> int:
    if suite not in SUITE_FUNCS:
        raise ConfigError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}", field="suite")
    out = cfg.run_dir(root)
    if suite == "lemma":
        run = None
        h = cfg.hash
    else:
        run = load_run(cfg, root, allow_hash_mismatch)
        h = run.meta["config_hash"]
        if suite in _NEEDS_TRAJECTORY and run.meta.get("status") != "complete":
            print(f"warning: trajectory is partial ({run.meta.get('error')})", file=sys.stderr)
    out.mkdir(parents=True, exist_ok=True)
    prov = {"config_hash": h, "seed": cfg.seed, "suite": suite}
    reports = SUITE_FUNCS[suite](cfg, run, prov)
    passed = all(r.passed for r in reports)
    write_json(
        out / f"verify_{suite}.json",
        {
            "schema_version": SCHEMA_VERSION,
            "config_hash": h,
            "suite": suite,
            "passed": passed,
            "reports": [r.to_dict() for r in reports],
        },
    )
    write_table(out / f"verify_{suite}.csv", REPORT_COLUMNS, _report_rows(reports), h)
    for r in reports:
        print(r.summary())
    return EXIT_OK if passed else EXIT_FAILED


# ---------------------------------------------------------------------------
# sweep


def _offset_label(o: float) -> str:
    return f"force_h_alpha_plus_{o:g}"


def sweep_cell(data: dict, N: int, alpha: float, seed: int) -> dict:
    """One (N, alpha, seed) cell: solve, record sup norms, fitted constants and margins."""
    cfg = RunConfig(data)
    row = {"N": int(N), "alpha": float(alpha), "seed": int(seed), "error": ""}
    try:
        spec, f, u0 = _build_inputs(cfg, N, alpha, seed)
        tr, err = run_trajectory(cfg, f, u0, float(alpha), record_every=10**9)
        d = tr.diagnostics
        row.update(
            status="complete" if err is None else "partial",
            t_end=float(tr.times[-1]),
            sup_h1=float(d["h1"].max()),
            sup_h_alpha1=float(d["h_alpha1"].max()),
            sup_h_alpha2=float(d["h_alpha2"].max()),
            energy_min_margin=float(d["energy_margin"].min()),
            energy_C=float(tr.meta.get("energy_C", 0.0)),
            C_shell=fit_shell_constant([tr], [f], tr.shell_qs),
            C_h1=fit_h1_constant([tr], [f]),
        )
        if err is not None:
            row["error"] = f"{type(err).__name__}: {err}"
        gp = data["verify"]["gronwall"]
        try:
            t0 = good_time_select(tr, gp["t_select"], gp["eps"], f)
            rep = gronwall_chain_check(tr, f, float(alpha), t0)
            row.update(good_time=t0, C_gronwall=rep.constants["C"])
        except (NSGainError, ValueError) as e:
            row.update(good_time=None, C_gronwall=None)
            row["error"] = (row["error"] + "; " if row["error"] else "") + f"gronwall: {e}"
        for o in LADDER_OFFSETS:
            row[_offset_label(o)] = norm_from_coeffs(f.grid, f.coeffs, float(alpha) + o)
    except Exception as e:  # per-cell failures are recorded, the sweep continues
        row.update(status="error", error=f"{type(e).__name__}: {e}")
    return row


SWEEP_COLUMNS = (
    ["N", "alpha", "seed", "status", "t_end", "sup_h1", "sup_h_alpha1", "sup_h_alpha2", "energy_min_margin", "energy_C"]
    + ["C_gronwall", "good_time", "C_shell", "C_h1"]
    + [_offset_label(o) for o in LADDER_OFFSETS]
    + ["sup_change", "stable_sup"]
    + ["growth_" + _offset_label(o) for o in LADDER_OFFSETS]
    + ["error"]
)


def _sweep_groups(rows, stable_tol: float):
    """Stability and force growth between the two finest successful resolutions of each (alpha, seed)."""
    groups = {}
    for r in rows:
        groups.setdefault((r["alpha"], r["seed"]), []).append(r)
    summary = []
    for (a, s), rs in sorted(groups.items()):
        ok = sorted((r for r in rs if r.get("status") == "complete"), key=lambda r: r["N"])
        entry = {"alpha": a, "seed": s, "resolutions": [r["N"] for r in ok]}
        if len(ok) >= 2:
            lo, hi = ok[-2], ok[-1]
            change = abs(hi["sup_h_alpha2"] - lo["sup_h_alpha2"]) / lo["sup_h_alpha2"] if lo["sup_h_alpha2"] > 0 else float("inf")
            growth = {}
            for o in LADDER_OFFSETS:
                k = _offset_label(o)
                growth["growth_" + k] = (hi[k] - lo[k]) / lo[k] if lo[k] > 0 else float("inf")
            entry.update(sup_change=change, stable_sup=bool(change < stable_tol), **growth)
            for r in rs:
                r.update(sup_change=change, stable_sup=bool(change < stable_tol), **growth)
        summary.append(entry)
    return summary


def cmd_sweep(cfg: RunConfig, root=None) -> int:
    sw = cfg.data["sweep"]
    Ns = sw["N"] if sw["N"] is not None else [cfg.data["grid"]["N"]]
    seeds = sw["seeds"] if sw["seeds"] is not None else [cfg.seed]
    alphas = sw["alpha"] if sw["alpha"] is not None else [cfg.alpha]
    for key, v in (("N", Ns), ("seeds", seeds), ("alpha", alphas)):
        if len(v) == 0:
            raise ConfigError("sweep list is empty", field=f"sweep.{key}", line=cfg.line(f"sweep.{key}"))
    cells = [(int(N), float(a), int(s)) for a, s, N in itertools.product(alphas, seeds, Ns)]
    h = cfg.sweep_hash
    out = cfg.run_dir(root)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write(out / "config.yaml", cfg.to_yaml())
    if sw["workers"] > 1:
        with ProcessPoolExecutor(max_workers=sw["workers"]) as pool:
            rows = list(pool.map(sweep_cell, *zip(*[(cfg.data, N, a, s) for N, a, s in cells])))
    else:
        rows = [sweep_cell(cfg.data, N, a, s) for N, a, s in cells]
    rows.sort(key=lambda r: (r["alpha"], r["seed"], r["N"]))
    groups = _sweep_groups(rows, sw["stable_tol"])
    write_table(out / "sweep.csv", SWEEP_COLUMNS, ([r.get(c) for c in SWEEP_COLUMNS] for r in rows), h)
    write_json(
        out / "sweep.json",
        {
            "schema_version": SCHEMA_VERSION,
            "config_hash": h,
            "cells": rows,
            "groups": groups,
            "growth_min": sw["growth_min"],
            "stable_tol": sw["stable_tol"],
        },
    )
    n_err = sum(r["status"] == "error" for r in rows)
    print(f"sweep: {len(rows)} cells ({n_err} failed) written to {out}")
    return EXIT_OK if n_err == 0 else EXIT_FAILED


# ---------------------------------------------------------------------------
# report


def _figure(path: Path, draw):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    draw(ax)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def _read_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise CorruptArtifactError(path, f"invalid JSON ({err.msg})") from None


def cmd_report(merge_dir) -> int:
    """Merge every verify/sweep artifact under ``merge_dir`` into one JSON, one CSV and figures."""
    base = Path(merge_dir)
    if not base.is_dir():
        raise MissingInputError(f"{base} is not a directory")
    figs = base / "figures"
    figs.mkdir(exist_ok=True)
    merged = {"schema_version": SCHEMA_VERSION, "verify": [], "sweeps": [], "runs": []}
    rows = []
    for p in sorted(base.rglob("verify_*.json")):
        doc = _read_json(p)
        rel = p.relative_to(base).as_posix()
        merged["verify"].append({"file": rel, "suite": doc["suite"], "passed": doc["passed"], "config_hash": doc["config_hash"]})
        for r in doc["reports"]:
            C = r["constants"].get("C", r["constants"].get("C_measured", r["constants"].get("C_estimate")))
            rows.append([rel, doc["config_hash"], r["inequality"], r["passed"], r["min_margin"], C])

        def draw(ax, doc=doc):
            for r in doc["reports"]:
                m = np.array([float(x) for x in r["margin"]])
                ax.plot(np.array(r["times"], float), m, marker=".", label=r["inequality"])
            ax.axhline(0.0, color="k", lw=0.5)
            ax.set_xlabel("t")
            ax.set_ylabel("rhs - lhs")
            ax.set_title(f"{doc['suite']} margins")
            if len(doc["reports"]) <= 8:
                ax.legend(fontsize=7)

        _figure(figs / (rel.replace("/", "__").removesuffix(".json") + ".png"), draw)
    for p in sorted(base.rglob("sweep.json")):
        doc = _read_json(p)
        rel = p.relative_to(base).as_posix()
        merged["sweeps"].append({"file": rel, "config_hash": doc["config_hash"], "groups": doc["groups"]})
        cells = doc["cells"]

        def draw(ax, cells=cells):
            keys = sorted({(c["alpha"], c["seed"]) for c in cells})
            for a, s in keys:
                pts = sorted((c["N"], c["sup_h_alpha2"]) for c in cells if c["alpha"] == a and c["seed"] == s and c.get("sup_h_alpha2") is not None)
                if pts:
                    ax.plot(*zip(*pts), marker="o", label=f"alpha={a:g}, seed={s}")
            ax.set_xscale("log", base=2)
            ax.set_xlabel("N")
            ax.set_ylabel("sup_t ||u||_{H^{alpha+2}}")
            ax.legend(fontsize=7)

        _figure(figs / (rel.replace("/", "__").removesuffix(".json") + ".png"), draw)
    for p in sorted(base.rglob("metadata.json")):
        doc = _read_json(p)
        rel = p.parent.relative_to(base).as_posix()
        merged["runs"].append({"dir": rel, "config_hash": doc.get("config_hash"), "status": doc.get("status")})
        tp = p.parent / "trajectory.csv"
        if tp.is_file():
            _, _, tr = read_table(tp, TRAJECTORY_COLUMNS)

            def draw(ax, tr=tr):
                for j, name in enumerate(("l2", "h1", "h_alpha1", "h_alpha2"), start=1):
                    ax.semilogy(tr[:, 0], tr[:, j], label=name)
                ax.set_xlabel("t")
                ax.legend(fontsize=7)

            _figure(figs / ((rel.replace("/", "__") or "run") + "__norms.png"), draw)
    merged["all_passed"] = all(v["passed"] for v in merged["verify"])
    write_json(base / "merged_report.json", merged)
    write_table(base / "merged_report.csv", ["file", "config_hash", "inequality", "passed", "min_margin", "constant"], rows, "merged")
    print(f"report: {len(merged['verify'])} verify files, {len(merged['sweeps'])} sweeps, {len(merged['runs'])} runs merged into {base}")
    return EXIT_OK if merged["all_passed"] else EXIT_FAILED


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nsgain", description="Spectral Navier-Stokes runs and inequality verification.")
    ap.add_argument("--output-root", default=None, help=f"artifact root (default ${OUTPUT_ROOT_ENV} or ./{DEFAULT_OUTPUT_ROOT})")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", help="run the solver and write trajectory artifacts")
    p.add_argument("--config", required=True)
    p = sub.add_parser("verify", help="check one inequality suite against stored artifacts")
    p.add_argument("--suite", required=True, choices=SUITES)
    p.add_argument("--config", required=True)
    p.add_argument("--allow-hash-mismatch", action="store_true")
    p = sub.add_parser("sweep", help="fan out over resolutions, seeds and force exponents")
    p.add_argument("--config", required=True)
    p = sub.add_parser("report", help="merge reports and render figures")
    p.add_argument("--merge", required=True, metavar="DIR")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            return cmd_report(args.merge)
        cfg = load_config(args.config)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.output_root)
        if args.command == "verify":
            return cmd_verify(cfg, args.suite, args.output_root, args.allow_hash_mismatch)
        return cmd_sweep(cfg, args.output_root)
    except HashMismatchError as err:
        print(json.dumps({"error": "hash_mismatch", "message": str(err)}), file=sys.stderr)
        return EXIT_HASH
    except (ConfigError, MissingInputError, CorruptArtifactError) as err:
        detail = {"error": type(err).__name__, "message": str(err)}
        for attr in ("field", "line", "path", "reason"):
            if getattr(err, attr, None) is not None:
                detail[attr] = getattr(err, attr)
        print(json.dumps(detail, sort_keys=True), file=sys.stderr)
        return EXIT_INPUT
    except (BlowUpError, IntegratorFaultError) as err:
        print(json.dumps({"error": type(err).__name__, "message": str(err)}), file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
