"""Command-line front end.

Configurations are flat ``key=value`` files with dotted section prefixes::

    physical.omega = 8.796459430051421e6
    physical.distance = 280e-6
    protocol.kind = quintic, unbounded
    noise.kind = white
    noise.gamma = 1.1e-11
    sweep.variable = T
    sweep.start = 0.4
    sweep.stop = 10
    sweep.points = 50
    sweep.units = T0

Exit status: 0 on success, 2 for configuration errors, 3 for runtime
failures (divergence, singular systems, infeasible single points).
"""

import argparse
from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import dataclass, field
import io
import json
import math
import sys

import numpy as np
from scipy.constants import hbar

from . import excitation as ex
from . import oracle as orc
from . import robustness as rb
from .errors import ConfigurationError, InfeasibleError, InvalidDurationError, ShuttleKitError
from .noise import Flicker, OrnsteinUhlenbeck, White
from .trajectories import CA40_ION_MASS, PhysicalParams, Protocol, dump_rows, synthesize

SCHEMA = 1
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
G0_FACTOR = 1e6  # G is reported as G / (hbar omega^2 * 1e6)
ZERO_GAP_TOL = 1e-9  # |excitation| below this many hbar*omega counts as zero

KNOWN_KEYS = {
    "physical.mass", "physical.omega", "physical.frequency_hz", "physical.distance",
    "physical.duration", "physical.duration_periods", "physical.n",
    "protocol.kind", "protocol.delta", "protocol.delta_fraction", "protocol.k",
    "noise.kind", "noise.coupling", "noise.K", "noise.gamma", "noise.D", "noise.tau",
    "noise.C", "noise.tau1", "noise.tau2",
    "sweep.variable", "sweep.start", "sweep.stop", "sweep.points", "sweep.spacing",
    "sweep.units", "sweep.T",
    "oracle.mode", "oracle.members", "oracle.seed", "oracle.dt",
    "output.path", "output.format", "output.points",
}
SWEEP_VARS = ("T", "tau", "tau2", "lambda", "omega_eval")
UNIT_NAMES = ("si", "T0", "inv_omega", "omega")


def parse_config_text(text):
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    unknown = sorted(set(out) - KNOWN_KEYS)
    if unknown:
        raise ConfigurationError("unknown keys: " + ", ".join(unknown))
    return out


def _num(cfg, key, default=None, kind=float):
    if key not in cfg:
        if default is None:
            raise ConfigurationError(f"missing required key {key}")
        return default
    try:
        v = kind(cfg[key])
    except ValueError:
        raise ConfigurationError(f"{key}: cannot parse {cfg[key]!r} as {kind.__name__}") from None
    if kind is float and not math.isfinite(v):
        raise ConfigurationError(f"{key} must be finite")
    return v


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple


@dataclass(frozen=True)
class OracleSpec:
    mode: str = "none"
    members: int = 10_000
    seed: int = 0
    dt: float | None = None


@dataclass(frozen=True)
class RunConfig:
    params: PhysicalParams
    protocols: tuple
    k: int | None
    noise: object
    coupling: str
    K: float | None
    sweep: SweepSpec | None
    oracle: OracleSpec
    output_path: str | None
    output_format: str
    points: int = 1001
    raw: dict = field(default_factory=dict, compare=False)


def _unit_scale(units, omega):
    return {"si": 1.0, "T0": 2.0 * math.pi / omega, "inv_omega": 1.0 / omega, "omega": omega}[units]


def _noise_model(cfg):
    kind = cfg.get("noise.kind", "none")
    try:
        if kind == "none":
            return None
        if kind == "white":
            return White(_num(cfg, "noise.gamma"))
        if kind == "ou":
            return OrnsteinUhlenbeck(_num(cfg, "noise.D"), _num(cfg, "noise.tau"))
        if kind == "flicker":
            return Flicker(_num(cfg, "noise.C"), _num(cfg, "noise.tau1"), _num(cfg, "noise.tau2"))
    except ValueError as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"noise: {exc}") from None
    raise ConfigurationError(f"noise.kind must be none, white, ou or flicker, got {kind!r}")


def _sweep(cfg, omega):
    if "sweep.variable" not in cfg:
        extra = sorted(k for k in cfg if k.startswith("sweep."))
        if extra:
            raise ConfigurationError("sweep keys given without sweep.variable: " + ", ".join(extra))
        return None
    var = cfg["sweep.variable"]
    if var not in SWEEP_VARS:
        raise ConfigurationError(f"sweep.variable must be one of {', '.join(SWEEP_VARS)}")
    start, stop = _num(cfg, "sweep.start"), _num(cfg, "sweep.stop")
    points = _num(cfg, "sweep.points", kind=int)
    if points < 2:
        raise ConfigurationError("sweep.points must be at least 2")
    spacing = cfg.get("sweep.spacing", "linear")
    if spacing not in ("linear", "log"):
        raise ConfigurationError("sweep.spacing must be linear or log")
    units = cfg.get("sweep.units", "si")
    if units not in UNIT_NAMES:
        raise ConfigurationError(f"sweep.units must be one of {', '.join(UNIT_NAMES)}")
    if var == "lambda" and units != "si":
        raise ConfigurationError("lambda is dimensionless; use sweep.units=si")
    scale = _unit_scale(units, omega)
    if var == "lambda":
        if min(start, stop) <= -1.0:
            raise ConfigurationError("lambda must exceed -1")
    elif min(start, stop) <= 0.0:
        raise ConfigurationError(f"sweep over {var} needs positive bounds")
    if spacing == "log":
        if min(start, stop) <= 0.0:
            raise ConfigurationError("log spacing needs positive bounds")
        vals = np.geomspace(start, stop, points)
    else:
        vals = np.linspace(start, stop, points)
    return SweepSpec(var, tuple(float(v) * scale for v in vals))


def build_config(cfg, seed_override=None):
    """Validate a parsed mapping into a :class:`RunConfig`."""
    if "physical.omega" in cfg and "physical.frequency_hz" in cfg:
        raise ConfigurationError("give physical.omega or physical.frequency_hz, not both")
    if "physical.frequency_hz" in cfg:
        omega = 2.0 * math.pi * _num(cfg, "physical.frequency_hz")
    else:
        omega = _num(cfg, "physical.omega")
    d = _num(cfg, "physical.distance")
    T0 = 2.0 * math.pi / omega if omega > 0 else 1.0
    if "physical.duration" in cfg and "physical.duration_periods" in cfg:
        raise ConfigurationError("give physical.duration or physical.duration_periods, not both")
    if "physical.duration_periods" in cfg:
        T = _num(cfg, "physical.duration_periods") * T0
    else:
        T = _num(cfg, "physical.duration", default=T0)
    if "protocol.delta" in cfg and "protocol.delta_fraction" in cfg:
        raise ConfigurationError("give protocol.delta or protocol.delta_fraction, not both")
    delta = None
    if "protocol.delta" in cfg:
        delta = _num(cfg, "protocol.delta")
    elif "protocol.delta_fraction" in cfg:
        delta = _num(cfg, "protocol.delta_fraction") * d
    try:
        params = PhysicalParams(
            mass=_num(cfg, "physical.mass", default=CA40_ION_MASS),
            omega=omega, distance=d, duration=T,
            n=_num(cfg, "physical.n", default=0, kind=int), delta=delta,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"physical: {exc}") from None

    names = [s.strip() for s in cfg.get("protocol.kind", "quintic").split(",") if s.strip()]
    try:
        protocols = tuple(Protocol(n) for n in names)
    except ValueError:
        raise ConfigurationError(
            f"protocol.kind entries must be among {', '.join(p.value for p in Protocol)}"
        ) from None
    if not protocols:
        raise ConfigurationError("protocol.kind is empty")
    if Protocol.BOUNDED_OPTIMAL in protocols and delta is None:
        raise ConfigurationError("bounded protocol needs protocol.delta or protocol.delta_fraction")
    k = _num(cfg, "protocol.k", kind=int) if "protocol.k" in cfg else None
    if k is not None and k < 0:
        raise ConfigurationError("protocol.k must be non-negative")

    noise = _noise_model(cfg)
    coupling = cfg.get("noise.coupling", "spring")
    if coupling not in (orc.SPRING, orc.POSITION):
        raise ConfigurationError("noise.coupling must be spring or position")
    K = None
    if coupling == orc.POSITION:
        K = _num(cfg, "noise.K")
        if not K > 0:
            raise ConfigurationError("noise.K must be positive")
        if noise is None:
            raise ConfigurationError("position coupling needs a noise model")
    elif "noise.K" in cfg:
        raise ConfigurationError("noise.K only applies to noise.coupling=position")

    sweep = _sweep(cfg, omega)
    if sweep is not None:
        if sweep.variable == "tau" and not isinstance(noise, OrnsteinUhlenbeck):
            raise ConfigurationError("sweep over tau needs noise.kind=ou")
        if sweep.variable == "tau2" and not isinstance(noise, Flicker):
            raise ConfigurationError("sweep over tau2 needs noise.kind=flicker")
        if sweep.variable == "tau2" and min(sweep.values) <= noise.tau1:
            raise ConfigurationError("sweep over tau2 must stay above noise.tau1")

    mode = cfg.get("oracle.mode", "none")
    if mode not in ("none", "moments", "mc"):
        raise ConfigurationError("oracle.mode must be none, moments or mc")
    seed = _num(cfg, "oracle.seed", default=0, kind=int)
    if seed_override is not None:
        seed = seed_override
    if not 0 <= seed < 2**64:
        raise ConfigurationError("seed must be an unsigned 64-bit integer")
    members = _num(cfg, "oracle.members", default=10_000, kind=int)
    if members < 100:
        raise ConfigurationError("oracle.members must be at least 100")
    odt = _num(cfg, "oracle.dt") if "oracle.dt" in cfg else None
    if odt is not None and not odt > 0:
        raise ConfigurationError("oracle.dt must be positive")
    if mode == "mc" and noise is None:
        raise ConfigurationError("oracle.mode=mc needs a noise model")

    fmt = cfg.get("output.format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigurationError("output.format must be csv or json")
    points = _num(cfg, "output.points", default=1001, kind=int)
    if points < 2:
        raise ConfigurationError("output.points must be at least 2")
    return RunConfig(
        params=params, protocols=protocols, k=k, noise=noise, coupling=coupling, K=K,
        sweep=sweep, oracle=OracleSpec(mode, members, seed, odt),
        output_path=cfg.get("output.path"), output_format=fmt, points=points, raw=dict(cfg),
    )


def load_config(path, seed_override=None):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc}") from None
    return build_config(parse_config_text(text), seed_override)


# -- evaluation -------------------------------------------------------------

def _with_variable(rc, value):
    """Parameters and noise model at one sweep point."""
    params, noise = rc.params, rc.noise
    var = rc.sweep.variable if rc.sweep else None
    if var == "T":
        params = params.with_duration(value)
    elif var == "tau":
        noise = OrnsteinUhlenbeck(noise.D, value)
    elif var == "tau2":
        noise = Flicker(noise.C, noise.tau1, value)
    return params, noise


def _predict(traj, params, noise, rc):
    """Perturbative report for the configured coupling (unit intensity if no noise)."""
    if rc.coupling == orc.POSITION:
        return ex.position_excitation(params, ex.PositionNoiseParams(rc.K, noise))
    model = White(0.0) if noise is None else noise
    if isinstance(model, White):
        return ex.white_excitation(traj, params, model.gamma)
    return ex.spring_excitation(traj, params, model)


def _rel_gap(pred, got, scale):
    if pred == 0.0:
        if abs(got) <= ZERO_GAP_TOL * scale:
            return 0.0
        raise ShuttleKitError("prediction is zero but the oracle excitation is not")
    return (got - pred) / pred


def _run_oracle(traj, params, noise, rc):
    if rc.oracle.mode == "mc":
        res = orc.mc_ensemble_energy(
            traj, params, noise, coupling=rc.coupling, K=rc.K,
            members=rc.oracle.members, seed=rc.oracle.seed, dt=rc.oracle.dt,
        )
        return res.excitation, res
    if rc.coupling == orc.POSITION:
        run = orc.evolve_moments_position(traj, params, ex.PositionNoiseParams(rc.K, noise), dt=rc.oracle.dt)
    else:
        run = orc.evolve_moments_spring(traj, params, noise, dt=rc.oracle.dt)
    return run.excitation, run


def _point(rc, proto, value, compare):
    params, noise = _with_variable(rc, value)
    row = {"protocol": proto.value}
    try:
        traj = synthesize(proto, params, rc.k)
    except (InfeasibleError, InvalidDurationError):
        row["infeasible"] = 1
        return row
    rep = _predict(traj, params, noise, rc)
    row["infeasible"] = 0
    if rc.coupling == orc.SPRING:
        row["G_over_G0"] = rep.G / (hbar * params.omega**2 * G0_FACTOR)
    row["E_e_J"] = rep.E_e
    row["E_e_hbar_omega"] = rep.E_e / params.hbar_omega
    if compare:
        got, res = _run_oracle(traj, params, noise, rc)
        row["E_e_pred"] = rep.E_e
        row["E_e_oracle"] = got
        row["rel_gap"] = _rel_gap(rep.E_e, got, params.hbar_omega)
        row["E_pred_J"] = params.mode_energy + rep.E_e
        row["E_oracle_J"] = params.mode_energy + got
        if rc.oracle.mode == "mc":
            row["std_error_J"] = res.std_error
    return row


def _columns(rc, compare):
    var = rc.sweep.variable
    cols = [var, "protocol"]
    if rc.coupling == orc.SPRING:
        cols.append("G_over_G0")
    cols += ["E_e_J", "E_e_hbar_omega"]
    if compare:
        cols += ["E_e_pred", "E_e_oracle", "rel_gap", "E_pred_J", "E_oracle_J"]
        if rc.oracle.mode == "mc":
            cols.append("std_error_J")
    return cols + ["infeasible"]


def _lambda_rows(rc):
    params = rc.params
    trajs = [synthesize(Protocol.QUINTIC, params), synthesize(Protocol.ROBUST_SEPTIC, params)]
    vals = rc.sweep.values
    table = _map_points(lambda lam: rb.lambda_sweep(trajs, params, [lam])[0], vals)
    rows = []
    for lam, (eq, es) in zip(vals, table):
        ratio = 0.0 if eq == 0.0 else es / eq
        rows.append({"lambda": lam, "E_e_quintic_J": eq, "E_e_septic_J": es, "ratio": ratio})
    return ["lambda", "E_e_quintic_J", "E_e_septic_J", "ratio"], rows


def _omega_rows(rc):
    params = rc.params
    rows = []
    for proto in rc.protocols:
        traj = synthesize(proto, params, rc.k)
        for w in rc.sweep.values:
            ic, is_ = rb.fourier_conditions(traj, w)
            lam = (w / params.omega) ** 2 - 1.0
            rows.append({
                "omega_eval": w, "protocol": proto.value, "I_cos": ic, "I_sin": is_,
                "E_e_J": 0.5 * params.mass * lam * lam * (ic * ic + is_ * is_),
            })
    return ["omega_eval", "protocol", "I_cos", "I_sin", "E_e_J"], rows


def _map_points(fn, items, parallel=True):
    from .oracle import thread_count

    items = list(items)
    nw = min(thread_count(), len(items)) if parallel else 1
    if nw <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=nw) as pool:
        return list(pool.map(fn, items))


def sweep_rows(rc, compare=False):
    """Rows for ``run``/``compare`` in sweep order."""
    if rc.sweep is None:
        raise ConfigurationError("run and compare need a sweep.* block")
    var = rc.sweep.variable
    if var == "lambda":
        if compare:
            raise ConfigurationError("compare does not support a lambda sweep")
        return _lambda_rows(rc)
    if var == "omega_eval":
        if compare:
            raise ConfigurationError("compare does not support an omega_eval sweep")
        return _omega_rows(rc)
    if compare and rc.oracle.mode == "none":
        raise ConfigurationError("compare needs oracle.mode=moments or mc")
    jobs = [(p, v) for v in rc.sweep.values for p in rc.protocols]
    parallel = not (compare and rc.oracle.mode == "mc")
    rows = _map_points(lambda job: _point(rc, job[0], job[1], compare), jobs, parallel)
    for (_, v), row in zip(jobs, rows):
        row[var] = v
    return _columns(rc, compare), rows


# -- output -----------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        if not math.isfinite(v):
            raise ShuttleKitError("non-finite value in output record")
        return f"{float(v):.17g}"
    return str(v)


def render_csv(columns, rows):
    buf = io.StringIO()
    buf.write(f"# schema={SCHEMA}\r\n")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) if c in r else "" for c in columns])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        if not math.isfinite(v):
            raise ShuttleKitError("non-finite value in output record")
        return float(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def render_json(payload):
    return json.dumps(_jsonable(payload), indent=2, sort_keys=False) + "\n"


def _emit(text, rc):
    if rc.output_path:
        with open(rc.output_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_table(rc, columns, rows):
    if rc.output_format == "json":
        _emit(render_json({"schema": SCHEMA, "columns": columns, "records": rows}), rc)
    else:
        _emit(render_csv(columns, rows), rc)


def cmd_run(rc):
    cols, rows = sweep_rows(rc, compare=False)
    _emit_table(rc, cols, rows)


def cmd_compare(rc):
    cols, rows = sweep_rows(rc, compare=True)
    _emit_table(rc, cols, rows)
    gaps = [abs(r["rel_gap"]) for r in rows if not r.get("infeasible")]
    worst = max(gaps) if gaps else 0.0
    sys.stderr.write(f"max |rel_gap| = {worst:.6g}\n")


def oracle_report(rc):
    if rc.sweep is not None:
        raise ConfigurationError("oracle evaluates a single point; remove the sweep.* keys")
    if len(rc.protocols) != 1:
        raise ConfigurationError("oracle needs exactly one protocol.kind")
    if rc.oracle.mode == "none":
        raise ConfigurationError("oracle needs oracle.mode=moments or mc")
    params, noise = rc.params, rc.noise
    traj = synthesize(rc.protocols[0], params, rc.k)
    rep = _predict(traj, params, noise, rc)
    got, res = _run_oracle(traj, params, noise, rc)
    out = {
        "protocol": rc.protocols[0].value,
        "mode": rc.oracle.mode,
        "prediction_J": rep.E_e,
        "excitation_J": got,
        "relative_gap": _rel_gap(rep.E_e, got, params.hbar_omega),
    }
    if rc.oracle.mode == "mc":
        out.update(
            final_moments=None,
            energy_J=res.mean_energy,
            std_error_J=res.std_error,
            members=res.member_count,
            seed=res.seed,
            flagged=res.flagged,
        )
    else:
        out.update(final_moments=res.state.to_dict(), energy_J=res.energy)
    order = ["protocol", "mode", "final_moments", "energy_J", "excitation_J", "prediction_J",
             "relative_gap", "std_error_J", "members", "seed", "flagged"]
    return {k: out[k] for k in order if k in out}


def cmd_oracle(rc):
    _emit(render_json(oracle_report(rc)), rc)


def cmd_traj_dump(rc):
    if len(rc.protocols) != 1:
        raise ConfigurationError("traj dump needs exactly one protocol.kind")
    traj = synthesize(rc.protocols[0], rc.params, rc.k)
    cols = ["t", "q_c", "qdot_c", "qddot_c", "q_0"]
    rows = [dict(zip(cols, r)) for r in dump_rows(traj, rc.points)]
    _emit_table(rc, cols, rows)


def build_parser():
    p = argparse.ArgumentParser(prog="shuttlekit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [("run", "evaluate a sweep of perturbative predictions"),
                        ("compare", "sweep with oracle cross-checks"),
                        ("oracle", "single-point oracle run, JSON output")]:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config")
        sp.add_argument("--seed", type=int, default=None)
    tp = sub.add_parser("traj", help="trajectory utilities")
    tsub = tp.add_subparsers(dest="traj_command", required=True)
    dp = tsub.add_parser("dump", help="write t, q_c and trap path samples as CSV")
    dp.add_argument("config")
    dp.add_argument("--seed", type=int, default=None)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        rc = load_config(args.config, args.seed)
        if args.command == "run":
            cmd_run(rc)
        elif args.command == "compare":
            cmd_compare(rc)
        elif args.command == "oracle":
            cmd_oracle(rc)
        else:
            cmd_traj_dump(rc)
    except ConfigurationError as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG
    except (ShuttleKitError, ArithmeticError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
