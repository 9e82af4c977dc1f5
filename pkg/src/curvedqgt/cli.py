"""Command-line front end: single points, sweeps, validation, spectra.

Subcommands: ``compute``, ``sweep``, ``validate``, ``spectrum``,
``phase-portrait``.  All numeric output is emitted as CSV (17 significant
digits, lossless round-trip) or JSON lines; a JSON config file can mirror
every flag, with explicit flags taking precedence.

Exit codes: 0 success, 1 validation failure, 2 usage error, 3 numerical
failure.
"""

from __future__ import annotations

import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import click
import numpy as np

from . import fidelity as fid
from . import geometry as geo
from . import models as mdl
from . import spectrum as spec
from .core import EngineError, validate_model
from .diffops import FdConfig
from .quadrature import QuadratureConfig

_PARAM_FLAGS = ("lambda", "omega", "k1", "k2", "a", "b", "c")
_QUANTITIES = ("qmt", "qgt", "berry_curvature", "berry_connection", "det",
               "fidelity_chi")


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _emit(lines, out):
    text = "\n".join(lines) + ("\n" if lines else "")
    if out in (None, "-", "stdout"):
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _fail(code: int, kind: str, message: str):
    sys.stderr.write(json.dumps({"error": {"type": kind, "message": message}},
                                sort_keys=True) + "\n")
    raise SystemExit(code)


def _load_config(path):
    if not path:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _cfg_value(ctx, config, name, value):
    """Flags override the config file; config overrides click defaults."""
    src = ctx.get_parameter_source(name)
    if src is not None and src.name != "DEFAULT":
        return value
    key = name.replace("_", "-")
    if key in config:
        return config[key]
    if name in config:
        return config[name]
    return value


def common_options(fn):
    fn = click.option("--model", "model_name", default=None,
                      help="registered model name")(fn)
    fn = click.option("--hbar", type=float, default=1.0, show_default=True)(fn)
    fn = click.option("--format", "fmt", type=click.Choice(["csv", "jsonl"]),
                      default=None)(fn)
    fn = click.option("--out", "out", default="-",
                      help="output path or '-' for stdout")(fn)
    fn = click.option("--config", "config_path", default=None,
                      type=click.Path(exists=True), help="JSON config mirroring flags")(fn)
    fn = click.option("--jobs", type=int, default=1, show_default=True)(fn)
    fn = click.option("--quad-rel-tol", type=float, default=1e-10,
                      show_default=True)(fn)
    fn = click.option("--fd-step", type=float, default=1e-4, show_default=True)(fn)
    for name in reversed(_PARAM_FLAGS):
        fn = click.option(f"--{name}", f"p_{name}", type=float, default=None)(fn)
    return fn


def _engine_config(quad_rel_tol: float, fd_step: float) -> geo.EngineConfig:
    return geo.EngineConfig(
        quad=QuadratureConfig(rel_tol=quad_rel_tol,
                              abs_tol=max(1e-14, quad_rel_tol * 1e-2)),
        fd=FdConfig(base_step=fd_step),
    )


def _get_model(name, hbar):
    if not name:
        raise click.UsageError("a --model name is required")
    try:
        return mdl.get_model(name, hbar=hbar, verify=False)
    except KeyError:
        raise click.UsageError(
            f"unknown model '{name}'; available: {', '.join(mdl.available_models())}"
        )


def _collect_params(model, flag_values: dict, config: dict) -> np.ndarray:
    conf_params = config.get("params", {})
    values = []
    for name in model.parameter_names:
        v = flag_values.get(name)
        if v is None:
            v = conf_params.get(name)
        if v is None:
            raise click.UsageError(
                f"model {model.name} needs --{name} (parameters: "
                f"{', '.join(model.parameter_names)})"
            )
        values.append(float(v))
    lamv = np.array(values)
    if not model.check_in_domain(lamv):
        raise click.UsageError(
            f"parameters {dict(zip(model.parameter_names, values))} lie outside "
            f"the domain of {model.name}"
        )
    return lamv


def _parse_quantities(text, model, default=("qmt", "berry_curvature",
                                            "berry_connection", "det")):
    if not text:
        return list(default)
    out = []
    for item in str(text).split(","):
        item = item.strip()
        if not item:
            continue
        if item.startswith("subdet:"):
            pname = item.split(":", 1)[1]
            if pname not in model.parameter_names:
                raise click.UsageError(f"subdet parameter '{pname}' not in "
                                       f"{model.parameter_names}")
            out.append(item)
        elif item in _QUANTITIES:
            out.append(item)
        else:
            raise click.UsageError(f"unknown quantity '{item}'")
    return out


# ---------------------------------------------------------------------------
# Records and serialization
# ---------------------------------------------------------------------------

def _point_record(model, lamv, n, quantities, cfg):
    if not model.check_in_domain(lamv):
        raise EngineError(
            f"parameters {dict(zip(model.parameter_names, map(float, lamv)))} "
            f"lie outside the domain of {model.name}"
        )
    engine = geo.GeometryEngine(
        model.psi, model.metric, model.domain_for(lamv), cfg,
        in_domain=model.in_domain,
    )
    tensors = engine.qgt(lamv, n)
    rec = {"params": dict(zip(model.parameter_names, map(float, lamv))),
           "n": list(n),
           "config": {"hbar": model.hbar, "quad_rel_tol": cfg.quad.rel_tol,
                      "quad_abs_tol": cfg.quad.abs_tol,
                      "fd_step": cfg.fd.base_step, "fd_scheme": cfg.fd.scheme}}
    diag = {"quad_error": tensors.quad_error,
            "fd_steps": [float(s) for s in tensors.fd_steps]}
    for q in quantities:
        if q == "qmt":
            rec["qmt"] = tensors.qmt.tolist()
        elif q == "qgt":
            rec["qgt"] = {"re": tensors.qgt.real.tolist(),
                          "im": tensors.qgt.imag.tolist()}
        elif q == "berry_curvature":
            rec["berry_curvature"] = tensors.berry_curvature.tolist()
        elif q == "berry_connection":
            rec["berry_connection"] = tensors.berry_connection.tolist()
        elif q == "det":
            rec["det"] = float(np.linalg.det(tensors.qmt))
        elif q.startswith("subdet:"):
            pname = q.split(":", 1)[1]
            idx = [i for i, nm in enumerate(model.parameter_names) if nm != pname]
            rec[f"subdet_{pname}"] = float(
                np.linalg.det(tensors.qmt[np.ix_(idx, idx)])
            )
        elif q == "fidelity_chi":
            chi = fid.fidelity_susceptibility(
                model.psi, model.metric, model.domain_for(lamv), lamv, n,
                cfg, in_domain=model.in_domain,
            )
            rec["fidelity_chi"] = chi.tolist()
    rec["diag"] = diag
    return rec


def _csv_header(model, quantities):
    m = model.m
    cols = list(model.parameter_names)
    for q in quantities:
        if q == "qmt":
            cols += [f"G_{i + 1}{j + 1}" for i in range(m) for j in range(m)]
        elif q == "qgt":
            cols += [f"QGTre_{i + 1}{j + 1}" for i in range(m) for j in range(m)]
            cols += [f"QGTim_{i + 1}{j + 1}" for i in range(m) for j in range(m)]
        elif q == "berry_curvature":
            cols += [f"F_{i + 1}{j + 1}" for i in range(m) for j in range(i + 1, m)]
        elif q == "berry_connection":
            cols += [f"beta_{i + 1}" for i in range(m)]
        elif q == "det":
            cols.append("det")
        elif q.startswith("subdet:"):
            cols.append(f"subdet_{q.split(':', 1)[1]}")
        elif q == "fidelity_chi":
            cols += [f"chi_{i + 1}{j + 1}" for i in range(m) for j in range(i, m)]
    cols += ["quad_err", "error"]
    return cols


def _csv_row(model, quantities, rec):
    m = model.m
    if rec.get("error"):
        vals = [_fmt(rec["params"][nm]) for nm in model.parameter_names]
        pad = len(_csv_header(model, quantities)) - m - 1
        return vals + [""] * pad + [str(rec["error"])]
    vals = [_fmt(rec["params"][nm]) for nm in model.parameter_names]
    for q in quantities:
        if q == "qmt":
            g = rec["qmt"]
            vals += [_fmt(g[i][j]) for i in range(m) for j in range(m)]
        elif q == "qgt":
            g = rec["qgt"]
            vals += [_fmt(g["re"][i][j]) for i in range(m) for j in range(m)]
            vals += [_fmt(g["im"][i][j]) for i in range(m) for j in range(m)]
        elif q == "berry_curvature":
            f = rec["berry_curvature"]
            vals += [_fmt(f[i][j]) for i in range(m) for j in range(i + 1, m)]
        elif q == "berry_connection":
            vals += [_fmt(v) for v in rec["berry_connection"]]
        elif q == "det":
            vals.append(_fmt(rec["det"]))
        elif q.startswith("subdet:"):
            vals.append(_fmt(rec[f"subdet_{q.split(':', 1)[1]}"]))
        elif q == "fidelity_chi":
            chi = rec["fidelity_chi"]
            vals += [_fmt(chi[i][j]) for i in range(m) for j in range(i, m)]
    vals += [_fmt(rec["diag"]["quad_error"]), ""]
    return vals


# ---------------------------------------------------------------------------
# Sweep machinery
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _SweepTask:
    model_name: str
    hbar: float
    lam_values: tuple
    n: tuple
    quantities: tuple
    quad_rel_tol: float
    fd_step: float
    index: int


def _run_sweep_task(task: _SweepTask):
    model = mdl.get_model(task.model_name, hbar=task.hbar, verify=False)
    cfg = _engine_config(task.quad_rel_tol, task.fd_step)
    lamv = np.array(task.lam_values)
    try:
        rec = _point_record(model, lamv, task.n, list(task.quantities), cfg)
    except Exception as exc:  # per-point failure becomes an error column
        rec = {"params": dict(zip(model.parameter_names, task.lam_values)),
               "n": list(task.n), "error": f"{type(exc).__name__}: {exc}",
               "diag": {"quad_error": math.nan, "fd_steps": []}}
    return task.index, rec


def _parse_grid(specs):
    grids = {}
    for item in specs:
        try:
            name, rest = item.split("=", 1)
            parts = rest.split(":")
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
            scale = parts[3] if len(parts) > 3 else "linear"
        except (ValueError, IndexError):
            raise click.UsageError(
                f"bad --grid '{item}'; expected name=min:max:count[:scale]"
            )
        if count < 1:
            raise click.UsageError("grid count must be at least 1")
        if scale not in ("linear", "log"):
            raise click.UsageError(f"unknown grid scale '{scale}'")
        if count == 1:
            values = np.array([lo])
        elif scale == "log":
            values = np.geomspace(lo, hi, count)
        else:
            values = np.linspace(lo, hi, count)
        grids[name.strip()] = values
    return grids


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

@click.group()
def main():
    """Quantum-geometry engine for parameter-dependent curved spaces."""


@main.command("compute")
@common_options
@click.option("--n", "n_str", default="0", show_default=True,
              help="quantum number (comma-separated for 2-D)")
@click.option("--quantities", "quantities_str", default=None,
              help="comma list from qmt,qgt,berry_curvature,berry_connection,"
                   "det,subdet:<param>,fidelity_chi")
@click.pass_context
def cmd_compute(ctx, model_name, hbar, fmt, out, config_path, jobs,
                quad_rel_tol, fd_step, n_str, quantities_str, **param_flags):
    """One record of requested tensors at a single parameter point."""
    config = _load_config(config_path)
    model_name = _cfg_value(ctx, config, "model_name", model_name) or config.get("model")
    hbar = float(_cfg_value(ctx, config, "hbar", hbar))
    fmt = _cfg_value(ctx, config, "fmt", fmt) or config.get("format") or "jsonl"
    quad_rel_tol = float(_cfg_value(ctx, config, "quad_rel_tol", quad_rel_tol))
    fd_step = float(_cfg_value(ctx, config, "fd_step", fd_step))
    n_str = _cfg_value(ctx, config, "n_str", n_str)
    quantities_str = _cfg_value(ctx, config, "quantities_str", quantities_str) \
        or config.get("quantities")

    model = _get_model(model_name, hbar)
    flags = {name: param_flags.get(f"p_{name}") for name in _PARAM_FLAGS}
    lamv = _collect_params(model, flags, config)
    n = tuple(int(v) for v in str(n_str).split(","))
    if len(n) != model.dim:
        raise click.UsageError(
            f"model {model.name} expects a {model.dim}-component quantum "
            f"number, got --n {n_str}"
        )
    if isinstance(quantities_str, (list, tuple)):
        quantities_str = ",".join(quantities_str)
    quantities = _parse_quantities(quantities_str, model)
    cfg = _engine_config(quad_rel_tol, fd_step)

    try:
        rec = _point_record(model, lamv, n, quantities, cfg)
    except EngineError as exc:
        _fail(3, type(exc).__name__, str(exc))
    if fmt == "jsonl":
        _emit([json.dumps(rec, sort_keys=True)], out)
    else:
        header = _csv_header(model, quantities)
        _emit([",".join(header), ",".join(_csv_row(model, quantities, rec))], out)


@main.command("sweep")
@common_options
@click.option("--grid", "grid_specs", multiple=True,
              help="name=min:max:count[:scale], repeatable")
@click.option("--n", "n_str", default="0", show_default=True)
@click.option("--quantities", "quantities_str", default=None)
@click.pass_context
def cmd_sweep(ctx, model_name, hbar, fmt, out, config_path, jobs,
              quad_rel_tol, fd_step, grid_specs, n_str, quantities_str,
              **param_flags):
    """Tensor table over a parameter grid, row order independent of --jobs."""
    config = _load_config(config_path)
    model_name = _cfg_value(ctx, config, "model_name", model_name) or config.get("model")
    hbar = float(_cfg_value(ctx, config, "hbar", hbar))
    fmt = _cfg_value(ctx, config, "fmt", fmt) or config.get("format") or "csv"
    jobs = int(_cfg_value(ctx, config, "jobs", jobs))
    quad_rel_tol = float(_cfg_value(ctx, config, "quad_rel_tol", quad_rel_tol))
    fd_step = float(_cfg_value(ctx, config, "fd_step", fd_step))
    n_str = _cfg_value(ctx, config, "n_str", n_str)
    quantities_str = _cfg_value(ctx, config, "quantities_str", quantities_str) \
        or config.get("quantities")
    if not grid_specs and "grid" in config:
        grid_specs = [
            f"{name}={g['min']}:{g['max']}:{g['count']}:{g.get('scale', 'linear')}"
            for name, g in config["grid"].items()
        ]

    model = _get_model(model_name, hbar)
    grids = _parse_grid(grid_specs)
    for name in grids:
        if name not in model.parameter_names:
            raise click.UsageError(f"grid parameter '{name}' not in "
                                   f"{model.parameter_names}")
    fixed = {}
    conf_params = config.get("params", {})
    for name in model.parameter_names:
        if name in grids:
            continue
        v = param_flags.get(f"p_{name}")
        if v is None:
            v = conf_params.get(name)
        if v is None:
            raise click.UsageError(f"parameter '{name}' needs a fixed value or a grid")
        fixed[name] = float(v)

    n = tuple(int(v) for v in str(n_str).split(","))
    if len(n) != model.dim:
        raise click.UsageError(
            f"model {model.name} expects a {model.dim}-component quantum "
            f"number, got --n {n_str}"
        )
    if isinstance(quantities_str, (list, tuple)):
        quantities_str = ",".join(quantities_str)
    quantities = tuple(_parse_quantities(quantities_str, model))

    swept = [nm for nm in model.parameter_names if nm in grids]
    shape = tuple(grids[nm].size for nm in swept)
    tasks = []
    for flat_idx, multi in enumerate(np.ndindex(*shape) if shape else [()]):
        values = dict(fixed)
        for nm, i in zip(swept, multi):
            values[nm] = float(grids[nm][i])
        lam_values = tuple(values[nm] for nm in model.parameter_names)
        tasks.append(_SweepTask(model.name, hbar, lam_values, n, quantities,
                                quad_rel_tol, fd_step, flat_idx))

    results = [None] * len(tasks)
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for idx, rec in pool.map(_run_sweep_task, tasks, chunksize=4):
                results[idx] = rec
    else:
        for task in tasks:
            idx, rec = _run_sweep_task(task)
            results[idx] = rec

    failures = sum(1 for r in results if r.get("error"))
    if fmt == "jsonl":
        lines = [json.dumps(r, sort_keys=True) for r in results]
    else:
        header = _csv_header(model, list(quantities))
        lines = [",".join(header)]
        lines += [",".join(_csv_row(model, list(quantities), r)) for r in results]
    _emit(lines, out)
    sys.stderr.write(f"sweep: {len(results)} points, {failures} failures\n")


@main.command("validate")
@common_options
@click.option("--n", "n_str", default=None, help="quantum number")
@click.option("--samples", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--route-tol", type=float, default=1e-4, show_default=True)
@click.option("--mis-normalize", type=float, default=1.0, hidden=True)
@click.pass_context
def cmd_validate(ctx, model_name, hbar, fmt, out, config_path, jobs,
                 quad_rel_tol, fd_step, n_str, samples, seed, route_tol,
                 mis_normalize, **param_flags):
    """Dual-route, gauge, and normalization checks; exit 1 on failure."""
    config = _load_config(config_path)
    model_name = _cfg_value(ctx, config, "model_name", model_name) or config.get("model")
    hbar = float(_cfg_value(ctx, config, "hbar", hbar))
    model = _get_model(model_name, hbar)
    cfg = _engine_config(quad_rel_tol, fd_step)

    psi = model.psi
    if mis_normalize != 1.0:
        base_eval = psi.eval
        base_grad = psi.analytic_param_grad
        psi = type(psi)(
            dim=psi.dim,
            eval=lambda lamv, n, *ax: mis_normalize * np.asarray(base_eval(lamv, n, *ax)),
            analytic_param_grad=None if base_grad is None else (
                lambda lamv, n, rho, *ax: mis_normalize
                * np.asarray(base_grad(lamv, n, rho, *ax))
            ),
        )

    n = (0,) * model.dim
    if n_str:
        n = tuple(int(v) for v in str(n_str).split(","))

    flags = {name: param_flags.get(f"p_{name}") for name in _PARAM_FLAGS}
    if any(v is not None for v in flags.values()) or config.get("params"):
        points = [_collect_params(model, flags, config)]
    else:
        rng = np.random.default_rng(seed)
        points = [model.sample_parameters(rng) for _ in range(samples)]

    checks = {"route_equivalence": 0.0, "gauge_invariance": 0.0,
              "connection_shift": 0.0, "normalization_identity": 0.0,
              "norm_deviation": 0.0}
    try:
        for lamv in points:
            domain = model.domain_for(lamv)
            engine = geo.GeometryEngine(psi, model.metric, domain, cfg,
                                        in_domain=model.in_domain)
            tensors = engine.qgt(lamv, n)
            chi = fid.fidelity_susceptibility(
                psi, model.metric, domain, lamv, n, cfg, in_domain=model.in_domain)
            checks["route_equivalence"] = max(
                checks["route_equivalence"],
                float(np.max(np.abs(chi - tensors.qmt))))

            coeff = 0.37
            alpha = lambda lv: coeff * lv[0] ** 2
            grad_alpha = np.zeros(model.m)
            grad_alpha[0] = 2 * coeff * lamv[0]
            psi_g = geo.gauge_transform(
                psi, alpha,
                alpha_grad=lambda lv, rho: 2 * coeff * lv[0] if rho == 0 else 0.0,
            )
            engine_g = geo.GeometryEngine(psi_g, model.metric, domain, cfg,
                                          in_domain=model.in_domain)
            tensors_g = engine_g.qgt(lamv, n)
            checks["gauge_invariance"] = max(
                checks["gauge_invariance"],
                float(np.max(np.abs(tensors_g.qmt - tensors.qmt))),
                float(np.max(np.abs(tensors_g.berry_curvature
                                    - tensors.berry_curvature))))
            checks["connection_shift"] = max(
                checks["connection_shift"],
                float(np.max(np.abs(tensors_g.berry_connection
                                    - tensors.berry_connection - grad_alpha))))

            br = engine.bracket_set(lamv, n)
            checks["normalization_identity"] = max(
                checks["normalization_identity"],
                float(np.max(np.abs(2.0 * br["c"].real - 0.5 * br["s"]))))

            nrm, _ = engine.norm(lamv, n)
            checks["norm_deviation"] = max(checks["norm_deviation"],
                                           abs(nrm - 1.0))
    except EngineError as exc:
        _fail(3, type(exc).__name__, str(exc))

    tolerances = {"route_equivalence": route_tol, "gauge_invariance": 1e-7,
                  "connection_shift": 1e-8, "normalization_identity": 1e-7,
                  "norm_deviation": 1e-6}
    report = {
        "model": model.name,
        "points": [dict(zip(model.parameter_names, map(float, p)))
                   for p in points],
        "checks": {
            name: {"max_deviation": dev, "tolerance": tolerances[name],
                   "pass": bool(dev <= tolerances[name])}
            for name, dev in checks.items()
        },
    }
    report["pass"] = all(c["pass"] for c in report["checks"].values())
    _emit([json.dumps(report, sort_keys=True)], out)
    if not report["pass"]:
        failing = [k for k, v in report["checks"].items() if not v["pass"]]
        sys.stderr.write(f"validation failed: {', '.join(failing)}\n")
        raise SystemExit(1)


@main.command("spectrum")
@common_options
@click.option("--k", type=int, default=4, show_default=True,
              help="number of levels")
@click.option("--grid-size", type=int, default=2000, show_default=True)
@click.pass_context
def cmd_spectrum(ctx, model_name, hbar, fmt, out, config_path, jobs,
                 quad_rel_tol, fd_step, k, grid_size, **param_flags):
    """Lowest k levels of the curved-space operator: (n, E_n, residual)."""
    config = _load_config(config_path)
    model_name = _cfg_value(ctx, config, "model_name", model_name) or config.get("model")
    hbar = float(_cfg_value(ctx, config, "hbar", hbar))
    fmt = _cfg_value(ctx, config, "fmt", fmt) or config.get("format") or "csv"
    model = _get_model(model_name, hbar)
    flags = {name: param_flags.get(f"p_{name}") for name in _PARAM_FLAGS}
    lamv = _collect_params(model, flags, config)
    try:
        levels = spec.model_spectrum(model, lamv, k, n_points=grid_size)
    except EngineError as exc:
        _fail(3, type(exc).__name__, str(exc))
    if fmt == "jsonl":
        lines = [json.dumps({"n": i, "energy": e, "residual": r})
                 for i, (e, r) in enumerate(levels)]
    else:
        lines = ["n,energy,residual"]
        lines += [f"{i},{_fmt(e)},{_fmt(r)}" for i, (e, r) in enumerate(levels)]
    _emit(lines, out)


@main.command("phase-portrait")
@common_options
@click.option("--energy", "energies", multiple=True, type=float,
              help="level-set energies, repeatable")
@click.option("--levels", type=int, default=0,
              help="emit this many automatic energies 0.5, 1.0, ...")
@click.option("--samples", type=int, default=200, show_default=True)
@click.pass_context
def cmd_phase_portrait(ctx, model_name, hbar, fmt, out, config_path, jobs,
                       quad_rel_tol, fd_step, energies, levels, samples,
                       **param_flags):
    """Classical level sets of the exponential-metric system."""
    config = _load_config(config_path)
    fmt = _cfg_value(ctx, config, "fmt", fmt) or config.get("format") or "csv"
    omega = param_flags.get("p_omega")
    lam = param_flags.get("p_lambda")
    conf_params = config.get("params", {})
    omega = float(omega if omega is not None else conf_params.get("omega", 1.0))
    lam = float(lam if lam is not None else conf_params.get("lambda", 1.0))
    if lam == 0:
        raise click.UsageError("the phase portrait needs lambda != 0")

    e_list = list(energies) + [0.5 * (i + 1) for i in range(levels)]
    if not e_list:
        e_list = [1.0]

    records = []
    for e_val in e_list:
        if e_val <= 0:
            records.append({"energy": e_val, "points": [],
                            "note": "energy below the potential infimum"})
            continue
        x_turn = -math.log(2.0 * e_val / omega ** 2) / lam
        span = 2.0 * math.log(1e3) / abs(lam)
        xs = x_turn + np.sign(lam) * np.linspace(0.0, span, samples)
        expo = np.exp(-lam * xs)
        p_sq = 0.5 * lam * lam * expo * (e_val - 0.5 * omega ** 2 * expo)
        p_sq = np.maximum(p_sq, 0.0)
        p = np.sqrt(p_sq)
        loop_x = np.concatenate([xs, xs[::-1]])
        loop_p = np.concatenate([p, -p[::-1]])
        records.append({"energy": e_val,
                        "points": [[float(a), float(b)]
                                   for a, b in zip(loop_x, loop_p)]})

    if fmt == "jsonl":
        lines = [json.dumps(r, sort_keys=True) for r in records]
    else:
        lines = ["energy,x,p"]
        for r in records:
            for x_val, p_val in r["points"]:
                lines.append(f"{_fmt(r['energy'])},{_fmt(x_val)},{_fmt(p_val)}")
    _emit(lines, out)


if __name__ == "__main__":
    main()
