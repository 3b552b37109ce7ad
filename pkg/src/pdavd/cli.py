"""Config-driven experiment runner.

Subcommands
-----------
run
    Build the problem, solve for a saddle point, integrate, evaluate every
    diagnostic and write ``trajectory.csv``, ``constants.json``,
    ``checks.json`` and one SVG per requested plot.
sweep
    Repeat ``run`` over a grid of ``(alpha, theta)`` and write
    ``summary.csv`` plus one subdirectory per grid point.
compare-nesterov
    Run with a zero constraint operator and compare the multiplier with its
    closed form and the objective gap with the expected decay.
selftest
    Quadrature property test, oracle cross-checks and backend agreement.

Exit codes: 0 all requested checks pass, 1 a check failed, 2 configuration
or parameter error, 3 integration failure.

Configuration file
------------------
YAML or JSON (JSON is valid YAML).  All keys are flat except ``problem``::

    problem:                 # inline mapping, or a path to a file holding one
      kind: quadratic        # quadratic | logistic-smooth | random-qp | any registered kind
      Q: [[1, 0], [0, 1]]    # quadratic: Q and optional q
      q: [0, 0]
      A: [[1, 1]]            # row-major; omit for an unconstrained problem
      b: [1]
      blocks: [1, 1]         # optional block sizes (must sum to n)
      # random-qp: n, m, a_scale (the seed comes from the top-level key)
      # logistic-smooth: data, labels, reg
      # other registered kinds: every key except A, b, blocks is passed on
    alpha: 4                 # damping coefficient
    beta: 1                  # penalty weight
    theta: 0.45              # extrapolation coefficient
    t0: 1
    t_end: 1e4
    atol: 1e-12
    rtol: 1e-12
    samples: 200
    spacing: log             # log | linear
    mode: standard           # standard | strict (parameter validation)
    seed: 0                  # random-qp generation and random anchors
    x0: [0, 0]               # optional initial values (default zeros)
    lam0: [0]
    xdot0: [0, 0]
    lamdot0: [0]
    checks: [lyapunov, integrals, rates, kkt, nesterov]
    plots: [gap, objective, energy, velocity, kkt, phi]
    random_anchors: 10
    out: results             # output directory (overridden by --out)
    sweep_alpha: [3, 4]      # sweep: cartesian grid ...
    sweep_theta: [0.5, 0.45]
    sweep_points: [[3, 0.5], [4, 0.45]]   # ... or explicit points (take precedence)
    expected_invalid: [[2, 0.45]]         # sweep points allowed to fail validation

Numbers may be written in any form ``float()`` accepts (``1e4`` included).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import shutil
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from . import diagnostics as D
from . import oracle
from .dynamics import SolverParams, nesterov_lambda_closed_form, satisfied_mode, validate_params
from .errors import (
    ConfigError,
    DimensionError,
    IntegrationError,
    NoSaddlePointError,
    OracleError,
    ParameterError,
    PdavdError,
)
from .integrator import backend_name, integrate
from .problem import LinearMap, ProblemInstance, make_objective, random_qp
from .rates import default_window, fit_rate, little_o_check

__all__ = [
    "ExperimentConfig",
    "RunResult",
    "load_config",
    "run_experiment",
    "run_sweep",
    "compare_nesterov",
    "selftest",
    "write_outputs",
    "loglog_svg",
    "trajectory_csv",
    "main",
]

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_INTEGRATION = 0, 1, 2, 3
CHECK_GROUPS = ("lyapunov", "integrals", "rates", "kkt", "nesterov")
PLOTS = ("gap", "objective", "energy", "velocity", "kkt", "phi")
SLOPE_MAX = -1.9

QP2 = {"kind": "quadratic", "Q": [[1.0, 0.0], [0.0, 1.0]], "q": [0.0, 0.0], "A": [[1.0, 1.0]], "b": [1.0]}
NESTEROV_1D = {"kind": "quadratic", "Q": [[1.0]], "q": [0.0]}


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed experiment configuration; see the module docstring for keys."""

    problem: dict = field(default_factory=lambda: dict(QP2))
    alpha: float = 4.0
    beta: float = 1.0
    theta: float = 0.45
    t0: float = 1.0
    t_end: float = 1e4
    atol: float = 1e-12
    rtol: float = 1e-12
    samples: int = 200
    spacing: str = "log"
    mode: str = "standard"
    seed: int = 0
    x0: tuple | None = None
    lam0: tuple | None = None
    xdot0: tuple | None = None
    lamdot0: tuple | None = None
    checks: tuple = CHECK_GROUPS
    plots: tuple = PLOTS
    random_anchors: int = 10
    out: str | None = None
    sweep_alpha: tuple = ()
    sweep_theta: tuple = ()
    sweep_points: tuple = ()
    expected_invalid: tuple = ()

    def params(self) -> SolverParams:
        def arr(v):
            return None if v is None else np.array(v, dtype=float)

        return SolverParams(
            alpha=self.alpha, beta=self.beta, theta=self.theta, t0=self.t0, t_end=self.t_end,
            x0=arr(self.x0), lam0=arr(self.lam0), xdot0=arr(self.xdot0), lamdot0=arr(self.lamdot0),
            atol=self.atol, rtol=self.rtol, samples=self.samples, spacing=self.spacing,
        )

    def with_(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


_FLOAT_KEYS = ("alpha", "beta", "theta", "t0", "t_end", "atol", "rtol")
_INT_KEYS = ("samples", "seed", "random_anchors")
_VEC_KEYS = ("x0", "lam0", "xdot0", "lamdot0")


def _num(v, key):
    if isinstance(v, bool):
        raise ConfigError(f"{key}: expected a number, got {v!r}")
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {v!r}") from None


def _int(v, key):
    f = _num(v, key)
    if not f.is_integer():
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    return int(f)


def _floats(v, key):
    if not isinstance(v, (list, tuple)):
        raise ConfigError(f"{key}: expected a list of numbers")
    return tuple(_num(x, key) for x in v)


def _pairs(v, key):
    if not isinstance(v, (list, tuple)):
        raise ConfigError(f"{key}: expected a list of [alpha, theta] pairs")
    out = []
    for item in v:
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            raise ConfigError(f"{key}: expected [alpha, theta] pairs, got {item!r}")
        out.append((_num(item[0], key), _num(item[1], key)))
    return tuple(out)


def _names(v, key, allowed):
    if isinstance(v, str):
        v = [v]
    if not isinstance(v, (list, tuple)):
        raise ConfigError(f"{key}: expected a list")
    bad = [x for x in v if x not in allowed]
    if bad:
        raise ConfigError(f"{key}: unknown entries {bad}; allowed: {', '.join(allowed)}")
    return tuple(dict.fromkeys(v))


def _read_mapping(path: Path, what: str) -> dict:
    if not path.is_file():
        raise ConfigError(f"{what} file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def config_from_mapping(data: dict, base_dir: Path | None = None) -> ExperimentConfig:
    """Validate a raw mapping and build an :class:`ExperimentConfig`.

    Raises
    ------
    ConfigError
        Unknown key, wrong type, or a problem file that does not exist.
    """
    base_dir = Path(".") if base_dir is None else Path(base_dir)
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(map(str, unknown))}")
    kw = {}
    for k, v in data.items():
        if k == "problem":
            if isinstance(v, str):
                path = Path(v) if os.path.isabs(v) else base_dir / v
                v = _read_mapping(path, "problem")
            if not isinstance(v, dict):
                raise ConfigError("problem: expected a mapping or a file path")
            kw[k] = dict(v)
        elif k in _FLOAT_KEYS:
            kw[k] = _num(v, k)
        elif k in _INT_KEYS:
            kw[k] = _int(v, k)
        elif k in _VEC_KEYS:
            kw[k] = None if v is None else _floats(v, k)
        elif k in ("sweep_alpha", "sweep_theta"):
            kw[k] = _floats(v, k)
        elif k in ("sweep_points", "expected_invalid"):
            kw[k] = _pairs(v, k)
        elif k == "checks":
            kw[k] = _names(v, k, CHECK_GROUPS)
        elif k == "plots":
            kw[k] = _names(v, k, PLOTS)
        elif k == "spacing":
            if v not in ("log", "linear"):
                raise ConfigError("spacing: expected 'log' or 'linear'")
            kw[k] = v
        elif k == "mode":
            if v not in ("standard", "strict"):
                raise ConfigError("mode: expected 'standard' or 'strict'")
            kw[k] = v
        elif k == "out":
            kw[k] = None if v is None else str(v)
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    """Read a YAML/JSON configuration file."""
    path = Path(path)
    return config_from_mapping(_read_mapping(path, "configuration"), path.parent)


def _matrix(v, key):
    try:
        a = np.array(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"problem.{key}: expected a numeric array") from None
    return a


def build_problem(spec: dict, seed: int = 0) -> ProblemInstance:
    """Instantiate the problem described by a ``problem`` mapping."""
    spec = dict(spec)
    kind = spec.pop("kind", "quadratic")
    blocks = spec.pop("blocks", None)
    if kind == "random-qp":
        extra = set(spec) - {"n", "m", "a_scale"}
        if extra:
            raise ConfigError(f"problem: unknown random-qp keys {sorted(extra)}")
        p = random_qp(seed, _int(spec.get("n", 20), "n"), _int(spec.get("m", 5), "m"), _num(spec.get("a_scale", 1.0), "a_scale"))
        return p if blocks is None else replace(p, blocks=tuple(blocks))
    A = spec.pop("A", None)
    b = spec.pop("b", None)
    args = {k: (_matrix(v, k) if isinstance(v, (list, tuple)) else v) for k, v in spec.items()}
    try:
        obj = make_objective(kind, **args)
    except TypeError as exc:
        raise ConfigError(f"problem: bad arguments for kind {kind!r}: {exc}") from None
    n = obj.n
    if A is None:
        if b not in (None, []):
            raise ConfigError("problem: b given without A")
        A, b = np.zeros((0, n)), np.zeros(0)
    else:
        A = _matrix(A, "A")
        if A.size == 0:
            A = A.reshape(0, n)
        b = np.zeros(A.shape[0] if A.ndim == 2 else 1) if b is None else _matrix(b, "b")
    return ProblemInstance(obj, LinearMap(A, cols=n), b, blocks=None if blocks is None else tuple(blocks))


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


def _slope_check(name, claim, t, values, window):
    try:
        fit = fit_rate(t, values, window)
    except ParameterError as exc:
        return D.CheckResult(name, claim, "skip", note=f"series vanishes: {exc}"), None
    ok = fit.slope <= SLOPE_MAX
    note = f"slope {fit.slope:.4f} ({fit.variant}, r2 {fit.r2:.3f}) over [{fit.t_lo:.4g}, {fit.t_hi:.4g}]"
    return D.CheckResult(name, claim, "pass" if ok else "fail", SLOPE_MAX - fit.slope, -1, [] if ok else [-1], note), fit


def _rate_checks(p, params, traj, table, strict):
    t = traj.times
    w = default_window(t)
    out, fits = [], {}
    c, fits["gap_feas"] = _slope_check("gap_feas_slope", "Lagrangian gap plus feasibility decays like t^-2",
                                       t, table["lag_gap"] + table["feas"], w)
    out.append(c)
    c, fits["feas"] = _slope_check("feas_slope", "feasibility decays like t^-2", t, table["feas"], w)
    out.append(c)
    verdicts = {}
    specs = (
        ("velocity_big_o", "t |vel| stays bounded", "velnorm", 1.0, "big_o"),
        ("kkt_grad_little_o", "sqrt(t) |grad f - grad f*| tends to zero", "kkt_split_grad", 0.5, "little_o"),
        ("kkt_alam_little_o", "sqrt(t) |A^T(lam - lam*)| tends to zero", "kkt_split_alam", 0.5, "little_o"),
    )
    for name, claim, key, pw, attr in specs:
        if not strict:
            out.append(D.CheckResult(name, claim, "skip", note="needs strict parameters"))
            continue
        try:
            v = little_o_check(t, table[key], pw, w)
        except ParameterError as exc:
            out.append(D.CheckResult(name, claim, "skip", note=f"series vanishes: {exc}"))
            continue
        verdicts[name] = v
        ok = getattr(v, attr)
        note = f"g start {v.g_start:.3e}, end {v.g_end:.3e}, last-decade slope {v.last_decade_slope:.3f}"
        out.append(D.CheckResult(name, claim, "pass" if ok else "fail", note=note))
    if strict:
        out.extend(D.convergence_check(traj, table))
    else:
        for name in ("phi_limit", "trajectory_limit"):
            out.append(D.CheckResult(name, "settles over the last decade", "skip", note="needs strict parameters"))
    return out, fits, verdicts


def _kkt_checks(p, params, traj, table, C):
    t = traj.times
    lhs = table["r_x"]
    rhs = table["kkt_split_grad"] + table["kkt_split_alam"]
    out = [D._check("kkt_triangle", "r_x <= |grad f - grad f*| + |A^T(lam - lam*)|", lhs, rhs,
                    D.REL_SLACK * (1.0 + rhs))]
    bound = C.C_bnd / (params.theta**2 * t**2)
    out.append(D._check("kkt_feasibility", "r_lambda <= C_bnd/(theta t)^2", table["r_lambda"], bound,
                        D.REL_SLACK * (1.0 + bound)))
    return out


def _tail_note(ir):
    if not ir.required:
        return "no integral is known to be finite for these parameters"
    k = max(ir.required, key=ir.tail_fraction.get)
    return f"largest required tail fraction {ir.tail_fraction[k]:.3e} ({k})"


def _zero_constraint(p):
    return p.m > 0 and not np.any(p.A) and not np.any(p.b)


def _nesterov_checks(p, params, traj, table, strict):
    if not _zero_constraint(p):
        return [D.CheckResult("nesterov_lambda", "multiplier follows its closed form", "skip",
                              note="constraint operator is not zero")]
    lam_cf = nesterov_lambda_closed_form(params, traj.times, traj.lam[0], traj.lamdot[0])
    err = np.abs(traj.lam - lam_cf)
    tol = 1e-6 * np.abs(lam_cf) + 1e-12 * (1.0 + np.abs(traj.lam[0]))
    bad = np.flatnonzero(np.any(err > tol, axis=1))
    rel = float(np.max(err / np.maximum(np.abs(lam_cf), 1e-300))) if lam_cf.size else 0.0
    out = [D.CheckResult("nesterov_lambda", "multiplier matches the closed form to 1e-6 relative",
                         "fail" if bad.size else "pass", -1.0 if bad.size else 0.0, int(bad[0]) if bad.size else -1,
                         [int(i) for i in bad], f"max relative error {rel:.3e}")]
    c, _ = _slope_check("nesterov_fgap_slope", "objective gap decays at least like t^-2 (envelope)",
                        traj.times, table["fgap"], default_window(traj.times))
    out.append(c)
    return out


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    """Everything a run produced, before anything is written to disk."""

    exit_code: int
    files: dict
    report: dict
    message: str = ""


def _clean(obj):
    """JSON-safe copy with non-finite floats as strings and arrays as lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else ("nan" if math.isnan(f) else ("inf" if f > 0 else "-inf"))
    return obj


def _json_bytes(obj) -> bytes:
    return (json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n").encode()


def trajectory_csv(traj, table) -> bytes:
    """CSV text: ``t``, states, velocities, then :data:`pdavd.diagnostics.SAMPLE_COLUMNS`.

    The column count is ``1 + 2n + 2m + 11``.
    """
    n, m = traj.x.shape[1], traj.lam.shape[1]
    header = (
        ["t"] + [f"x{i + 1}" for i in range(n)] + [f"lambda{i + 1}" for i in range(m)]
        + [f"xdot{i + 1}" for i in range(n)] + [f"lambdadot{i + 1}" for i in range(m)] + list(D.SAMPLE_COLUMNS)
    )
    cols = np.column_stack(
        [traj.times, traj.x, traj.lam, traj.xdot, traj.lamdot] + [table[k] for k in D.SAMPLE_COLUMNS]
    )
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in cols:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue().encode()


def _plots(cfg, traj, table, C, params):
    t = traj.times
    bound = C.C_bnd / (params.theta**2 * t**2)
    spec = {
        "gap": ("Lagrangian gap and feasibility", [("gap + feasibility", table["lag_gap"] + table["feas"]),
                                                   ("feasibility", table["feas"]), ("C_bnd/(theta t)^2", bound)]),
        "objective": ("Objective gap |f - f*|", [("|f - f*|", np.abs(table["fgap"])),
                                                 ("(1+|lam*|) C_bnd/(theta t)^2", (1 + C.lambda_star_norm) * bound)]),
        "energy": ("Energy", [("E", table["E"]), ("W", table["W"])]),
        "velocity": ("Velocity", [("|vel|", table["velnorm"]), ("t |vel|", t * table["velnorm"])]),
        "kkt": ("KKT residuals", [("r_x", table["r_x"]), ("r_lambda", table["r_lambda"]),
                                  ("|grad f - grad f*|", table["kkt_split_grad"]),
                                  ("|A^T(lam - lam*)|", table["kkt_split_alam"])]),
        "phi": ("Half squared distance to the saddle point", [("phi", table["phi"])]),
    }
    files = {}
    for name in cfg.plots:
        title, series = spec[name]
        files[f"{name}.svg"] = loglog_svg(title, t, series).encode()
    return files


def run_experiment(cfg: ExperimentConfig, strict: bool | None = None) -> RunResult:
    """Run one experiment in memory.

    Returns
    -------
    RunResult
        ``files`` maps output names to bytes; nothing is written here.
    """
    mode = "strict" if strict else cfg.mode
    try:
        params = cfg.params()
        validate_params(params, mode)
        p = build_problem(cfg.problem, cfg.seed)
        saddle = oracle.find_saddle(p)
    except (ConfigError, ParameterError, DimensionError, NoSaddlePointError, OracleError) as exc:
        return RunResult(EXIT_CONFIG, {}, {"error": str(exc)}, f"configuration error: {exc}")
    try:
        traj = integrate(p, params)
    except IntegrationError as exc:
        return RunResult(EXIT_INTEGRATION, {}, {"error": str(exc), "stats": exc.stats}, f"integration failure: {exc}")
    except (ParameterError, DimensionError) as exc:
        return RunResult(EXIT_CONFIG, {}, {"error": str(exc)}, f"configuration error: {exc}")

    table = D.sample_table(p, params, traj, saddle)
    C = D.constants(p, params, traj.state(0), saddle)
    sat = satisfied_mode(params)
    strict_ok = sat == "strict"
    groups = {}
    extras = {}
    if "lyapunov" in cfg.checks:
        rep = D.lyapunov_report(p, params, traj, saddle, table, cfg.random_anchors, cfg.seed)
        groups["lyapunov"] = rep.checks
    if "integrals" in cfg.checks:
        ir = D.cumulative_integrals(p, params, traj, saddle, table)
        extras["integrals"] = ir.as_dict()
        groups["integrals"] = [D.CheckResult("integrals", "cumulative integrals plateau and respect their bounds",
                                             "pass" if ir.passed else "fail",
                                             note=_tail_note(ir))]
    checks, fits, verdicts = _rate_checks(p, params, traj, table, strict_ok)
    extras["rate_fits"] = {k: (None if f is None else f.as_dict()) for k, f in fits.items()}
    if "rates" in cfg.checks:
        groups["rates"] = checks
        extras["rate_verdicts"] = {k: v.as_dict() for k, v in verdicts.items()}
    if "kkt" in cfg.checks:
        groups["kkt"] = _kkt_checks(p, params, traj, table, C)
    if "nesterov" in cfg.checks:
        groups["nesterov"] = _nesterov_checks(p, params, traj, table, strict_ok)

    all_checks = [c for cs in groups.values() for c in cs]
    passed = all(c.passed for c in all_checks)
    checks_doc = {
        "passed": passed,
        "mode_requested": mode,
        "mode_satisfied": sat,
        "groups": {g: {"passed": all(c.passed for c in cs), "checks": [c.as_dict() for c in cs]} for g, cs in groups.items()},
        **extras,
    }
    constants_doc = {
        "constants": C.as_dict(),
        "saddle": {"x_star": saddle.x_star, "lambda_star": saddle.lambda_star, "f_star": saddle.f_star,
                   "residual": saddle.residual},
        "params": {"alpha": params.alpha, "beta": params.beta, "theta": params.theta, "t0": params.t0,
                   "t_end": params.t_end, "atol": params.atol, "rtol": params.rtol, "samples": params.samples,
                   "spacing": params.spacing, "seed": cfg.seed},
        "problem": {"n": p.n, "m": p.m, "lipschitz": p.lipschitz, "norm_A": p.norm_A, "blocks": p.blocks},
        "integration": {k: traj.stats[k] for k in ("naccept", "nreject", "nfev")},
    }
    files = {
        "trajectory.csv": trajectory_csv(traj, table),
        "constants.json": _json_bytes(constants_doc),
        "checks.json": _json_bytes(checks_doc),
    }
    files.update(_plots(cfg, traj, table, C, params))
    lines = [f"{'PASS' if c.passed else 'FAIL'} {c.status:4s} {g}/{c.name} {c.note}".rstrip()
             for g, cs in groups.items() for c in cs]
    rep = {"checks": checks_doc, "constants": constants_doc, "table": table, "fits": extras.get("rate_fits")}
    return RunResult(EXIT_OK if passed else EXIT_CHECK, files, rep, "\n".join(lines))


def write_outputs(out_dir, files: dict) -> None:
    """Write ``files`` into ``out_dir`` via a temporary directory and renames.

    Either every file is moved into place or, if writing fails, none is.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".partial-", dir=out))
    try:
        for name, data in files.items():
            (tmp / name).write_bytes(data)
        for name in files:
            os.replace(tmp / name, out / name)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def loglog_svg(title: str, t, series, width: int = 720, height: int = 460, guides: bool = True) -> str:
    """Log-log line plot as standalone SVG text.

    Parameters
    ----------
    title : str
    t : array_like
        Shared abscissa, positive.
    series : list of (label, values)
        Nonpositive values are left out of each polyline.
    guides : bool
        Draw slope -1 and -2 reference lines through the first point of the
        first series.
    """
    t = np.asarray(t, dtype=float)
    ml, mr, mt, mb = 70, 190, 40, 50
    pw, ph = width - ml - mr, height - mt - mb
    pos = [np.asarray(v, dtype=float) for _, v in series]
    allv = np.concatenate([v[(v > 0) & np.isfinite(v)] for v in pos] + [np.array([])])
    x_lo, x_hi = math.floor(math.log10(t.min())), math.ceil(math.log10(t.max()))
    if x_hi == x_lo:
        x_hi += 1
    if allv.size:
        y_lo, y_hi = math.floor(math.log10(allv.min())), math.ceil(math.log10(allv.max()))
    else:
        y_lo, y_hi = -1, 0
    if y_hi == y_lo:
        y_hi += 1

    def X(v):
        return ml + (math.log10(v) - x_lo) / (x_hi - x_lo) * pw

    def Y(v):
        return mt + (y_hi - math.log10(v)) / (y_hi - y_lo) * ph

    o = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<defs><clipPath id="plot"><rect x="{ml}" y="{mt}" width="{pw}" height="{ph}"/></clipPath></defs>',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{ml + pw / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{_esc(title)}</text>',
    ]
    ystep = max(1, math.ceil((y_hi - y_lo) / 12))
    for k in range(x_lo, x_hi + 1):
        x = X(10.0**k)
        o.append(f'<line x1="{x:.2f}" y1="{mt}" x2="{x:.2f}" y2="{mt + ph}" stroke="#ddd"/>')
        o.append(f'<text x="{x:.2f}" y="{mt + ph + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">1e{k}</text>')
    for k in range(y_lo, y_hi + 1):
        y = Y(10.0**k)
        o.append(f'<line x1="{ml}" y1="{y:.2f}" x2="{ml + pw}" y2="{y:.2f}" stroke="#ddd"/>')
        if (k - y_lo) % ystep == 0:
            o.append(f'<text x="{ml - 6}" y="{y + 4:.2f}" text-anchor="end" font-family="sans-serif" font-size="11">1e{k}</text>')
    o.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    o.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">t</text>')

    legend = []
    if guides and pos and np.any(pos[0] > 0):
        i0 = int(np.flatnonzero(pos[0] > 0)[0])
        ta, va = t[i0], pos[0][i0]
        for k, dash in ((1, "6,4"), (2, "2,3")):
            tb = t[-1]
            vb = va * (tb / ta) ** (-k)
            o.append(
                f'<line x1="{X(ta):.2f}" y1="{Y(va):.2f}" x2="{X(tb):.2f}" y2="{Y(vb):.2f}" stroke="#777" '
                f'stroke-dasharray="{dash}" clip-path="url(#plot)"/>'
            )
            legend.append((f"slope -{k}", "#777", dash))
    for j, ((label, _), v) in enumerate(zip(series, pos)):
        color = _COLORS[j % len(_COLORS)]
        ok = (v > 0) & np.isfinite(v)
        pts = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in zip(t[ok], v[ok]))
        if pts:
            o.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}" clip-path="url(#plot)"/>')
        legend.append((label, color, None))
    for j, (label, color, dash) in enumerate(legend):
        y = mt + 14 + 18 * j
        d = f' stroke-dasharray="{dash}"' if dash else ""
        o.append(f'<line x1="{ml + pw + 12}" y1="{y}" x2="{ml + pw + 36}" y2="{y}" stroke="{color}" stroke-width="2"{d}/>')
        o.append(f'<text x="{ml + pw + 42}" y="{y + 4}" font-family="sans-serif" font-size="11">{_esc(label)}</text>')
    o.append("</svg>")
    return "\n".join(o) + "\n"


def _esc(s):
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _threads() -> int:
    raw = os.environ.get("PDAVD_THREADS")
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        k = int(raw)
    except ValueError:
        raise ConfigError(f"PDAVD_THREADS must be a positive integer, got {raw!r}") from None
    if k < 1:
        raise ConfigError(f"PDAVD_THREADS must be a positive integer, got {raw!r}")
    return k


def _grid(cfg):
    if cfg.sweep_points:
        return list(cfg.sweep_points)
    if not cfg.sweep_alpha or not cfg.sweep_theta:
        raise ConfigError("sweep needs sweep_points or both sweep_alpha and sweep_theta")
    return [(a, t) for a in cfg.sweep_alpha for t in cfg.sweep_theta]


SUMMARY_COLUMNS = ("index", "alpha", "theta", "mode", "status", "exit_code", "gap_slope", "feas_slope",
                   "checks_passed", "checks_failed", "checks_skipped", "directory")


def run_sweep(cfg: ExperimentConfig, strict: bool | None = None, threads: int | None = None):
    """Run every grid point; returns ``(exit_code, rows, results)``.

    Grid points that fail validation are marked ``expected-invalid`` when
    listed in ``expected_invalid`` and ``invalid`` otherwise; the sweep goes
    on either way.  The exit code is 2 if any unlisted point is invalid,
    else 3 if any integration failed, else 1 if any check failed, else 0.
    """
    grid = _grid(cfg)
    threads = _threads() if threads is None else threads
    expected = {(float(a), float(t)) for a, t in cfg.expected_invalid}

    def one(item):
        i, (a, th) = item
        return run_experiment(cfg.with_(alpha=a, theta=th), strict)

    with ThreadPoolExecutor(max_workers=max(1, min(threads, len(grid)))) as ex:
        results = list(ex.map(one, enumerate(grid)))
    rows = []
    for i, ((a, th), res) in enumerate(zip(grid, results)):
        d = f"point_{i:03d}"
        sat = satisfied_mode(SolverParams(alpha=a, theta=th, beta=cfg.beta))
        if res.exit_code == EXIT_CONFIG:
            status = "expected-invalid" if (a, th) in expected else "invalid"
        else:
            status = {EXIT_OK: "pass", EXIT_CHECK: "fail", EXIT_INTEGRATION: "integration-failure"}[res.exit_code]
        checks = [] if res.exit_code in (EXIT_CONFIG, EXIT_INTEGRATION) else [
            c for g in res.report["checks"]["groups"].values() for c in g["checks"]]
        fits = (res.report.get("fits") or {}) if res.exit_code in (EXIT_OK, EXIT_CHECK) else {}

        def slope(k):
            f = fits.get(k)
            return "" if not f else repr(float(f["slope"]))

        rows.append({
            "index": i, "alpha": repr(a), "theta": repr(th), "mode": sat or "invalid", "status": status,
            "exit_code": res.exit_code, "gap_slope": slope("gap_feas"), "feas_slope": slope("feas"),
            "checks_passed": sum(c["status"] == "pass" for c in checks),
            "checks_failed": sum(c["status"] == "fail" for c in checks),
            "checks_skipped": sum(c["status"] == "skip" for c in checks),
            "directory": d if res.files else "",
        })
    codes = [r["exit_code"] for r in rows]
    if any(r["status"] == "invalid" for r in rows):
        code = EXIT_CONFIG
    elif EXIT_INTEGRATION in codes:
        code = EXIT_INTEGRATION
    elif EXIT_CHECK in codes:
        code = EXIT_CHECK
    else:
        code = EXIT_OK
    return code, rows, results


def summary_csv(rows) -> bytes:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue().encode()


# ---------------------------------------------------------------------------
# Nesterov comparison
# ---------------------------------------------------------------------------


def nesterov_config(cfg: ExperimentConfig) -> ExperimentConfig:
    """Adapt ``cfg`` for the zero-constraint comparison.

    An absent constraint becomes a single zero row with ``b = 0`` so that a
    multiplier exists; a nonzero constraint is a configuration error.  The
    multiplier velocity defaults to ones.
    """
    spec = dict(cfg.problem)
    if spec.get("kind") == "random-qp":
        raise ConfigError("compare-nesterov needs a problem with a zero constraint")
    A = spec.get("A")
    if A is None or np.asarray(A, dtype=float).size == 0:
        p = build_problem({**spec, "A": None, "b": None})
        spec["A"] = [[0.0] * p.n]
        spec["b"] = [0.0]
    else:
        A = _matrix(A, "A")
        b = _matrix(spec.get("b", np.zeros(A.shape[0])), "b")
        if np.any(A) or np.any(b):
            raise ConfigError("compare-nesterov requires A = 0 and b = 0")
    m = build_problem(spec).m
    kw = {"problem": spec}
    if cfg.lamdot0 is None:
        kw["lamdot0"] = tuple([1.0] * m)
    checks = tuple(dict.fromkeys(cfg.checks + ("nesterov", "rates")))
    kw["checks"] = checks
    return cfg.with_(**kw)


def compare_nesterov(cfg: ExperimentConfig, strict: bool | None = None) -> RunResult:
    """Zero-constraint run; the report carries the closed-form and slope checks.

    For ``alpha > 3`` the summary also carries the trajectory-limit
    surrogates from the ``rates`` group (they need strict parameters).
    """
    try:
        cfg = nesterov_config(cfg)
    except (ConfigError, ParameterError, DimensionError) as exc:
        return RunResult(EXIT_CONFIG, {}, {"error": str(exc)}, f"configuration error: {exc}")
    res = run_experiment(cfg, strict)
    if res.exit_code not in (EXIT_OK, EXIT_CHECK):
        return res
    groups = res.report["checks"]["groups"]
    summary = {
        "lambda_closed_form": next(c for c in groups["nesterov"]["checks"] if c["name"] == "nesterov_lambda"),
        "objective_gap_slope": next(c for c in groups["nesterov"]["checks"] if c["name"] == "nesterov_fgap_slope"),
    }
    if cfg.alpha > 3:
        conv = [c for c in groups.get("rates", {"checks": []})["checks"] if c["name"] in ("phi_limit", "trajectory_limit")]
        summary["trajectory_convergence"] = conv
    doc = json.loads(res.files["checks.json"])
    doc["nesterov_summary"] = summary
    res.files["checks.json"] = _json_bytes(doc)
    return RunResult(res.exit_code, res.files, res.report, res.message)


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------


def selftest() -> tuple[int, list]:
    """Quadrature property test, oracle cross-checks and backend agreement.

    Returns
    -------
    (exit_code, records)
        Each record is ``{"name", "passed", "detail"}``.
    """
    rec = []

    def add(name, ok, detail):
        rec.append({"name": name, "passed": bool(ok), "detail": detail})

    q = D.quadrature_selftest(2.0, 1.0, lambda s: 1.0, 10.0)
    exact = (9.0 - 0.9) / 2.0  # int_1^10 t^-2 (t^2 - 1)/2 dt
    add("quadrature_h_const", q.passed and abs(q.lhs - exact) <= 1e-10 and abs(q.rhs - 9.0) <= 1e-10,
        f"lhs {q.lhs:.12g} (exact {exact:.12g}), rhs {q.rhs:.12g}")
    for seed in (1, 2):
        h, knots = D.spline_sample(seed, 1.0, 10.0)
        q = D.quadrature_selftest(3.0, 1.0, h, 10.0, knots)
        add(f"quadrature_spline_{seed}", q.passed, f"margin {q.margin:.6g}")

    qp2 = build_problem(QP2)
    s = oracle.solve_kkt_qp(qp2)
    add("oracle_qp2", np.allclose(s.x_star, [0.5, 0.5], atol=1e-12) and abs(s.lambda_star[0] + 0.5) < 1e-12
        and abs(s.f_star - 0.25) < 1e-12, f"x* {s.x_star.tolist()}, lam* {s.lambda_star.tolist()}, f* {s.f_star}")
    one = build_problem({"kind": "quadratic", "Q": [[1.0]], "A": [[1.0]], "b": [1.0]})
    s = oracle.solve_kkt_qp(one)
    add("oracle_1d", abs(s.x_star[0] - 1) < 1e-12 and abs(s.lambda_star[0] + 1) < 1e-12 and abs(s.f_star - 0.5) < 1e-12,
        f"x* {s.x_star[0]}, lam* {s.lambda_star[0]}")
    unc = build_problem({"kind": "quadratic", "Q": [[1.0, 0.0], [0.0, 1.0]], "q": [-1.0, -2.0]})
    s = oracle.solve_kkt_qp(unc)
    add("oracle_unconstrained", np.allclose(s.x_star, [1, 2], atol=1e-12) and abs(s.f_star + 2.5) < 1e-12,
        f"x* {s.x_star.tolist()}, f* {s.f_star}")
    rq = random_qp(0, a_scale=1.0)
    s1, s2 = oracle.solve_kkt_qp(rq), oracle.solve_kkt_newton(rq)
    dx = float(np.linalg.norm(s1.x_star - s2.x_star))
    add("oracle_qp_vs_newton", dx <= 1e-8, f"|x_qp - x_newton| {dx:.3e}")
    deg = build_problem({"kind": "quadratic", "Q": [[1.0, 0.0], [0.0, 1.0]], "A": [[1.0, 1.0], [1.0, 1.0]], "b": [1.0, 1.0]})
    xs = np.array([0.5, 0.5])
    a = oracle.SaddlePoint(xs, np.array([-0.5, 0.0]), 0.25, oracle.saddle_residual(deg, xs, [-0.5, 0.0]))
    b = oracle.SaddlePoint(xs, np.array([0.0, -0.5]), 0.25, oracle.saddle_residual(deg, xs, [0.0, -0.5]))
    r = oracle.check_solution_set_consistency(deg, a, b, 1e-10)
    add("oracle_solution_set", r.passed and r.grad_diff <= 1e-9 and r.adjoint_diff <= 1e-9,
        f"grad diff {r.grad_diff:.1e}, adjoint diff {r.adjoint_diff:.1e}, multiplier diff {r.lambda_diff:.3g}")
    if backend_name() == "compiled":
        prm = SolverParams(t_end=50.0, samples=20)
        t1 = integrate(qp2, prm)
        t2 = integrate(qp2, prm, backend="python")
        diff = float(max(np.max(np.abs(t1.x - t2.x)), np.max(np.abs(t1.lam - t2.lam))))
        add("backend_agreement", diff <= 1e-12 and t1.stats["naccept"] == t2.stats["naccept"],
            f"max difference {diff:.1e}, steps {t1.stats['naccept']} vs {t2.stats['naccept']}")
    else:
        add("backend_agreement", True, "compiled extension not built; skipped")
    return (EXIT_OK if all(r["passed"] for r in rec) else EXIT_CHECK), rec


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _parser():
    ap = argparse.ArgumentParser(prog="pdavd", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, hlp in (
        ("run", "integrate one configuration and write artifacts"),
        ("sweep", "run a grid over alpha and theta"),
        ("compare-nesterov", "zero-constraint run against the closed-form multiplier"),
        ("selftest", "quadrature and oracle self-checks"),
    ):
        sp = sub.add_parser(name, help=hlp)
        sp.add_argument("--config", metavar="PATH", help="YAML or JSON configuration file")
        sp.add_argument("--out", metavar="DIR", help="output directory")
        sp.add_argument("--seed", type=int, metavar="N", help="seed for random problems and anchors")
        sp.add_argument("--t-end", type=float, metavar="F", dest="t_end", help="final time")
        sp.add_argument("--samples", type=int, metavar="N", help="number of sample times")
        sp.add_argument("--strict", action="store_true", help="require the strict parameter assumption")
    return ap


def _resolve(args, default: ExperimentConfig) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else default
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.t_end is not None:
        kw["t_end"] = args.t_end
    if args.samples is not None:
        kw["samples"] = args.samples
    if args.out is not None:
        kw["out"] = args.out
    if args.strict:
        kw["mode"] = "strict"
    return cfg.with_(**kw)


def main(argv=None) -> int:
    """Command-line entry point; returns the exit code."""
    args = _parser().parse_args(argv)
    try:
        if args.command == "selftest":
            code, rec = selftest()
            for r in rec:
                print(f"{'PASS' if r['passed'] else 'FAIL'} {r['name']}: {r['detail']}")
            if args.out:
                write_outputs(args.out, {"selftest.json": _json_bytes({"passed": code == 0, "checks": rec})})
            return code
        if args.command == "compare-nesterov":
            default = ExperimentConfig(problem=dict(NESTEROV_1D), alpha=3.0, theta=0.5, x0=(1.0,))
        else:
            default = ExperimentConfig()
        cfg = _resolve(args, default)
    except PdavdError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.out or "pdavd-out")

    if args.command == "sweep":
        try:
            code, rows, results = run_sweep(cfg)
        except PdavdError as exc:
            print(f"configuration error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        files = {"summary.csv": summary_csv(rows)}
        for row, res in zip(rows, results):
            if res.files:
                write_outputs(out / row["directory"], res.files)
            if res.exit_code == EXIT_CONFIG:
                print(f"point {row['index']} (alpha={row['alpha']}, theta={row['theta']}): {row['status']}: "
                      f"{res.report.get('error', '')}")
            else:
                print(f"point {row['index']} (alpha={row['alpha']}, theta={row['theta']}): {row['status']}, "
                      f"mode {row['mode']}, gap slope {row['gap_slope'] or '-'}")
        write_outputs(out, files)
        return code

    t0 = time.perf_counter()
    res = compare_nesterov(cfg, args.strict) if args.command == "compare-nesterov" else run_experiment(cfg, args.strict)
    if res.exit_code in (EXIT_CONFIG, EXIT_INTEGRATION):
        print(res.message, file=sys.stderr)
        return res.exit_code
    write_outputs(out, res.files)
    print(res.message)
    print(f"{'all requested checks passed' if res.exit_code == EXIT_OK else 'some checks failed'}; "
          f"{len(res.files)} files in {out} ({time.perf_counter() - t0:.1f} s, {backend_name()} kernel)")
    return res.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
