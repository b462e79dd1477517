"""Command-line front end: ``python -m epkit <command> [options]``.

Commands
--------
spectrum   sweep one parameter, write the CSV, print classification transitions
ep         analytic EP branches and/or numeric EP search over a range
jordan     Jordan decomposition H Q = Q J at fixed parameters
metric     metric family (JSON basis dump) and optional positivity line
pseudo     F- or S-mode pseudospectrum on a grid (CSV)
classify   classification of one spectrum, or the interval table of a sweep
verify     verification checks with a pass/fail JSON report

A parameter given as ``min:max:steps`` (or ``min:max``) is the swept one.
``--config file.json`` supplies any field of :class:`RunConfig`; flags given
on the command line win.  Exit codes: 0 ok, 1 usage, 2 numerical failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import checks, ep, metric, numerics, spectra
from .models import REQUIRED, HamiltonianSpec, build, canonical_family, default_scan_parameter

SCHEMA = 1
COMMANDS = ("spectrum", "ep", "jordan", "metric", "pseudo", "classify", "verify")
MODEL_PARAMS = ("N", "A", "B", "z", "gamma", "g", "delta", "gamma1", "gamma2")
DEFAULT_STEPS = {"spectrum": 1000, "ep": 401, "classify": 1000}
TOLERANCES = {
    "class_tol": spectra.CLASS_TOL,
    "xtol": 1e-6,
    "rank_tol": numerics.DEFAULT_RANK_TOL,
    "cluster_tol": ep.CLUSTER_TOL,
    "defect_tol": ep.DEFECT_TOL,
    "refine_tol": 1e-13,
}

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    """Everything one CLI invocation needs; JSON round-trips exactly."""

    command: str = "spectrum"
    model: dict = field(default_factory=dict)
    scan: dict | None = None
    grid: dict | None = None
    tolerances: dict = field(default_factory=lambda: dict(TOLERANCES))
    options: dict = field(default_factory=dict)
    output: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise UsageError(f"unknown config keys {sorted(extra)}")
        cfg = cls(**d)
        cfg.tolerances = {**TOLERANCES, **(cfg.tolerances or {})}
        return cfg

    @classmethod
    def from_json(cls, s: str) -> "RunConfig":
        return cls.from_dict(json.loads(s))

    def spec(self) -> HamiltonianSpec:
        if "family" not in self.model:
            raise UsageError("no model given (use --model)")
        return HamiltonianSpec(self.model["family"], self.model.get("params", {}))


def parse_range(text: str, default_steps: int | None = None) -> dict:
    """``"lo:hi[:steps]"`` -> ``{"lo", "hi", "steps"}``."""
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise UsageError(f"range must be min:max or min:max:steps, got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
        steps = int(parts[2]) if len(parts) == 3 else default_steps
    except ValueError:
        raise UsageError(f"invalid range {text!r}") from None
    if not (math.isfinite(lo) and math.isfinite(hi)) or not hi > lo:
        raise UsageError(f"invalid range {text!r}: need finite min < max")
    if steps is not None and steps < 2:
        raise UsageError(f"range {text!r} needs at least 2 steps")
    return {"lo": lo, "hi": hi, "steps": steps}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


_HELP_TEXT = __doc__.replace("``", "").replace(":class:`RunConfig`", "RunConfig")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="epkit", description=_HELP_TEXT,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("command", nargs="?", choices=COMMANDS)
    p.add_argument("--config", help="JSON RunConfig; flags override its values")
    p.add_argument("--save-config", metavar="PATH", help="write the merged RunConfig and exit")
    m = p.add_argument_group("model")
    m.add_argument("--model", help="bose_hubbard (bh), gen4, gen5, two_guide, three_guide")
    for name in MODEL_PARAMS:
        m.add_argument(f"--{name}", metavar="X", help="value, or min:max[:steps] to sweep it")
    s = p.add_argument_group("ranges")
    s.add_argument("--scan", help="ep: range of the default scan parameter (z, gamma or g)")
    s.add_argument("--scan-g", dest="scan_g", help="ep: range of the coupling g")
    s.add_argument("--param", help="name of the swept parameter (overrides inference)")
    s.add_argument("--re", help="pseudo: real axis min:max:n")
    s.add_argument("--im", help="pseudo: imaginary axis min:max:n")
    t = p.add_argument_group("tolerances")
    for k, v in TOLERANCES.items():
        t.add_argument(f"--{k.replace('_', '-')}", dest=k, type=float, help=f"default {v:g}")
    o = p.add_argument_group("options")
    o.add_argument("--analytic", action="store_true", default=None, help="ep: print analytic branches")
    o.add_argument("--mode", choices=("F", "S", "f", "s"), help="pseudo: F (plain) or S (metric) norm")
    o.add_argument("--beta-line", dest="beta_line", help="metric: positivity along beta, min:max:samples")
    o.add_argument("--check", action="append", help=f"verify: one of {list(checks.CHECKS)}; repeatable")
    o.add_argument("--workers", type=int, help="threads for sweeps and grids (default 1)")
    o.add_argument("--out", "-o", dest="output", help="output file (CSV or JSON); default stdout")
    return p


def _merge(args: argparse.Namespace) -> RunConfig:
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = RunConfig.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
    else:
        cfg = RunConfig()
    if args.command:
        cfg.command = args.command
    model = {"family": cfg.model.get("family"), "params": dict(cfg.model.get("params", {}))}
    if args.model:
        model["family"] = canonical_family(args.model)
    swept = []
    for name in MODEL_PARAMS:
        v = getattr(args, name)
        if v is None:
            continue
        if ":" in v:
            swept.append((name, v))
            continue
        try:
            model["params"][name] = int(v) if name == "N" else float(v)
        except ValueError:
            raise UsageError(f"--{name} expects a number or range, got {v!r}") from None
    if model["family"] is not None:
        model["family"] = canonical_family(model["family"])
        if model["family"] == "two_guide":
            model["params"].setdefault("delta", 0.0)  # zero detuning unless given
        cfg.model = model
    elif model["params"]:
        raise UsageError("model parameters given without --model")
    steps = DEFAULT_STEPS.get(cfg.command)
    if len(swept) > 1:
        raise UsageError(f"only one parameter can be swept, got {[n for n, _ in swept]}")
    if swept:
        name, text = swept[0]
        cfg.scan = {"param": name, **parse_range(text, steps)}
    if args.scan:
        cfg.scan = {"param": None, **parse_range(args.scan, steps)}
    if args.scan_g:
        cfg.scan = {"param": "g", **parse_range(args.scan_g, steps)}
    if args.param:
        cfg.scan = {**(cfg.scan or {}), "param": args.param}
    if args.re or args.im:
        if not (args.re and args.im):
            raise UsageError("pseudo needs both --re and --im")
        cfg.grid = {"re": parse_range(args.re, 51), "im": parse_range(args.im, 51)}
    for k in TOLERANCES:
        if getattr(args, k) is not None:
            cfg.tolerances[k] = getattr(args, k)
    for k in ("analytic", "mode", "beta_line", "check", "workers"):
        if getattr(args, k) is not None:
            cfg.options[k] = getattr(args, k)
    if args.output:
        cfg.output = args.output
    return cfg


def _emit_json(cfg: RunConfig, payload: dict, out) -> None:
    text = json.dumps({"schema": SCHEMA, "command": cfg.command, **payload}, indent=2, default=_default)
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text + "\n")
    else:
        out.write(text + "\n")


def _default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _scan(cfg: RunConfig, spec: HamiltonianSpec, need_steps: bool = True):
    if not cfg.scan:
        raise UsageError(f"{cfg.command} needs a range (e.g. --z 0:100:2000)")
    s = cfg.scan
    param = s.get("param") or default_scan_parameter(spec)
    steps = s.get("steps") or DEFAULT_STEPS.get(cfg.command, 401)
    # placeholder so the swept parameter resolves during validation
    full = spec.with_params(**{param: s["lo"]})
    _check_params(full)
    return full, param, s["lo"], s["hi"], steps


def _check_params(spec: HamiltonianSpec) -> None:
    need = REQUIRED.get(spec.family, ("N",))
    missing = [k for k in need if k not in spec.params]
    if missing:
        raise UsageError(f"model {spec.family} is missing parameters {missing}")
    build(spec)


def cmd_spectrum(cfg: RunConfig, out) -> int:
    spec, param, lo, hi, steps = _scan(cfg, cfg.spec())
    tol = cfg.tolerances
    samples = spectra.sweep(spec, param, lo, hi, steps, tol["class_tol"], cfg.options.get("workers", 1))
    trans = spectra.find_transitions(spec, param, samples, tol["xtol"], tol["class_tol"])
    if cfg.output:
        spectra.write_csv(cfg.output, samples)
    else:
        import io

        buf = io.StringIO()
        _write_csv_stream(buf, samples)
        out.write(buf.getvalue())
    info = sys.stderr if not cfg.output else out
    rows = spectra.interval_table(trans, samples)
    for r in rows:
        print(f"{param} in [{r['from']:.9g}, {r['to']:.9g}]: {r['class']}", file=info)
    for t in trans:
        print(f"transition at {param} = {t.param_value:.9g}: {t.before} -> {t.after}", file=info)
    return EXIT_OK


def _write_csv_stream(fh, samples):
    import csv

    w = csv.writer(fh)
    w.writerow(spectra.csv_header(samples[0].energies.size))
    for s in samples:
        c = s.classification
        w.writerow([repr(s.param_value), *(repr(float(e.real)) for e in s.energies),
                    *(repr(float(e.imag)) for e in s.energies), c.n_real, c.n_imaginary, c.n_complex, c.n_zero])


def cmd_ep(cfg: RunConfig, out) -> int:
    payload: dict = {}
    family = cfg.model.get("family")
    if family is None:
        raise UsageError("ep needs --model")
    if cfg.options.get("analytic"):
        if family not in ep.EP_CONDITIONS:
            raise UsageError(f"analytic branches are only available for {sorted(ep.EP_CONDITIONS)}")
        payload["analytic"] = [b.to_dict() for b in ep.analytic_ep_branches(family)]
    if cfg.scan:
        spec, param, lo, hi, steps = _scan(cfg, cfg.spec())
        tol = cfg.tolerances
        recs = ep.detect_ep_numeric(spec, param, lo, hi, samples=steps, refine_tol=tol["refine_tol"],
                                    cluster_tol=tol["cluster_tol"], defect_tol=tol["defect_tol"],
                                    tol=tol["rank_tol"])
        payload["model"] = spec.to_dict()
        payload["scan"] = {"param": param, "lo": lo, "hi": hi, "samples": steps}
        payload["records"] = [r.to_dict() for r in recs]
    if not payload:
        raise UsageError("ep needs --analytic and/or a scan range")
    _emit_json(cfg, payload, out)
    return EXIT_OK


def _fixed_matrix(cfg: RunConfig):
    spec = cfg.spec()
    if cfg.scan:
        raise UsageError(f"{cfg.command} works at fixed parameters; remove the range")
    _check_params(spec)
    return spec, build(spec).matrix


def cmd_jordan(cfg: RunConfig, out) -> int:
    spec, H = _fixed_matrix(cfg)
    tol = cfg.tolerances
    clusters = ep.jordan_structure(H, tol["cluster_tol"], tol["rank_tol"])
    d = ep.jordan_decomposition(H, tol["cluster_tol"], tol["rank_tol"], clusters=clusters)
    rel = d.residual / (1 + numerics.inf_norm(H))
    _emit_json(cfg, {"model": spec.to_dict(), "partition": ep.full_partition(clusters),
                     "relative_residual": rel, **d.to_dict()}, out)
    return EXIT_OK


def cmd_metric(cfg: RunConfig, out) -> int:
    spec, H = _fixed_matrix(cfg)
    fam = metric.solve_metric_family(H)
    payload = {"model": spec.to_dict(), "family": fam.to_dict()}
    if fam.reference_point is not None:
        T = fam.reference_member()
        payload["reference_member"] = {"re": T.real.tolist(), "im": T.imag.tolist(),
                                       "eigenvalues": np.linalg.eigvalsh(T).tolist()}
    line = cfg.options.get("beta_line")
    if line:
        r = parse_range(line, 401)
        N = H.shape[0]
        if spec.family != "bose_hubbard" or N not in (2, 3):
            raise UsageError("--beta-line is defined for bose_hubbard N = 2 and N = 3")
        if N == 2:
            gamma = float(np.abs(H[0, 0]))
            origin, direction = metric.bh2_metric(0.0, gamma), metric.bh2_metric(1.0, 0.0) - np.eye(2)
        else:
            g = float(np.abs(H[0, 0]) / math.sqrt(2))
            origin = metric.bh3_metric(0.0, 0.0, g)
            direction = metric.bh3_metric(1.0, 0.0, g) - origin
        dom = metric.positivity_domain(fam, origin, direction, (r["lo"], r["hi"]), r["steps"])
        payload["beta_line"] = asdict(dom)
    _emit_json(cfg, payload, out)
    return EXIT_OK


def cmd_pseudo(cfg: RunConfig, out) -> int:
    spec, H = _fixed_matrix(cfg)
    if not cfg.grid:
        raise UsageError("pseudo needs --re and --im")
    g = cfg.grid
    grid = metric.Grid(g["re"]["lo"], g["re"]["hi"], g["im"]["lo"], g["im"]["hi"],
                       g["re"]["steps"], g["im"]["steps"])
    mode = cfg.options.get("mode", "F").upper()
    theta = None
    if mode == "S":
        fam = metric.solve_metric_family(H)
        if not fam.has_positive_member or fam.reference_point is None:
            raise metric.NotPositiveError("no positive definite metric for this model")
        theta = fam.reference_member()
    ps = metric.pseudospectrum(H, mode, theta, grid, cfg.options.get("workers", 1))
    if cfg.output:
        metric.write_pseudospectrum_csv(cfg.output, ps)
    else:
        out.write("re_lambda,im_lambda,sigma_min\n")
        for row in ps.rows():
            out.write(",".join(repr(v) for v in row) + "\n")
    return EXIT_OK


def cmd_classify(cfg: RunConfig, out) -> int:
    spec = cfg.spec()
    tol = cfg.tolerances
    if cfg.scan:
        spec, param, lo, hi, steps = _scan(cfg, spec)
        samples = spectra.sweep(spec, param, lo, hi, steps, tol["class_tol"], cfg.options.get("workers", 1))
        trans = spectra.find_transitions(spec, param, samples, tol["xtol"], tol["class_tol"])
        rows = [{"from": r["from"], "to": r["to"], "class": str(r["class"]),
                 "counts": dict(zip(("real", "imag", "complex", "zero"), r["class"].as_tuple()))}
                for r in spectra.interval_table(trans, samples)]
        payload = {"model": spec.to_dict(), "param": param, "intervals": rows,
                   "transitions": [t.param_value for t in trans]}
    else:
        _check_params(spec)
        E = numerics.eigenvalues(build(spec).matrix)
        c = spectra.classify(E, tol["class_tol"])
        payload = {"model": spec.to_dict(), "energies": [[e.real, e.imag] for e in E], "class": str(c),
                   "counts": dict(zip(("real", "imag", "complex", "zero"), c.as_tuple()))}
    _emit_json(cfg, payload, out)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out) -> int:
    results = checks.run_checks(cfg.options.get("check"))
    for r in results:
        print(r.line()[:200], file=sys.stderr)
    ok = all(r.passed for r in results)
    _emit_json(cfg, {"passed": ok, "checks": [r.to_dict() for r in results]}, out)
    return EXIT_OK if ok else EXIT_VERIFY


HANDLERS = {
    "spectrum": cmd_spectrum,
    "ep": cmd_ep,
    "jordan": cmd_jordan,
    "metric": cmd_metric,
    "pseudo": cmd_pseudo,
    "classify": cmd_classify,
    "verify": cmd_verify,
}


def _attach_negative_values(argv: list[str]) -> list[str]:
    """Rewrite ``--re -1:1:51`` as ``--re=-1:1:51`` so argparse takes it as a value."""
    out: list[str] = []
    for tok in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and re.match(r"^-[\d.]", tok):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_attach_negative_values(argv))
    try:
        cfg = _merge(args)
        if args.save_config:
            with open(args.save_config, "w") as fh:
                fh.write(cfg.to_json() + "\n")
            return EXIT_OK
        if cfg.command not in HANDLERS:
            raise UsageError(f"unknown command {cfg.command!r}")
        return HANDLERS[cfg.command](cfg, out)
    except (numerics.ConvergenceError, ep.ChainError, metric.MetricDegenerateError,
            metric.NotPositiveError) as exc:
        print(f"epkit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ValueError, KeyError) as exc:
        print(f"epkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"epkit: I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
