"""Batch command line: ``bekkvol describe|diagnose|fit|simulate``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 convergence failure.
Settings come from an INI config file (``--config``) overridden by flags;
``BEKKVOL_OUTPUT_DIR`` sets the default output directory.
"""
import argparse
import configparser
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from bekkvol import report
from bekkvol.diagnostics import DiagnosticError
from bekkvol.estimation import EstimationError, OptimizerSettings, fit_bekk
from bekkvol.garch import BekkParameters, FilterError, LikelihoodError, correlation_summary
from bekkvol.ingest import IngestError, IngestSettings, align, load_csv, to_returns, write_csv
from bekkvol.mean import MeanModelError, VarMeanParams, fit_ma1
from bekkvol.simulate import SimSpec, simulate_bekk

logger = logging.getLogger("bekkvol")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CONVERGENCE = 0, 1, 2, 3
DATA_ERRORS = (IngestError, DiagnosticError, MeanModelError, EstimationError, FilterError,
               LikelihoodError, OSError)


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    input: str = ""
    columns: list = field(default_factory=list)
    pairs: list = field(default_factory=list)
    ingest: IngestSettings = field(default_factory=IngestSettings)
    ma_filter: bool = True
    settings: OptimizerSettings = field(default_factory=OptimizerSettings)
    distribution: str = "gaussian"
    mean_mode: str = "joint"
    output_dir: str = "bekkvol_out"
    formats: list = field(default_factory=lambda: ["json", "csv", "text"])
    lags: int = 24
    acf_lags: int = 30
    adf_lags: int = 1
    adf_regression: str = "c"
    lilliefors: bool = False
    model: str = ""
    workers: int = 1

    def validate(self, need_pairs=False):
        if not self.input:
            raise UsageError("no input file given")
        if need_pairs and not self.pairs:
            raise UsageError("no pairs given (use --pairs A:B)")
        for a, b in self.pairs:
            if a == b:
                raise UsageError(f"pair {a}:{b} repeats a column")
        if len(set(map(tuple, self.pairs))) != len(self.pairs):
            raise UsageError("duplicate entries in pair list")
        bad = set(self.formats) - {"json", "csv", "text"}
        if bad:
            raise UsageError(f"unknown report format(s): {', '.join(sorted(bad))}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _bool(text):
    return str(text).strip().lower() in ("1", "true", "yes", "on")


def _split(text):
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _pairs(text):
    out = []
    for item in _split(text):
        if ":" not in item:
            raise UsageError(f"bad pair {item!r}; expected A:B")
        a, b = (s.strip() for s in item.split(":", 1))
        out.append([a, b])
    return out


def _common(p):
    p.add_argument("--config", help="INI config file")
    p.add_argument("--input", help="input CSV (date column first)")
    p.add_argument("--columns", help="comma-separated columns to use")
    p.add_argument("--kind", choices=["price", "return"], help="kind of every value column")
    p.add_argument("--return-units", choices=["percent", "decimal"])
    p.add_argument("--method", choices=["log", "simple"])
    p.add_argument("--scale", choices=["percent", "decimal"])
    p.add_argument("--align", choices=["intersect", "strict"])
    p.add_argument("--skip-bad-rows", action="store_true", default=None)
    p.add_argument("--output-dir")
    p.add_argument("--formats", help="comma list of json,csv,text")
    p.add_argument("-v", "--verbose", action="store_true")


def _estimation_flags(p):
    p.add_argument("--pairs", help="comma list of A:B pairs")
    p.add_argument("--ma-filter", dest="ma_filter", action="store_true", default=None)
    p.add_argument("--no-ma-filter", dest="ma_filter", action="store_false")
    p.add_argument("--distribution", choices=["gaussian", "student_t"])
    p.add_argument("--mean-mode", choices=["joint", "two_step"])
    p.add_argument("--restarts", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--gradient-tolerance", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--lilliefors", action="store_true", default=None)


def build_parser():
    p = _Parser(prog="bekkvol", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("describe", help="moments, correlation matrix and ACF tables")
    _common(d)
    d.add_argument("--acf-lags", type=int)

    g = sub.add_parser("diagnose", help="pre-fit tests and, with --model, post-fit tests")
    _common(g)
    g.add_argument("--pairs", help="pairs for the post-fit block (default: all in the model)")
    g.add_argument("--lags", type=int)
    g.add_argument("--adf-lags", type=int)
    g.add_argument("--adf-regression", choices=["c", "ct"])
    g.add_argument("--ma-filter", dest="ma_filter", action="store_true", default=None)
    g.add_argument("--no-ma-filter", dest="ma_filter", action="store_false")
    g.add_argument("--model", help="fit.json from `bekkvol fit`")
    g.add_argument("--post-fit", action="store_true", help="require the post-fit block")

    f = sub.add_parser("fit", help="VAR(1)-BEKK(1,1) fit per pair")
    _common(f)
    _estimation_flags(f)

    s = sub.add_parser("simulate", help="write a simulated dataset and its true parameters")
    s.add_argument("spec", help="INI simulation spec")
    s.add_argument("--output", help="CSV path (sidecar written next to it)")
    s.add_argument("--output-dir")
    s.add_argument("--seed", type=int)
    s.add_argument("-v", "--verbose", action="store_true")
    return p


def load_config(args):
    cfg = RunConfig(output_dir=os.environ.get("BEKKVOL_OUTPUT_DIR", "bekkvol_out"))
    ing = asdict(IngestSettings())
    opt = asdict(OptimizerSettings())

    if getattr(args, "config", None):
        cp = configparser.ConfigParser()
        try:
            found = cp.read(args.config, encoding="utf-8")
        except configparser.Error as exc:
            raise UsageError(f"bad config: {exc}") from None
        if not found:
            raise UsageError(f"cannot read config {args.config}")
        sec = lambda name: cp[name] if cp.has_section(name) else {}
        i = sec("input")
        base = Path(args.config).parent
        if "path" in i:
            cfg.input = str(base / i["path"])
        if "columns" in i:
            cfg.columns = _split(i["columns"])
        if "pairs" in i:
            cfg.pairs = _pairs(i["pairs"])
        if "kind" in i:
            ing["default_kind"] = i["kind"]
        for key, val in sec("ingest").items():
            ing[key] = _bool(val) if key == "skip_bad_rows" else val
        for key, val in sec("estimation").items():
            if key in ("distribution", "mean_mode"):
                setattr(cfg, key, val)
            elif key == "ma_filter":
                cfg.ma_filter = _bool(val)
            elif key == "workers":
                cfg.workers = int(val)
            elif key in opt:
                opt[key] = type(opt[key])(val)
            else:
                raise UsageError(f"unknown estimation setting {key!r}")
        for key, val in sec("diagnostics").items():
            if key in ("lags", "acf_lags", "adf_lags"):
                setattr(cfg, key, int(val))
            elif key == "adf_regression":
                cfg.adf_regression = val
            elif key == "lilliefors":
                cfg.lilliefors = _bool(val)
            else:
                raise UsageError(f"unknown diagnostics setting {key!r}")
        o = sec("output")
        if "dir" in o:
            cfg.output_dir = str(base / o["dir"])
        if "formats" in o:
            cfg.formats = _split(o["formats"])

    a = vars(args)
    if a.get("input"):
        cfg.input = a["input"]
    if a.get("columns"):
        cfg.columns = _split(a["columns"])
    if a.get("pairs"):
        cfg.pairs = _pairs(a["pairs"])
    if a.get("kind"):
        ing["default_kind"] = a["kind"]
    for key in ("return_units", "method", "scale", "align", "skip_bad_rows"):
        if a.get(key) is not None:
            ing[key] = a[key]
    for key in ("restarts", "seed", "max_iterations", "gradient_tolerance"):
        if a.get(key) is not None:
            opt[key] = a[key]
    for key in ("distribution", "mean_mode", "ma_filter", "lags", "acf_lags", "adf_lags",
                "adf_regression", "lilliefors", "model", "workers", "output_dir"):
        if a.get(key) is not None:
            setattr(cfg, key, a[key])
    if a.get("formats"):
        cfg.formats = _split(a["formats"])
    try:
        cfg.ingest = IngestSettings(**ing)
        cfg.settings = OptimizerSettings(**opt)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    return cfg


def _unique(names):
    """Suffix repeats (``X, X`` -> ``X, X#2``) so a column can be paired with itself."""
    seen, out = {}, []
    for n in names:
        seen[n] = seen.get(n, 0) + 1
        out.append(n if seen[n] == 1 else f"{n}#{seen[n]}")
    return out


def load_panel(cfg):
    """Ingest, convert and align the configured columns."""
    table = load_csv(cfg.input, cfg.ingest)
    series = to_returns(table, cfg.ingest.method, cfg.ingest.scale)
    names = cfg.columns or [s.name for s in series]
    if len(names) < 2:
        raise UsageError("need at least two series")
    by_name = {s.name: s for s in series}
    wanted = names + [c for p in cfg.pairs for c in p if c not in names]
    missing = [n for n in dict.fromkeys(wanted) if n not in by_name]
    if missing:
        raise UsageError(f"unknown column(s): {', '.join(missing)}")
    picked = [replace(by_name[n], name=u) for n, u in zip(wanted, _unique(wanted))]
    return table, align(picked, cfg.ingest.align)


def _settings_echo(cfg):
    return {"input": Path(cfg.input).name, "method": cfg.ingest.method, "scale": cfg.ingest.scale,
            "align": cfg.ingest.align, "skip_bad_rows": cfg.ingest.skip_bad_rows}


def _out(cfg):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_describe(cfg):
    cfg.validate()
    table, panel = load_panel(cfg)
    if cfg.columns:
        panel = panel.select(_unique(cfg.columns))
    settings = dict(_settings_echo(cfg), acf_lags=cfg.acf_lags, skipped_rows=table.skipped)
    rep = report.describe_report(panel, cfg.acf_lags, settings)
    out = _out(cfg)
    if "json" in cfg.formats:
        report.dump_json(rep, out / "describe.json")
    if "csv" in cfg.formats:
        from bekkvol.diagnostics import acf
        for n in panel.names:
            x = panel.column(n)
            report.write_acf_csv(out / f"acf_{n}_returns.csv", acf(x, cfg.acf_lags))
            report.write_acf_csv(out / f"acf_{n}_squared.csv", acf(x ** 2, cfg.acf_lags))
    if "text" in cfg.formats:
        (out / "describe.txt").write_text(report.describe_text(rep), encoding="utf-8")
    return EXIT_OK


def cmd_diagnose(cfg, post_fit=False):
    cfg.validate()
    table, panel = load_panel(cfg)
    names = cfg.columns or list(panel.names)
    pre = {}
    for n in names:
        x = panel.column(n)
        ma = fit_ma1(x) if cfg.ma_filter else None
        levels = None
        if table.kinds.get(n) == "price":
            idx = np.searchsorted(table.dates, panel.dates)
            levels = table.columns[n][np.concatenate(([idx[0] - 1], idx))] \
                if idx[0] > 0 else None
        pre[n] = report.pre_fit_block(x, cfg.lags, cfg.lags, cfg.adf_lags, cfg.adf_regression,
                                      ma, levels)

    post = None
    if cfg.model:
        try:
            model = json.loads(Path(cfg.model).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise IngestError(f"cannot read model {cfg.model}: {exc}") from None
        recs = {tuple(r["pair"]): r for r in model.get("pairs", []) if not r.get("error")}
        wanted = [tuple(p) for p in cfg.pairs] or list(recs)
        post = {}
        for pair in wanted:
            if pair not in recs:
                raise IngestError(f"missing model for pair {pair[0]}:{pair[1]}")
            Y = panel.select(list(pair)).values
            z, _ = report.standardized_from_record(Y, recs[pair])
            post[f"{pair[0]}|{pair[1]}"] = {n: report.post_fit_block(z[:, j], cfg.lags, cfg.lags)
                                            for j, n in enumerate(pair)}
    elif post_fit:
        raise UsageError("missing model for post-fit block (pass --model fit.json)")

    rep = {
        "schema": "bekkvol.diagnose", "schema_version": report.SCHEMA_VERSION,
        "settings": dict(_settings_echo(cfg), lags=cfg.lags, adf_lags=cfg.adf_lags,
                         adf_regression=cfg.adf_regression, ma_filter=cfg.ma_filter),
        "pre_fit": pre,
        "post_fit": post,
    }
    out = _out(cfg)
    if "json" in cfg.formats:
        report.dump_json(rep, out / "diagnose.json")
    if "text" in cfg.formats:
        (out / "diagnose.txt").write_text(report.diagnose_text(rep), encoding="utf-8")
    return EXIT_OK


def fit_pair(pair, Y, dates, cfg):
    """Optional MA(1) filter, BEKK fit and summaries for one pair."""
    Y = np.array(Y, dtype=float)
    ma = None
    if cfg.ma_filter:
        ma = [fit_ma1(Y[:, j]) for j in range(2)]
        Y = np.column_stack([m.residuals for m in ma])
    from bekkvol.ingest import AlignedPanel

    res = fit_bekk(AlignedPanel(tuple(pair), dates, Y), cfg.settings, cfg.distribution,
                   cfg.mean_mode)
    summary = correlation_summary(res.path, lilliefors=cfg.lilliefors)
    return res, ma, summary


def _fit_job(job):
    pair, Y, dates, cfg = job
    try:
        return fit_pair(pair, Y, dates, cfg), None
    except DATA_ERRORS as exc:
        return None, str(exc)


def cmd_fit(cfg):
    cfg.validate(need_pairs=True)
    _, panel = load_panel(cfg)
    out = _out(cfg)
    jobs = [(tuple(p), panel.select(p).values, panel.dates, cfg) for p in cfg.pairs]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            results = list(ex.map(_fit_job, jobs))
    else:
        results = [_fit_job(j) for j in jobs]

    records, failed = [], False
    for (pair, *_), (done, err) in zip(jobs, results):
        tag = f"{pair[0]}__{pair[1]}"
        if err is not None:
            logger.error("pair %s:%s failed: %s", pair[0], pair[1], err)
            records.append({"pair": list(pair), "converged": False, "error": err})
            failed = True
            continue
        res, ma, summary = done
        path_csv = None
        if "csv" in cfg.formats:
            path_csv = f"path_{tag}.csv"
            res.path.to_csv(out / path_csv)
        records.append(report.fit_record(pair, res, ma, summary, path_csv, cfg.lilliefors))
        failed |= not res.converged
        if not res.converged:
            logger.error("pair %s:%s did not converge: %s", pair[0], pair[1], res.message)

    s = cfg.settings
    rep = {
        "schema": "bekkvol.fit", "schema_version": report.SCHEMA_VERSION,
        "settings": dict(_settings_echo(cfg), distribution=cfg.distribution,
                         mean_mode=cfg.mean_mode, ma_filter=cfg.ma_filter,
                         optimizer=asdict(s)),
        "pairs": records,
    }
    if "json" in cfg.formats:
        report.dump_json(rep, out / "fit.json")
    if "text" in cfg.formats:
        (out / "fit.txt").write_text(report.fit_text(rep), encoding="utf-8")
    return EXIT_CONVERGENCE if failed else EXIT_OK


def _floats(text, n):
    vals = [float(v) for v in _split(text)]
    if len(vals) != n:
        raise UsageError(f"expected {n} numbers, got {len(vals)}: {text!r}")
    return np.array(vals)


def read_sim_spec(path, seed=None):
    """Parse an INI simulation spec.

    ``[model]`` holds ``c`` (2 numbers), ``R``, ``A``, ``B`` (4, row-major) and
    ``C`` (C11, C12, C22); ``[simulation]`` holds T, burn_in, seed,
    innovation, nu, names and origin.
    """
    cp = configparser.ConfigParser()
    cp.optionxform = str  # c and C are different matrices
    try:
        found = cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise UsageError(f"bad simulation spec: {exc}") from None
    if not found:
        raise UsageError(f"cannot read simulation spec {path}")
    if not cp.has_section("model") or not cp.has_section("simulation"):
        raise UsageError("simulation spec needs [model] and [simulation] sections")
    m, s = cp["model"], cp["simulation"]
    try:
        mean = VarMeanParams(_floats(m.get("c", "0,0"), 2),
                             _floats(m.get("R", "0,0,0,0"), 4).reshape(2, 2))
        c = _floats(m["C"], 3)
        bekk = BekkParameters(np.array([[c[0], c[1]], [0.0, c[2]]]),
                              _floats(m["A"], 4).reshape(2, 2), _floats(m["B"], 4).reshape(2, 2))
        nu = s.getfloat("nu", fallback=None)
        spec = SimSpec(mean, bekk, T=s.getint("T"), burn_in=s.getint("burn_in", fallback=500),
                       seed=seed if seed is not None else s.getint("seed", fallback=0),
                       innovation=s.get("innovation", "gaussian"), nu=nu,
                       names=tuple(_split(s.get("names", "y1,y2"))),
                       origin=s.get("origin", "2000-01-03"))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"bad simulation spec: {exc}") from None
    return spec


def cmd_simulate(spec_path, output=None, output_dir=None, seed=None):
    spec = read_sim_spec(spec_path, seed)
    sim = simulate_bekk(spec)
    if output is None:
        out = Path(output_dir or os.environ.get("BEKKVOL_OUTPUT_DIR", "bekkvol_out"))
        out.mkdir(parents=True, exist_ok=True)
        output = out / "simulated.csv"
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    write_csv(output, sim.panel, fmt="%r")
    truth = {
        "schema": "bekkvol.simulation", "schema_version": report.SCHEMA_VERSION,
        "csv": output.name, "kind": "return", "units": "percent",
        "T": spec.T, "burn_in": spec.burn_in, "seed": spec.seed,
        "innovation": spec.innovation, "nu": spec.nu, "names": list(spec.names),
        "mean": {"c": spec.mean.c.tolist(), "R": spec.mean.R.tolist()},
        "bekk": {"C": spec.bekk.C.tolist(), "A": spec.bekk.A.tolist(), "B": spec.bekk.B.tolist()},
    }
    report.dump_json(truth, output.with_suffix(".truth.json"))
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            return cmd_simulate(args.spec, args.output, args.output_dir, args.seed)
        cfg = load_config(args)
        if args.command == "describe":
            return cmd_describe(cfg)
        if args.command == "diagnose":
            return cmd_diagnose(cfg, post_fit=args.post_fit)
        return cmd_fit(cfg)
    except UsageError as exc:
        print(f"bekkvol: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        print(f"bekkvol: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
