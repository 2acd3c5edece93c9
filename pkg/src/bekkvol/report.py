"""Report assembly: table analogues as JSON-ready dicts plus text renderings.

Every JSON report carries ``schema`` and ``schema_version``; the schemas live
in ``docs/schemas``.
"""
import json
from pathlib import Path

import numpy as np

from bekkvol import diagnostics as dg
from bekkvol.estimation import MEAN_NAMES
from bekkvol.garch import BEKK_NAMES, BekkParameters, bekk_filter, default_h0, \
    standardized_residuals
from bekkvol.kernels import ma1_residuals
from bekkvol.mean import VarMeanParams, var_residuals

SCHEMA_VERSION = 1


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if np.isfinite(x) else None


def test_dict(res):
    return {"name": res.name, "statistic": _num(res.statistic), "order": int(res.order),
            "p_value": _num(res.p_value)}


test_dict.__test__ = False


def moments_dict(ms):
    return {"T": ms.T, "mean": ms.mean, "variance": ms.variance, "skewness": ms.skewness,
            "excess_kurtosis": ms.excess_kurtosis, "raw_kurtosis": ms.raw_kurtosis,
            "higher_moments_defined": ms.defined}


def dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def write_acf_csv(path, res):
    lines = ["lag,coefficient"] + [f"{k},{c!r}" for k, c in zip(res.lags, map(float, res.coefficients))]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def describe_report(panel, acf_lags=30, settings=None):
    """Moments, correlation matrix and return / squared-return ACFs."""
    moments, acfs = {}, {}
    for name in panel.names:
        x = panel.column(name)
        moments[name] = moments_dict(dg.moment_summary(x))
        r = dg.acf(x, acf_lags)
        r2 = dg.acf(x ** 2, acf_lags)
        acfs[name] = {"band": float(r.band),
                      "returns": [float(v) for v in r.coefficients],
                      "squared": [float(v) for v in r2.coefficients]}
    cm = dg.correlation_matrix(panel)
    return {
        "schema": "bekkvol.describe", "schema_version": SCHEMA_VERSION,
        "settings": dict(settings or {}),
        "sample": {"T": panel.T, "start": str(panel.dates[0]), "end": str(panel.dates[-1])},
        "moments": moments,
        "correlation": {"labels": list(cm.labels), "values": cm.values.tolist()},
        "acf": acfs,
    }


def pre_fit_block(x, lags=24, arch_lags=24, adf_lags=1, adf_regression="c", ma=None,
                  levels=None):
    """Pre-estimation tests for one return series.

    ``ma`` (an MA(1) filter result) adds Q(K)-R on the filtered series;
    ``levels`` adds an ADF test on the price levels.
    """
    out = {
        f"Q({lags})-R": test_dict(dg.ljung_box(x, lags)),
        f"Q2({lags})-R": test_dict(dg.ljung_box(x ** 2, lags)),
        f"ARCH({arch_lags})-R": test_dict(dg.lm_arch(x, arch_lags)),
        "ADF-R": test_dict(dg.adf_test(x, adf_lags, adf_regression)),
    }
    if ma is not None:
        out[f"Q({lags})-R[MA]"] = test_dict(dg.ljung_box(ma.residuals, lags))
        out[f"Q2({lags})-R[MA]"] = test_dict(dg.ljung_box(ma.residuals ** 2, lags))
    if levels is not None:
        out["ADF-level"] = test_dict(dg.adf_test(np.log(levels), adf_lags, adf_regression))
    return out


def post_fit_block(z, lags=24, arch_lags=24):
    ms = dg.moment_summary(z)
    return {
        f"Q({lags})-Z": test_dict(dg.ljung_box(z, lags)),
        f"Q2({lags})-Z": test_dict(dg.ljung_box(z ** 2, lags)),
        f"ARCH({arch_lags})-Z": test_dict(dg.lm_arch(z, arch_lags)),
        "JB-Z": test_dict(dg.jarque_bera(z)),
        "skewness": ms.skewness,
        "excess_kurtosis": ms.excess_kurtosis,
    }


def _entry(est, t, se):
    return {"estimate": _num(est), "robust_t": _num(t), "robust_se": _num(se)}


def fit_record(pair, result, ma=None, summary=None, path_csv=None, lilliefors=False):
    """One pair's estimates, fit statistics and correlation summary as a JSON-ready dict."""
    idx = {n: i for i, n in enumerate(result.names)}

    def block(prefix, names):
        return {n: _entry(result.params[idx[f"{prefix}.{n}"]], result.robust_t[idx[f"{prefix}.{n}"]],
                          result.robust_se[idx[f"{prefix}.{n}"]]) for n in names}

    nu = None
    if "nu" in idx:
        i = idx["nu"]
        nu = _entry(result.params[i], result.robust_t[i], result.robust_se[i])
    return {
        "pair": list(pair),
        "converged": bool(result.converged),
        "message": result.message,
        "distribution": result.distribution,
        "mean_mode": result.mean_mode,
        "nobs": int(result.nobs),
        "loglik": _num(result.loglik),
        "iterations": int(result.iterations),
        "max_score": _num(result.max_score),
        "hessian_cond": _num(result.hessian_cond),
        "hessian_negative_definite": bool(result.hessian_negative_definite),
        "stationarity_radius": _num(result.stationarity_radius),
        "floor_count": int(result.floor_count),
        "ma_filter": None if ma is None else {
            n: {"theta": m.theta, "mu": m.mu} for n, m in zip(pair, ma)},
        "panel_a": block("mean", MEAN_NAMES),
        "panel_b": block("var", BEKK_NAMES),
        "nu": nu,
        "CtC": result.bekk.CC.tolist(),
        "correlation_summary": None if summary is None else dict(summary.to_dict(), lilliefors=lilliefors),
        "path_csv": path_csv,
        "error": None,
    }


def params_from_record(rec):
    """Rebuild ``(VarMeanParams, BekkParameters)`` from a fit record."""
    a = {k: v["estimate"] for k, v in rec["panel_a"].items()}
    b = [rec["panel_b"][n]["estimate"] for n in BEKK_NAMES]
    mean = VarMeanParams(np.array([a["C11"], a["C22"]]),
                         np.array([[a["r11"], a["r12"]], [a["r21"], a["r22"]]]))
    nu = rec["nu"]["estimate"] if rec.get("nu") else None
    return mean, BekkParameters.from_vector(b, nu)


def model_residuals(Y, rec):
    """Mean residuals of a pair under a stored fit, re-applying its MA filter."""
    Y = np.array(Y, dtype=float)
    if rec.get("ma_filter"):
        for j, name in enumerate(rec["pair"]):
            m = rec["ma_filter"][name]
            Y[:, j] = ma1_residuals(Y[:, j], m["mu"], m["theta"])
    mean, bekk = params_from_record(rec)
    eps = var_residuals(mean, Y).eps
    return eps, mean, bekk


def standardized_from_record(Y, rec):
    eps, _, bekk = model_residuals(Y, rec)
    path = bekk_filter(bekk, eps, H0=default_h0(eps))
    return standardized_residuals(eps, path), path


def fmt_est(est, t):
    if est is None:
        return "      n/a"
    ts = "n/a" if t is None else f"{t:.3f}"
    return f"{est:9.4f} ({ts})"


def fmt_test(d):
    p = "n/a" if d["p_value"] is None else f"{d['p_value']:.3f}"
    return f"{d['statistic']:.3f} ({p})"


def describe_text(rep):
    names = list(rep["moments"])
    lines = ["Descriptive statistics (moments in percent units; kurtosis is excess)", ""]
    lines.append(f"{'':16s}{'Mean':>12s}{'Variance':>12s}{'Skewness':>12s}{'Kurtosis':>12s}")
    for n in names:
        m = rep["moments"][n]
        sk = "n/a" if m["skewness"] is None else f"{m['skewness']:.3f}"
        ku = "n/a" if m["excess_kurtosis"] is None else f"{m['excess_kurtosis']:.3f}"
        lines.append(f"{n:16s}{m['mean']:12.4f}{m['variance']:12.4f}{sk:>12s}{ku:>12s}")
    lines += ["", "Correlation matrix", ""]
    lines.append(" " * 16 + "".join(f"{n[:11]:>12s}" for n in names))
    for n, row in zip(names, rep["correlation"]["values"]):
        lines.append(f"{n:16s}" + "".join(f"{v:12.3f}" for v in row))
    band = next(iter(rep["acf"].values()))["band"]
    lines += ["", f"ACF band: +/-{band:.4f}", ""]
    return "\n".join(lines)


def diagnose_text(rep):
    lines = ["Diagnostics: statistic (p-value)", ""]
    for n, block in rep["pre_fit"].items():
        lines.append(n)
        for k, v in block.items():
            lines.append(f"  {k:16s}{fmt_test(v)}")
    if rep.get("post_fit"):
        lines += ["", "Standardized residuals"]
        for pair, per in rep["post_fit"].items():
            for n, block in per.items():
                lines.append(f"{pair} :: {n}")
                for k, v in block.items():
                    s = fmt_test(v) if isinstance(v, dict) else f"{v:.3f}"
                    lines.append(f"  {k:16s}{s}")
    return "\n".join(lines) + "\n"


def fit_text(rep):
    lines = []
    for rec in rep["pairs"]:
        lines.append(" - ".join(rec["pair"]))
        if rec.get("error"):
            lines += [f"  error: {rec['error']}", ""]
            continue
        lines.append(f"  converged={rec['converged']} loglik={rec['loglik']:.3f} "
                     f"iterations={rec['iterations']} radius={rec['stationarity_radius']:.4f}")
        lines.append("  Panel A: conditional mean")
        for k, v in rec["panel_a"].items():
            lines.append(f"    {k:6s}{fmt_est(v['estimate'], v['robust_t'])}")
        lines.append("  Panel B: conditional variance")
        for k, v in rec["panel_b"].items():
            lines.append(f"    {k:6s}{fmt_est(v['estimate'], v['robust_t'])}")
        if rec.get("nu"):
            lines.append(f"    {'nu':6s}{fmt_est(rec['nu']['estimate'], rec['nu']['robust_t'])}")
        cs = rec.get("correlation_summary")
        if cs:
            lines.append("  Conditional correlation")
            for k in ("min", "q1", "median", "q3", "max", "mean", "std", "skewness", "kurtosis"):
                lines.append(f"    {k:10s}{cs[k]:9.3f}")
            if cs["ks"]:
                lines.append(f"    {'KS':10s}{fmt_test(cs['ks'])}"
                             f"{' [Lilliefors]' if cs['lilliefors'] else ''}")
        lines.append("")
    return "\n".join(lines)

