"""Command-line interface: simulate, ampute, fit, impute, evaluate, benchmark.

Exit codes: 0 success, 2 usage error, 3 data or schema error, 4 internal error.
The thread count is read from ``MFP_NUM_THREADS``; outputs do not depend on it.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, metrics
from .ampute import MAR_MECHANISMS, MECHANISMS, OUTCOME_MECHANISMS, AmputationSpec, ampute
from .errors import DataError, MFPError
from .forest import THREADS_ENV, ForestParams, default_threads
from .imputer import (
    ImputerConfig,
    fit,
    load_model,
    mean_mode_baseline,
    save_model,
    transform,
)
from .simgen import SimSpec, calibrate_coefficients, scenario, simulate
from .tabular import Dataset, format_float, read_csv, train_test_split, write_csv

log = logging.getLogger("mfpredict")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4


class UsageError(Exception):
    pass


# -- helpers -----------------------------------------------------------------

def _names(text: str | None) -> list[str] | None:
    if text is None:
        return None
    return [t.strip() for t in text.split(",") if t.strip()]


def _pairs(items, cast=str) -> dict:
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise UsageError(f"expected NAME=VALUE, got {item!r}")
        out[key] = cast(val)
    return out


def _output_path(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    parent = p.parent if str(p.parent) else Path(".")
    if not parent.is_dir():
        raise UsageError(f"output directory {str(parent)!r} does not exist")
    if p.is_dir():
        raise UsageError(f"output path {path!r} is a directory")
    return p


def _input_path(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"input file {path!r} not found")
    return p


def _json_dump(obj, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _log_config(cmd: str, cfg: dict) -> None:
    log.info("resolved config for %s: %s", cmd, json.dumps(cfg, sort_keys=True, default=str))


def _table(header: list[str], rows: list[list]) -> str:
    cells = [header] + [[_fmt(v) for v in r] for r in rows]
    widths = [max(len(r[k]) for r in cells) for k in range(len(header))]
    lines = []
    for i, r in enumerate(cells):
        lines.append("  ".join(c.ljust(w) if k == 0 else c.rjust(w) for k, (c, w) in enumerate(zip(r, widths))))
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def _r(v):
    """Round for the JSON reports (None passes through)."""
    return None if v is None else round(float(v), 10)


# -- simulate ----------------------------------------------------------------

def _sim_spec(args) -> SimSpec:
    kw = dict(n_rows=args.n, seed=args.seed, prevalence=args.prevalence)
    if args.scenario:
        return scenario(args.scenario, **kw)
    return SimSpec(rho=args.rho, auroc=args.auroc, include_noise=args.noise, **kw)


def cmd_simulate(args) -> int:
    out = _output_path(args.output)
    try:
        spec = _sim_spec(args)
    except ValueError as e:
        raise UsageError(str(e)) from None
    _log_config("simulate", {"spec": spec.__dict__, "output": str(out)})
    coeffs = calibrate_coefficients(spec)
    d = simulate(spec, coeffs)
    write_csv(d, out)
    y = d.values[:, -1]
    lp = d.values[:, :4].sum(axis=1)
    try:
        sample_auroc = metrics.auroc(y, lp)
    except MFPError:
        sample_auroc = None
    side = {
        "spec": spec.__dict__,
        "beta": coeffs.beta,
        "beta0": coeffs.beta0,
        "calibration_auroc": coeffs.auroc,
        "calibration_prevalence": coeffs.prevalence,
        "sample_auroc": sample_auroc,
        "sample_prevalence": float(y.mean()),
        "columns": d.names,
    }
    _json_dump(side, Path(str(out) + ".json"))
    print(f"wrote {d.n_rows} rows x {d.n_cols} columns to {out}")
    print(f"beta={coeffs.beta:.6f} beta0={coeffs.beta0:.6f} "
          f"calibration AUROC={coeffs.auroc:.4f} prevalence={coeffs.prevalence:.4f}")
    return EXIT_OK


# -- ampute ------------------------------------------------------------------

def _amp_spec(args) -> AmputationSpec:
    kw = {}
    if args.config:
        base = AmputationSpec.from_config(_input_path(args.config).read_text(encoding="utf-8"))
        kw = {k: v for k, v in base.__dict__.items()}
        if args.mechanism and args.mechanism != base.mechanism:
            kw["drivers"] = None
    mech = args.mechanism or kw.get("mechanism")
    if mech is None:
        raise UsageError("--mechanism is required")
    kw["mechanism"] = mech
    for key, val in (
        ("targets", _names(args.targets)),
        ("drivers", _names(args.drivers)),
        ("outcome", args.outcome),
        ("noise", _names(args.noise)),
        ("rate", args.rate),
        ("low_rate", args.low_rate),
        ("high_rate", args.high_rate),
        ("noise_rate", args.noise_rate),
        ("seed", args.seed),
    ):
        if val is not None:
            kw[key] = val
    # default drivers only pair with the default targets
    if mech in MAR_MECHANISMS and kw.get("targets") is not None and not kw.get("drivers"):
        raise UsageError(f"{mech} with custom --targets needs --drivers")
    if mech in OUTCOME_MECHANISMS and not kw.get("outcome"):
        raise UsageError(f"{mech} needs --outcome")
    if args.out_rates:
        kw["out_rates"] = tuple(float(v) for v in args.out_rates.split(","))
    kw.setdefault("seed", 0)
    try:
        return AmputationSpec(**kw)
    except ValueError as e:
        raise UsageError(str(e)) from None


def cmd_ampute(args) -> int:
    src = _input_path(args.input)
    out = _output_path(args.output)
    spec = _amp_spec(args)
    _log_config("ampute", {"spec": spec.to_config(), "input": str(src), "output": str(out)})
    d = read_csv(src)
    amp = ampute(d, spec)
    write_csv(amp, out)
    after = amp.mask.mean(axis=0)
    rows = [[n, f"{100 * after[j]:.1f}%", int(amp.mask[:, j].sum() - d.mask[:, j].sum())]
            for j, n in enumerate(d.names) if after[j] > 0]
    print(f"{spec.mechanism} on {d.n_rows} rows")
    print(_table(["column", "missing", "masked"], rows))
    return EXIT_OK


# -- fit / impute ------------------------------------------------------------

def _imputer_config(args, d: Dataset) -> ImputerConfig:
    exclude = _names(args.exclude) or []
    for n in exclude:
        d.index(n)
    variables = _names(args.variables)
    if variables is None and exclude:
        variables = [n for n in d.names if n not in exclude]
    pm = None
    if exclude:
        targets = variables if variables is not None else d.names
        pm = {t: [n for n in d.names if n != t and n not in exclude] for t in targets}
    init = args.init
    custom = _pairs(args.init_value)
    if custom:
        conv = {}
        for name, val in custom.items():
            kind = d.kind(d.index(name))
            conv[name] = val if kind.is_categorical else float(val)
        init = conv
    order = args.order
    if args.order_list:
        order = _names(args.order_list)
    weights = _pairs(args.weight, float) or None
    try:
        return ImputerConfig(
            initialization=init,
            forest=ForestParams(
                num_trees=args.trees,
                mtry=args.mtry,
                min_node_size=args.min_node_size,
                max_depth=args.max_depth,
                seed=args.seed,
            ),
            convergence=args.convergence,
            weights=weights,
            max_iterations=args.max_iter,
            predictor_matrix=pm,
            p_obs=args.p_obs,
            p_miss=args.p_miss,
            variables_to_impute=variables,
            order=order,
            threads=default_threads(),
        )
    except ValueError as e:
        raise UsageError(str(e)) from None


TRACE_COLUMNS = [
    "variable", "iteration", "kind", "retained", "fallback", "n_train", "n_oob", "n_predictors",
    "apparent_mse", "oob_mse", "apparent_nmse", "oob_nmse", "apparent_mer", "oob_mer",
    "apparent_f1", "oob_f1", "apparent_macro_f1", "oob_macro_f1",
    "global_apparent_nmse", "global_oob_nmse",
]


def write_trace(model, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in model.trace.rows(model.n_iter):
            out = []
            for c in TRACE_COLUMNS:
                v = row[c]
                if v is None:
                    out.append("NA")
                elif isinstance(v, bool):
                    out.append(str(v).lower())
                elif isinstance(v, float):
                    out.append(format_float(v))
                else:
                    out.append(str(v))
            w.writerow(out)


def cmd_fit(args) -> int:
    src = _input_path(args.input)
    model_path = _output_path(args.model)
    out = _output_path(args.output)
    trace_path = _output_path(args.trace)
    d = read_csv(src)
    cfg = _imputer_config(args, d)
    _log_config("fit", {"imputer": cfg.to_json(), "input": str(src), "model": str(model_path),
                        "output": str(out), "trace": str(trace_path), "threads": cfg.threads})
    imputed, model = fit(d, cfg)
    save_model(model, model_path)
    if out:
        write_csv(imputed, out)
    if trace_path:
        write_trace(model, trace_path)
    print(f"fitted {len(model.sequence)} variables; {model.total_iterations} iterations trained, "
          f"{model.n_iter} retained")
    rows = [[i + 1, model.trace.global_apparent[i], model.trace.global_oob[i],
             "yes" if i < model.n_iter else "no"] for i in range(model.total_iterations)]
    print(_table(["iteration", "apparent NMSE", "OOB NMSE", "retained"], rows))
    return EXIT_OK


def _read_for_model(model, path: Path) -> Dataset:
    schema = dict(model.schema)
    fallback = {}
    for j, (name, kind) in enumerate(model.schema):
        if kind.is_categorical and model.init_values[j] is not None:
            fallback[name] = int(model.init_values[j])
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), [])
    if header != model.names:
        raise DataError(f"{path}: columns {header} do not match the model's {model.names}")
    d = read_csv(path, schema, unknown_levels=fallback)
    for (i, j), raw in sorted(d.overrides.items()):
        log.warning("row %d column %r: level %r unseen at fit time, treated as majority level %r",
                    i + 1, d.names[j], raw, model.schema[j][1].levels[fallback[d.names[j]]])
    return d


def cmd_impute(args) -> int:
    model_path = _input_path(args.model)
    src = _input_path(args.input)
    out = _output_path(args.output)
    _log_config("impute", {"model": str(model_path), "input": str(src), "output": str(out),
                           "threads": default_threads()})
    model = load_model(model_path)
    d = _read_for_model(model, src)
    res = transform(model, d, default_threads())
    write_csv(res, out)
    print(f"imputed {int(d.mask.sum() - res.mask.sum())} cells in {d.n_rows} rows")
    return EXIT_OK


# -- evaluate ----------------------------------------------------------------

def evaluate_imputation(truth: Dataset, imputed: Dataset, amputed_mask: np.ndarray) -> dict:
    """Per-variable error over the cells masked in ``amputed_mask``.

    Continuous: NMSE against the mean of the true masked values. Categorical:
    MER and the one-hot Brier NMSE against the class proportions of the true
    masked values. Columns without masked cells are omitted.
    """
    if truth.shape != imputed.shape or truth.shape != amputed_mask.shape:
        raise DataError(
            f"shape mismatch: truth {truth.shape}, imputed {imputed.shape}, mask {amputed_mask.shape}"
        )
    report = {}
    for j, (name, kind) in enumerate(truth.schema()):
        rows = np.flatnonzero(amputed_mask[:, j])
        if rows.size == 0:
            continue
        if truth.mask[rows, j].any():
            raise DataError(f"column {name!r}: truth has missing values in evaluated cells")
        if imputed.mask[rows, j].any():
            raise DataError(f"column {name!r}: imputed file still has missing cells")
        t = truth.values[rows, j]
        p = imputed.values[rows, j]
        entry = {"n": int(rows.size), "kind": "categorical" if kind.is_categorical else "continuous"}
        try:
            if kind.is_categorical:
                entry["mer"] = _r(metrics.mer(t, p))
                entry["nmse"] = _r(metrics.nmse_categorical(
                    t.astype(int), metrics.one_hot(p.astype(int), kind.n_levels)))
            else:
                entry["mse"] = _r(metrics.mse(t, p))
                entry["nmse"] = _r(metrics.nmse_continuous(t, p))
        except MFPError:
            entry.setdefault("nmse", None)
        report[name] = entry
    return report


def cmd_evaluate(args) -> int:
    tp, ip, ap = _input_path(args.truth), _input_path(args.imputed), _input_path(args.amputed)
    out = _output_path(args.json)
    _log_config("evaluate", {"truth": str(tp), "imputed": str(ip), "amputed": str(ap), "json": str(out)})
    truth = read_csv(tp)
    imputed = read_csv(ip, truth.kinds)
    amputed = read_csv(ap, truth.kinds)
    if imputed.names != truth.names or amputed.names != truth.names:
        raise DataError("truth, imputed and amputed files must have the same columns")
    report = evaluate_imputation(truth, imputed, amputed.mask)
    rows = [[n, e["kind"], e["n"], e.get("nmse"), e.get("mer")] for n, e in report.items()]
    print(_table(["variable", "kind", "n", "NMSE", "MER"], rows))
    if out:
        _json_dump({"variables": report}, out)
    return EXIT_OK


# -- benchmark ---------------------------------------------------------------

def _quantiles(x) -> dict:
    x = np.asarray([v for v in x if v is not None], dtype=np.float64)
    if x.size == 0:
        return {"median": None, "q1": None, "q3": None, "iqr": None}
    q1, med, q3 = np.percentile(x, [25, 50, 75])
    return {"median": _r(med), "q1": _r(q1), "q3": _r(q3), "iqr": _r(q3 - q1)}


def run_benchmark(data: Dataset, amp: AmputationSpec, cfg: ImputerConfig, seeds, outcome=None):
    """Split, ampute, fit, impute and evaluate once per seed.

    Returns (per-seed records, timings). Train and test parts are amputed
    independently; the outcome column takes no part in imputation.
    """
    records, timings = [], []
    for s in seeds:
        train, test = train_test_split(data, seed=s)
        spec_tr = AmputationSpec(**{**amp.__dict__, "seed": 2 * s})
        spec_te = AmputationSpec(**{**amp.__dict__, "seed": 2 * s + 1})
        tr_amp, te_amp = ampute(train, spec_tr), ampute(test, spec_te)
        c = ImputerConfig(**{**cfg.__dict__, "forest": ForestParams(**{**cfg.forest.__dict__, "seed": s})})
        t0 = time.perf_counter()
        _, model = fit(tr_amp, c)
        t1 = time.perf_counter()
        imputed = transform(model, te_amp, cfg.threads)
        t2 = time.perf_counter()
        variables = [model.names[j] for j in model.sequence]
        base = mean_mode_baseline(tr_amp, te_amp, variables)
        t3 = time.perf_counter()
        mfp = evaluate_imputation(test, imputed, te_amp.mask)
        mm = evaluate_imputation(test, base, te_amp.mask)
        oob = model.final_oob_nmse()
        records.append({
            "seed": s,
            "n_iter": model.n_iter,
            "missforestpredict": {k: v["nmse"] for k, v in mfp.items() if k != outcome},
            "mean_mode": {k: v["nmse"] for k, v in mm.items() if k != outcome},
            "oob_nmse": {k: _r(v) for k, v in oob.items()},
        })
        timings.append({"seed": s, "missforestpredict_fit": t1 - t0,
                        "missforestpredict_impute": t2 - t1, "mean_mode": t3 - t2})
    return records, timings


def summarize_benchmark(records) -> dict:
    out = {}
    for method in ("missforestpredict", "mean_mode"):
        names = sorted({k for r in records for k in r[method]})
        out[method] = {n: _quantiles([r[method].get(n) for r in records]) for n in names}
    names = sorted({k for r in records for k in r["oob_nmse"]})
    out["oob_nmse"] = {n: _quantiles([r["oob_nmse"].get(n) for r in records]) for n in names}
    out["n_iter"] = [r["n_iter"] for r in records]
    return out


def cmd_benchmark(args) -> int:
    out = _output_path(args.json)
    tout = _output_path(args.timings)
    try:
        sim = scenario(args.scenario, n_rows=args.n, seed=args.seed)
    except ValueError as e:
        raise UsageError(str(e)) from None
    noise = [] if not sim.include_noise else None
    mech = args.mechanism
    try:
        amp = AmputationSpec(
            mechanism=mech,
            outcome="outcome" if mech in OUTCOME_MECHANISMS else None,
            noise=noise,
            rate=args.rate,
        )
    except ValueError as e:
        raise UsageError(str(e)) from None
    data = simulate(sim)
    names = [n for n in data.names if n != "outcome"]
    try:
        cfg = ImputerConfig(
            forest=ForestParams(num_trees=args.trees, max_depth=args.max_depth),
            convergence=args.convergence,
            variables_to_impute=names,
            predictor_matrix={t: [n for n in names if n != t] for t in names},
            threads=default_threads(),
        )
    except ValueError as e:
        raise UsageError(str(e)) from None
    seeds = list(range(args.seed, args.seed + args.seeds))
    _log_config("benchmark", {"simulation": sim.__dict__, "amputation": amp.to_config(),
                              "imputer": cfg.to_json(), "seeds": seeds, "threads": cfg.threads})
    records, timings = run_benchmark(data, amp, cfg, seeds, outcome="outcome")
    summary = summarize_benchmark(records)
    rows = []
    for n in sorted(summary["missforestpredict"]):
        a, b = summary["missforestpredict"][n], summary["mean_mode"].get(n, {})
        rows.append([n, a["median"], a["iqr"], b.get("median"), b.get("iqr"),
                     summary["oob_nmse"].get(n, {}).get("median")])
    print(f"{args.scenario} / {mech}: {len(seeds)} repetitions, test NMSE")
    print(_table(["variable", "mfp median", "mfp IQR", "mean/mode median", "mean/mode IQR",
                  "OOB median"], rows))
    if out:
        _json_dump({"scenario": args.scenario, "mechanism": mech, "seeds": seeds,
                    "summary": summary, "runs": records}, out)
    # wall-clock numbers vary between runs; keep them out of stdout and the report
    tsum = {k: _quantiles([t[k] for t in timings]) for k in
            ("missforestpredict_fit", "missforestpredict_impute", "mean_mode")}
    for k, q in tsum.items():
        log.info("runtime %s: median %.3fs (IQR %.3fs)", k, q["median"], q["iqr"])
    if tout:
        _json_dump({"summary": tsum, "runs": timings}, tout)
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _forest_args(p) -> None:
    p.add_argument("--trees", type=int, default=500, help="trees per forest (default 500)")
    p.add_argument("--max-depth", type=int, default=0, help="0 = unlimited (default)")
    p.add_argument("--mtry", type=int, help="predictors tried per split (default floor(sqrt(p)))")
    p.add_argument("--min-node-size", type=int,
                   help="default 5 for continuous, 10 for categorical targets")
    p.add_argument("--convergence", choices=("oob", "apparent"), default="oob")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mfpredict",
        description="Iterative random-forest imputation with models reusable on new data.",
        epilog=f"Set {THREADS_ENV} to control the number of threads.",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-q", "--quiet", action="store_true", help="only log warnings and errors")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a simulated dataset")
    p.add_argument("--scenario", help="e.g. sim_75_7 or sim_90_1_noise (overrides --auroc/--rho/--noise)")
    p.add_argument("--auroc", type=float, default=0.75)
    p.add_argument("--rho", type=float, default=0.7)
    p.add_argument("--noise", action="store_true", help="add 12 noise variables")
    p.add_argument("--prevalence", type=float, default=0.20)
    p.add_argument("--n", type=int, default=4000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ampute", help="inject missing values")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--mechanism", choices=MECHANISMS)
    p.add_argument("--config", help="key=value amputation spec file")
    p.add_argument("--targets", help="comma-separated columns (default V1..V4 convention)")
    p.add_argument("--drivers", help="comma-separated driver per target (MAR mechanisms)")
    p.add_argument("--outcome", help="binary outcome column (_out mechanisms)")
    p.add_argument("--noise", help="columns that get MCAR noise amputation (default N1, N2, ...)")
    p.add_argument("--rate", type=float, help="MCAR rate (default 0.3)")
    p.add_argument("--low-rate", type=float, help="rate below the driver mean (default 0.1)")
    p.add_argument("--high-rate", type=float, help="rate above the driver mean (default 0.5)")
    p.add_argument("--out-rates", help="four outcome-stratum rates (default 0.1,0.36,0.2,0.3)")
    p.add_argument("--noise-rate", type=float, help="MCAR rate for noise columns (default 0.3)")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_ampute)

    p = sub.add_parser("fit", help="impute a dataset and save the imputation model")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-m", "--model", required=True, help="model file to write")
    p.add_argument("-o", "--output", help="imputed CSV")
    p.add_argument("--trace", help="error-trace CSV")
    _forest_args(p)
    p.add_argument("--max-iter", type=int, default=10)
    p.add_argument("--init", choices=("mean_mode", "median_mode"), default="mean_mode")
    p.add_argument("--init-value", action="append", metavar="NAME=VALUE",
                   help="custom initial value for a column (repeatable)")
    p.add_argument("--order", choices=("ascending", "descending"), default="ascending")
    p.add_argument("--order-list", help="explicit comma-separated imputation order")
    p.add_argument("--variables", help="comma-separated variables to impute (default all)")
    p.add_argument("--exclude", help="columns left out of imputation entirely, e.g. the outcome")
    p.add_argument("--weight", action="append", metavar="NAME=W",
                   help="global NMSE weight (default: missing proportion)")
    p.add_argument("--p-obs", type=float, default=1.0)
    p.add_argument("--p-miss", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("impute", help="impute new observations with a saved model")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("evaluate", help="error of an imputation over the amputed cells")
    p.add_argument("--truth", required=True, help="complete CSV")
    p.add_argument("--imputed", required=True)
    p.add_argument("--amputed", required=True, help="CSV whose NA cells are evaluated")
    p.add_argument("--json", help="write the report as JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="repeated split/ampute/fit/impute/evaluate runs")
    p.add_argument("--scenario", default="sim_75_7")
    p.add_argument("--mechanism", choices=MECHANISMS, default="MCAR")
    p.add_argument("--rate", type=float, default=0.30)
    p.add_argument("--seeds", type=int, default=20, help="number of repetitions")
    p.add_argument("--seed", type=int, default=0, help="data seed and first repetition seed")
    p.add_argument("--n", type=int, default=4000)
    _forest_args(p)
    p.set_defaults(trees=100)
    p.add_argument("--json", help="report file (deterministic)")
    p.add_argument("--timings", help="runtime file (varies between runs)")
    p.set_defaults(func=cmd_benchmark)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as e:
        print(f"mfpredict {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (MFPError, OSError) as e:
        print(f"mfpredict {args.command}: error: {e}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as e:
        print(f"mfpredict {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:  # pragma: no cover
        log.exception("internal error")
        print(f"mfpredict {args.command}: internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
