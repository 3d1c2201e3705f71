"""Iterative random-forest imputation with replayable per-variable models.

Missing cells are first filled with an initial value (mean/median for
continuous columns, mode for categorical ones). Variables are then visited in
order of increasing missingness; each gets a forest trained on the rows where
it is observed, whose predictions overwrite its missing cells straight away so
the next variable already sees them. After each sweep a weighted average of
the per-variable NMSE (out-of-bag by default) is compared with the previous
sweep; as soon as it stops decreasing the sweep is discarded and the models of
the earlier sweeps are what :func:`transform` replays on new data.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import metrics
from .errors import DataError, DegenerateInputError, SchemaError
from .forest import PROBABILITY, REGRESSION, Forest, ForestParams, fit_forest
from .tabular import Dataset, missing_proportions

log = logging.getLogger(__name__)

INIT_SCHEMES = ("mean_mode", "median_mode")
ORDERS = ("ascending", "descending")
SOURCES = ("oob", "apparent")


@dataclass
class ImputerConfig:
    """Settings for :func:`fit`.

    initialization : "mean_mode", "median_mode" or a mapping column -> value.
        A mapping overrides the mean/mode default for the columns it names;
        categorical values are given as level names.
    forest : ForestParams used for every imputation forest.
    convergence : "oob" (default) or "apparent".
    weights : mapping column -> weight for the global NMSE. Default: the
        column's missing proportion. Unlisted columns get weight 0.
    max_iterations : cap on the number of sweeps.
    predictor_matrix : boolean (p, p) matrix, row = imputed column, column =
        predictor; or a mapping column -> list of predictor names.
    p_obs, p_miss : usable-case thresholds. A predictor x of y is dropped when
        the share of missing x among observed y exceeds ``p_obs`` or the share
        of observed x among missing y is below ``p_miss``.
    variables_to_impute : column names; default all.
    order : "ascending" / "descending" missingness or an explicit name list.
    """

    initialization: str | Mapping[str, float | str] = "mean_mode"
    forest: ForestParams = field(default_factory=ForestParams)
    convergence: str = "oob"
    weights: Mapping[str, float] | None = None
    max_iterations: int = 10
    predictor_matrix: object = None
    p_obs: float = 1.0
    p_miss: float = 0.0
    variables_to_impute: Sequence[str] | None = None
    order: str | Sequence[str] = "ascending"
    threads: int | None = None

    def __post_init__(self):
        if self.convergence not in SOURCES:
            raise ValueError(f"convergence must be one of {SOURCES}, got {self.convergence!r}")
        if isinstance(self.initialization, str) and self.initialization not in INIT_SCHEMES:
            raise ValueError(f"initialization must be one of {INIT_SCHEMES} or a mapping")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        for name, v in (("p_obs", self.p_obs), ("p_miss", self.p_miss)):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.weights is not None and any(w < 0 for w in self.weights.values()):
            raise ValueError("weights must be non-negative")
        if isinstance(self.order, str) and self.order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS} or a list of names")
        if self.forest.seed < 0:
            raise ValueError("seed must be non-negative")

    def to_json(self) -> dict:
        out = asdict(self)
        out["forest"] = self.forest.to_json()
        pm = self.predictor_matrix
        if isinstance(pm, np.ndarray):
            out["predictor_matrix"] = pm.astype(bool).tolist()
        elif isinstance(pm, Mapping):
            out["predictor_matrix"] = {k: list(v) for k, v in pm.items()}
        for key in ("initialization", "weights"):
            if isinstance(out[key], Mapping):
                out[key] = dict(out[key])
        for key in ("variables_to_impute", "order"):
            if out[key] is not None and not isinstance(out[key], str):
                out[key] = list(out[key])
        out.pop("threads")
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "ImputerConfig":
        obj = dict(obj)
        obj["forest"] = ForestParams(**obj["forest"])
        pm = obj.get("predictor_matrix")
        if isinstance(pm, list):
            obj["predictor_matrix"] = np.array(pm, dtype=bool)
        return cls(**obj)


# -- error trace -------------------------------------------------------------

METRIC_FIELDS = ("mse", "nmse", "mer", "f1", "macro_f1")


@dataclass
class VariableRecord:
    """Errors of one variable's forest at one iteration (None = not applicable)."""

    variable: str
    iteration: int
    kind: str
    n_train: int
    n_oob: int
    n_predictors: int
    fallback: bool = False
    apparent_mse: float | None = None
    oob_mse: float | None = None
    apparent_nmse: float | None = None
    oob_nmse: float | None = None
    apparent_mer: float | None = None
    oob_mer: float | None = None
    apparent_f1: float | None = None
    oob_f1: float | None = None
    apparent_macro_f1: float | None = None
    oob_macro_f1: float | None = None

    def nmse(self, source: str) -> float:
        return self.oob_nmse if source == "oob" else self.apparent_nmse


@dataclass
class ErrorTrace:
    records: list = field(default_factory=list)
    global_apparent: list = field(default_factory=list)
    global_oob: list = field(default_factory=list)

    def record(self, variable: str, iteration: int) -> VariableRecord:
        for r in self.records:
            if r.variable == variable and r.iteration == iteration:
                return r
        raise KeyError((variable, iteration))

    def iteration_records(self, iteration: int) -> list:
        return [r for r in self.records if r.iteration == iteration]

    def global_series(self, source: str) -> list:
        return self.global_oob if source == "oob" else self.global_apparent

    def rows(self, n_iter: int | None = None) -> list[dict]:
        """Flat rows, one per (variable, iteration), with the global NMSE attached."""
        out = []
        for r in self.records:
            row = asdict(r)
            row["global_apparent_nmse"] = self.global_apparent[r.iteration - 1]
            row["global_oob_nmse"] = self.global_oob[r.iteration - 1]
            if n_iter is not None:
                row["retained"] = r.iteration <= n_iter
            out.append(row)
        return out

    def to_json(self) -> dict:
        return {
            "records": [asdict(r) for r in self.records],
            "global_apparent": list(self.global_apparent),
            "global_oob": list(self.global_oob),
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "ErrorTrace":
        return cls(
            [VariableRecord(**r) for r in obj["records"]],
            list(obj["global_apparent"]),
            list(obj["global_oob"]),
        )


def global_nmse(values: Sequence[float], weights: Sequence[float]) -> float:
    """Weighted mean of per-variable NMSE values."""
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if values.shape != weights.shape:
        raise ValueError("values and weights differ in length")
    total = weights.sum()
    if not total > 0:
        raise ValueError("global NMSE needs a positive total weight (nothing to converge on)")
    keep = weights > 0
    return float(np.sum(weights[keep] * values[keep]) / total)


# -- model -------------------------------------------------------------------

@dataclass
class StepModel:
    """Forest for one variable at one iteration; ``forest`` is None when the
    variable is left at its initial value (no usable rows or predictors)."""

    iteration: int
    position: int
    target: int
    predictors: np.ndarray
    forest: Forest | None


@dataclass
class ImputationModel:
    schema: list
    init_values: list
    sequence: list
    n_iter: int
    total_iterations: int
    steps: list
    trace: ErrorTrace
    config: dict

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.schema]

    def step(self, iteration: int, position: int) -> StepModel:
        for s in self.steps:
            if s.iteration == iteration and s.position == position:
                return s
        raise KeyError((iteration, position))

    def retained_steps(self) -> list:
        return [s for s in self.steps if s.iteration <= self.n_iter]

    def final_oob_nmse(self) -> dict:
        """OOB NMSE per imputed variable at the retained iteration (1.0 if none)."""
        out = {}
        for j in self.sequence:
            name = self.schema[j][0]
            if self.n_iter == 0:
                out[name] = 1.0
            else:
                out[name] = self.trace.record(name, self.n_iter).oob_nmse
        return out

    def transform(self, d: Dataset, threads: int | None = None) -> Dataset:
        return transform(self, d, threads)


# -- building blocks ---------------------------------------------------------

def _resolve_columns(d: Dataset, names) -> list[int]:
    if names is None:
        return list(range(d.n_cols))
    return [d.index(n) for n in names]


def initialize(d: Dataset, scheme="mean_mode", columns=None):
    """Fill masked cells with per-column initial values.

    Returns the completed dataset (mask cleared on every filled column) and
    the list of initial values, one per column (level index for categorical
    columns, None when a column is fully missing and not in ``columns``).
    ``columns`` names the columns that must receive a value; default all.
    """
    custom = {}
    if isinstance(scheme, Mapping):
        custom = dict(scheme)
        scheme = "mean_mode"
    elif scheme not in INIT_SCHEMES:
        raise ValueError(f"unknown initialization scheme {scheme!r}")
    for name in custom:
        d.index(name)
    required = set(_resolve_columns(d, columns))
    init = []
    for j, (name, kind) in enumerate(d.schema()):
        if name in custom:
            v = custom[name]
            if kind.is_categorical:
                if isinstance(v, str):
                    if v not in kind.levels:
                        raise SchemaError(f"custom init {v!r} is not a level of {name!r}")
                    v = kind.levels.index(v)
                elif not (0 <= int(v) < kind.n_levels):
                    raise SchemaError(f"custom init {v!r} out of range for {name!r}")
                init.append(float(int(v)))
            else:
                init.append(float(v))
            continue
        _, obs = d.observed(j)
        if obs.size == 0:
            if j in required:
                raise DataError(
                    f"column {name!r} has no observed values and no custom initial value"
                )
            init.append(None)
            continue
        if kind.is_categorical:
            counts = np.bincount(obs.astype(np.int64), minlength=kind.n_levels)
            init.append(float(np.argmax(counts)))
        elif scheme == "median_mode":
            init.append(float(np.median(obs)))
        else:
            init.append(float(np.mean(obs)))
    values = _fill(d.values, d.mask, init)
    mask = d.mask.copy()
    for j, v in enumerate(init):
        if v is not None:
            mask[:, j] = False
    return d.replace(values=values, mask=mask), init


def _fill(values: np.ndarray, mask: np.ndarray, init) -> np.ndarray:
    state = np.array(values, dtype=np.float64, copy=True)
    for j, v in enumerate(init):
        if v is not None:
            state[mask[:, j], j] = v
    return state


def imputation_order(d: Dataset, variables=None, order="ascending") -> list[int]:
    """Column indices to impute, sorted by missing proportion (ties: position)."""
    cols = _resolve_columns(d, variables)
    if not isinstance(order, str):
        explicit = [d.index(n) for n in order]
        if sorted(explicit) != sorted(cols):
            raise SchemaError("explicit order must list exactly the variables to impute")
        return explicit
    prop = missing_proportions(d)
    if order == "ascending":
        return sorted(cols, key=lambda j: (prop[j], j))
    if order == "descending":
        return sorted(cols, key=lambda j: (-prop[j], j))
    raise ValueError(f"unknown order {order!r}")


def usable_case_stats(mask: np.ndarray, y: int, x: int) -> tuple[float, float]:
    """(p_obs, p_miss) for target column ``y`` and predictor column ``x``.

    p_obs is the share of missing x among rows where y is observed, p_miss the
    share of observed x among rows where y is missing. Empty row sets give the
    neutral values 0 and 1.
    """
    y_obs = ~mask[:, y]
    y_mis = mask[:, y]
    p_obs = float(mask[y_obs, x].mean()) if y_obs.any() else 0.0
    p_miss = float((~mask[y_mis, x]).mean()) if y_mis.any() else 1.0
    return p_obs, p_miss


def usable_case_filter(d: Dataset, y, candidates, p_obs: float = 1.0, p_miss: float = 0.0) -> list[int]:
    """Keep the candidate predictors of ``y`` that pass both usable-case thresholds."""
    yj = d.index(y) if isinstance(y, str) else int(y)
    kept = []
    for x in candidates:
        xj = d.index(x) if isinstance(x, str) else int(x)
        po, pm = usable_case_stats(d.mask, yj, xj)
        if po > p_obs or pm < p_miss:
            continue
        kept.append(xj)
    return kept


def _predictor_matrix(d: Dataset, spec) -> np.ndarray:
    p = d.n_cols
    if spec is None:
        pm = ~np.eye(p, dtype=bool)
    elif isinstance(spec, Mapping):
        pm = ~np.eye(p, dtype=bool)
        for target, preds in spec.items():
            row = np.zeros(p, dtype=bool)
            for name in preds:
                row[d.index(name)] = True
            pm[d.index(target)] = row
    else:
        pm = np.asarray(spec, dtype=bool)
        if pm.shape != (p, p):
            raise SchemaError(f"predictor matrix must be {p}x{p}, got {pm.shape}")
    if np.any(np.diag(pm)):
        raise SchemaError("a variable cannot predict itself (predictor matrix diagonal must be False)")
    return pm


def _derive_seed(seed: int, *keys: int) -> int:
    state = np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def _predict_values(forest: Forest, X: np.ndarray, threads=None) -> np.ndarray:
    pred = forest.predict(X, threads)
    if forest.mode == PROBABILITY:
        return np.argmax(pred, axis=1).astype(np.float64)
    return pred


def _safe(fn, *args) -> float:
    try:
        return fn(*args)
    except DegenerateInputError:
        # reference predictor already exact: no improvement possible
        return 1.0


def _continuous_record(rec: VariableRecord, y, apparent, oob, covered):
    ref = float(np.mean(y))
    rec.apparent_mse = metrics.mse(y, apparent)
    rec.apparent_nmse = _safe(metrics.nmse_continuous, y, apparent, ref)
    if covered.any():
        rec.oob_mse = metrics.mse(y[covered], oob[covered])
        rec.oob_nmse = _safe(metrics.nmse_continuous, y[covered], oob[covered], ref)
    else:
        rec.oob_nmse = 1.0


def _categorical_record(rec: VariableRecord, y, n_classes, apparent, oob, covered):
    y = y.astype(np.int64)
    props = metrics.class_proportions(y, n_classes)

    def fill(prefix, truth, probs):
        cls = np.argmax(probs, axis=1)
        if n_classes >= 2:
            setattr(rec, f"{prefix}_nmse", _safe(metrics.nmse_categorical, truth, probs, props))
        else:
            setattr(rec, f"{prefix}_nmse", 1.0)
        setattr(rec, f"{prefix}_mer", metrics.mer(truth, cls))
        if n_classes == 2:
            setattr(rec, f"{prefix}_f1", metrics.f1(truth, cls, positive=1))
        elif n_classes > 2:
            setattr(rec, f"{prefix}_macro_f1", metrics.macro_f1(truth, cls))

    fill("apparent", y, apparent)
    if covered.any():
        fill("oob", y[covered], oob[covered])
    else:
        rec.oob_nmse = 1.0


# -- fit / transform ---------------------------------------------------------

def fit(d: Dataset, cfg: ImputerConfig | None = None):
    """Impute ``d`` and learn the models to impute new observations.

    Returns ``(imputed dataset, ImputationModel)``. The imputed dataset is the
    state after the last sweep that lowered the global NMSE (the initial
    values if none did).
    """
    cfg = cfg or ImputerConfig()
    if d.n_rows < 2:
        raise DataError("need at least two rows to fit")
    names, kinds, mask = d.names, d.kinds, d.mask
    targets = _resolve_columns(d, cfg.variables_to_impute)
    if not targets:
        raise DataError("no variables to impute")
    pm = _predictor_matrix(d, cfg.predictor_matrix)
    prop = missing_proportions(d)
    if cfg.weights is None:
        weights = {j: float(prop[j]) for j in targets}
    else:
        for name in cfg.weights:
            d.index(name)
        weights = {j: float(cfg.weights.get(names[j], 0.0)) for j in targets}
    if not sum(weights.values()) > 0:
        raise ValueError(
            "nothing to converge on: all global-NMSE weights are zero "
            "(no missing values among the imputed variables and no explicit weights)"
        )

    seq = imputation_order(d, [names[j] for j in targets], cfg.order)
    predictors = {}
    for j in seq:
        cand = [x for x in np.flatnonzero(pm[j])]
        kept = usable_case_filter(d, j, cand, cfg.p_obs, cfg.p_miss)
        if len(kept) < len(cand):
            dropped = sorted(set(cand) - set(kept))
            log.info("%s: usable-case filter dropped %s", names[j], [names[x] for x in dropped])
        predictors[j] = np.array(kept, dtype=np.int64)
    needed = set(seq)
    for j in seq:
        needed.update(int(x) for x in predictors[j])
    _, init = initialize(d, cfg.initialization, [names[j] for j in sorted(needed)])

    state = _fill(d.values, mask, init)
    best_state = state.copy()
    trace = ErrorTrace()
    steps = []
    previous = 1.0
    n_iter = 0
    total = 0
    w_vec = [weights[j] for j in seq]
    for it in range(1, cfg.max_iterations + 1):
        total = it
        for pos, j in enumerate(seq):
            steps.append(_fit_step(d, cfg, state, it, pos, j, predictors[j], kinds, trace))
        g_app = global_nmse([trace.record(names[j], it).apparent_nmse for j in seq], w_vec)
        g_oob = global_nmse([trace.record(names[j], it).oob_nmse for j in seq], w_vec)
        trace.global_apparent.append(g_app)
        trace.global_oob.append(g_oob)
        current = g_oob if cfg.convergence == "oob" else g_app
        log.info("iteration %d: global NMSE apparent=%.6f oob=%.6f", it, g_app, g_oob)
        if not current < previous:
            break
        previous = current
        n_iter = it
        best_state = state.copy()

    model = ImputationModel(
        schema=d.schema(),
        init_values=init,
        sequence=list(seq),
        n_iter=n_iter,
        total_iterations=total,
        steps=steps,
        trace=trace,
        config=cfg.to_json(),
    )
    return _output(d, best_state, seq), model


def _fit_step(d, cfg, state, it, pos, j, preds, kinds, trace) -> StepModel:
    mask = d.mask
    name = d.names[j]
    kind = kinds[j]
    obs = ~mask[:, j]
    rec = VariableRecord(
        variable=name,
        iteration=it,
        kind="categorical" if kind.is_categorical else "continuous",
        n_train=int(obs.sum()),
        n_oob=0,
        n_predictors=len(preds),
    )
    trace.records.append(rec)
    if obs.sum() < 2 or len(preds) == 0:
        rec.fallback = True
        rec.apparent_nmse = rec.oob_nmse = 1.0
        log.info("%s: imputed by its initial value only (no usable rows or predictors)", name)
        return StepModel(it, pos, j, preds, None)

    X = state[obs][:, preds]
    y = state[obs, j]
    fp = cfg.forest
    params = ForestParams(
        num_trees=fp.num_trees,
        mtry=None if fp.mtry is None else min(fp.mtry, len(preds)),
        min_node_size=fp.min_node_size,
        max_depth=fp.max_depth,
        seed=_derive_seed(fp.seed, it, pos),
    )
    pred_kinds = [kinds[x] for x in preds]
    if kind.is_categorical:
        forest = fit_forest(X, y, pred_kinds, PROBABILITY, params, kind.n_levels, cfg.threads)
    else:
        forest = fit_forest(X, y, pred_kinds, REGRESSION, params, None, cfg.threads)
    apparent, oob, covered = forest.train_predict(cfg.threads)
    rec.n_oob = int(covered.sum())
    if kind.is_categorical:
        _categorical_record(rec, y, kind.n_levels, apparent, oob, covered)
    else:
        _continuous_record(rec, y, apparent, oob, covered)

    miss = mask[:, j]
    if miss.any():
        state[miss, j] = _predict_values(forest, state[miss][:, preds], cfg.threads)
    # training X is only needed for OOB predictions
    forest._train_X = None
    forest.inbag = None
    return StepModel(it, pos, j, preds, forest)


def _output(d: Dataset, state: np.ndarray, seq) -> Dataset:
    mask = d.mask.copy()
    mask[:, list(seq)] = False
    return d.replace(values=state, mask=mask)


def check_schema(model: ImputationModel, d: Dataset) -> None:
    if d.names != model.names:
        raise SchemaError(f"column names {d.names} do not match the model's {model.names}")
    for (name, kind), k2 in zip(model.schema, d.kinds):
        if kind != k2:
            raise SchemaError(f"column {name!r}: kind {k2} does not match the model's {kind}")


def transform(model: ImputationModel, d: Dataset, threads: int | None = None) -> Dataset:
    """Impute new observations by replaying the retained models in order."""
    check_schema(model, d)
    mask = d.mask
    for j, v in enumerate(model.init_values):
        if v is None and mask[:, j].any() and j in model.sequence:
            raise DataError(f"column {model.names[j]!r} has no initial value")
    state = _fill(d.values, mask, model.init_values)
    for step in model.retained_steps():
        if step.forest is None:
            continue
        miss = mask[:, step.target]
        if miss.any():
            state[miss, step.target] = _predict_values(step.forest, state[miss][:, step.predictors], threads)
    return _output(d, state, model.sequence)


def mean_mode_baseline(train: Dataset, test: Dataset, columns=None) -> Dataset:
    """Impute ``test`` with the mean/mode of the observed ``train`` values."""
    names = columns if columns is not None else train.names
    _, init = initialize(train, "mean_mode", names)
    idx = [train.index(n) for n in names]
    init = [v if j in idx else None for j, v in enumerate(init)]
    return _output(test, _fill(test.values, test.mask, init), idx)


__all__ = [
    "ImputerConfig",
    "ImputationModel",
    "ErrorTrace",
    "VariableRecord",
    "StepModel",
    "fit",
    "transform",
    "initialize",
    "imputation_order",
    "usable_case_stats",
    "usable_case_filter",
    "global_nmse",
    "mean_mode_baseline",
    "check_schema",
    "save_model",
    "load_model",
]


def save_model(model: ImputationModel, path) -> None:
    """Write ``model`` to ``path`` in the binary model format (see ``modelfile``)."""
    from .modelfile import save_model as _save

    _save(model, path)


def load_model(path) -> ImputationModel:
    """Read a model written by :func:`save_model`."""
    from .modelfile import load_model as _load

    return _load(path)
