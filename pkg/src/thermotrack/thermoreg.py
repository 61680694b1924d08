"""Pixel-to-temperature calibration.

A fitted model maps the maximum 8-bit intensity inside a face region to a
temperature in degrees Celsius. The linear family (plain least squares,
ridge, lasso, elastic net) predicts exactly ``intercept + slope * pixel``;
the residual spread shows up as the training MSE and is never added back at
inference. Nearest-neighbor and regression-tree models round out the
comparison set; heavier ensemble regressors are deliberately out: they are
too slow for a live video loop on an edge board, though the ``ModelSpec``
contract leaves room to add them.

Model selection runs every grid point through seeded k-fold
cross-validation, ranks by CV error, and then applies a physiological
plausibility guard: a candidate that predicts above a fever ceiling on a
known-healthy screening population is rejected and the next-ranked
candidate is taken.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .frameio import atomic_write_text

LINEAR_KINDS = ("linear", "ridge", "lasso", "elastic_net")
MODEL_KINDS = LINEAR_KINDS + ("knn", "decision_tree")

MODEL_FORMAT = "thermotrack-model"
MODEL_FORMAT_VERSION = 1

DEFAULT_FEVER_CEILING_C = 38.0

_LAMBDA_GRID = (0.0, 0.01, 0.1, 1.0, 10.0, 100.0)
DEFAULT_GRIDS: dict[str, list[dict]] = {
    "linear": [{}],
    "ridge": [{"lambda": lam} for lam in _LAMBDA_GRID],
    "lasso": [{"lambda": lam} for lam in _LAMBDA_GRID],
    "elastic_net": [
        {"lambda": lam, "mix": mix} for lam in _LAMBDA_GRID for mix in (0.25, 0.5, 0.75)
    ],
    "knn": [{"k": k} for k in (1, 3, 5, 7)],
    "decision_tree": [
        {"max_depth": d, "min_samples_leaf": m} for d in (1, 2, 3, 4) for m in (1, 3, 5)
    ],
}

_CD_TOL = 1e-8
_CD_MAX_ITER = 10_000


class NonConvergenceError(RuntimeError):
    """Coordinate descent hit the iteration cap; carries the last iterate."""

    def __init__(self, message: str, last_slope: float):
        super().__init__(message)
        self.last_slope = last_slope


class NoViableModelError(RuntimeError):
    """Every ranked candidate failed the plausibility guard."""


@dataclass(frozen=True)
class CalibrationSample:
    """One calibration pair: max ROI intensity and contact-measured temperature."""

    max_pixel: float
    temperature_c: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.max_pixel) or not 0.0 <= self.max_pixel <= 255.0:
            raise ValueError(f"max_pixel {self.max_pixel!r} outside [0, 255]")
        if not math.isfinite(self.temperature_c) or not 0.0 <= self.temperature_c <= 60.0:
            raise ValueError(f"temperature_c {self.temperature_c!r} outside [0, 60]")


@dataclass
class FittedRegressor:
    """A trained pixel->temperature model.

    ``params`` holds the kind-specific fitted state (intercept/slope for the
    linear family, stored samples for knn, the split tree for trees);
    ``hyperparams`` the knobs it was fitted with; ``train_mse``/``train_r2``
    the in-sample diagnostics (R2 is NaN when the training temperatures are
    constant).
    """

    kind: str
    params: dict
    hyperparams: dict = field(default_factory=dict)
    train_mse: float = float("nan")
    train_r2: float = float("nan")
    training_digest: str = ""
    provenance: dict | None = None

    def predict(self, max_pixel: float) -> float:
        if self.kind in LINEAR_KINDS:
            return self.params["intercept"] + self.params["slope"] * max_pixel
        if self.kind == "knn":
            return self._predict_knn(max_pixel)
        if self.kind == "decision_tree":
            return self._predict_tree(max_pixel)
        raise ValueError(f"unknown model kind {self.kind!r}")

    def predict_batch(self, pixels: Iterable[float]) -> np.ndarray:
        return np.array([self.predict(float(p)) for p in pixels], dtype=float)

    def _predict_knn(self, query: float) -> float:
        pixels = self.params["pixels"]
        temps = self.params["temps"]
        k = self.params["k"]
        # Distance ties break toward the lower pixel value, then insertion order.
        order = sorted(range(len(pixels)), key=lambda i: (abs(pixels[i] - query), pixels[i], i))
        return sum(temps[i] for i in order[:k]) / k

    def _predict_tree(self, query: float) -> float:
        node = self.params["tree"]
        while node["kind"] == "split":
            node = node["left"] if query <= node["threshold"] else node["right"]
        return node["value"]


def _as_xy(samples: Sequence[CalibrationSample]) -> tuple[np.ndarray, np.ndarray]:
    p = np.array([s.max_pixel for s in samples], dtype=np.float64)
    t = np.array([s.temperature_c for s in samples], dtype=np.float64)
    return p, t


def _digest(samples: Sequence[CalibrationSample]) -> str:
    body = "\n".join(f"{s.max_pixel!r},{s.temperature_c!r}" for s in samples)
    return "sha256:" + hashlib.sha256(body.encode("ascii")).hexdigest()


def _with_diagnostics(model: FittedRegressor, samples: Sequence[CalibrationSample]) -> FittedRegressor:
    p, t = _as_xy(samples)
    preds = model.predict_batch(p)
    model.train_mse = mse(t, preds)
    sst = float(np.sum((t - t.mean()) ** 2))
    model.train_r2 = float("nan") if sst == 0.0 else r2(t, preds)
    model.training_digest = _digest(samples)
    return model


def _linear_core(p: np.ndarray, t: np.ndarray, lam: float) -> tuple[float, float]:
    p_bar = float(p.mean())
    t_bar = float(t.mean())
    sxx = float(np.sum((p - p_bar) ** 2))
    sxy = float(np.sum((p - p_bar) * (t - t_bar)))
    denom = sxx + lam
    if denom == 0.0:
        raise ValueError("all pixel values identical: slope is unidentifiable")
    slope = sxy / denom
    return t_bar - slope * p_bar, slope


def fit_ols(samples: Sequence[CalibrationSample]) -> FittedRegressor:
    """Least-squares line through the calibration pairs.

    Needs at least two samples with at least two distinct pixel values.
    """
    if len(samples) < 2:
        raise ValueError("need at least 2 samples")
    p, t = _as_xy(samples)
    if np.unique(p).size < 2:
        raise ValueError("need at least 2 distinct pixel values")
    intercept, slope = _linear_core(p, t, 0.0)
    model = FittedRegressor("linear", {"intercept": intercept, "slope": slope})
    return _with_diagnostics(model, samples)


def fit_ridge(samples: Sequence[CalibrationSample], lam: float) -> FittedRegressor:
    """L2-penalized line: slope = Sxy / (Sxx + lambda), intercept unpenalized.

    lambda = 0 reduces to fit_ols exactly (same arithmetic path).
    """
    if not math.isfinite(lam) or lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    if len(samples) < 2:
        raise ValueError("need at least 2 samples")
    p, t = _as_xy(samples)
    if lam == 0.0 and np.unique(p).size < 2:
        raise ValueError("need at least 2 distinct pixel values when lambda is 0")
    intercept, slope = _linear_core(p, t, lam)
    model = FittedRegressor("ridge", {"intercept": intercept, "slope": slope}, {"lambda": lam})
    return _with_diagnostics(model, samples)


def _coordinate_descent(
    pc: np.ndarray, tc: np.ndarray, lam: float, mix: float
) -> tuple[float, list[float]]:
    """Soft-threshold coordinate descent on centered data.

    Penalty is lam * (mix * |b| + (1 - mix) * b^2 / 2), so mix=0 matches the
    ridge closed form and mix=1 is the lasso. Returns the slope and the
    objective trajectory; the objective must never increase.
    """
    sxx = float(np.sum(pc * pc))
    sxy = float(np.sum(pc * tc))
    l1 = lam * mix
    l2 = lam * (1.0 - mix)

    def objective(b: float) -> float:
        resid = tc - b * pc
        return 0.5 * float(np.sum(resid * resid)) + l1 * abs(b) + 0.5 * l2 * b * b

    slope = 0.0
    trajectory = [objective(slope)]
    for _ in range(_CD_MAX_ITER):
        if sxx + l2 == 0.0:
            new_slope = 0.0  # no pixel variation and no quadratic penalty: stay at 0
        else:
            shrunk = math.copysign(max(abs(sxy) - l1, 0.0), sxy)
            new_slope = shrunk / (sxx + l2)
        obj = objective(new_slope)
        if obj > trajectory[-1] + 1e-9:
            raise AssertionError("coordinate descent objective increased")
        trajectory.append(obj)
        if abs(new_slope - slope) < _CD_TOL:
            return new_slope, trajectory
        slope = new_slope
    raise NonConvergenceError(
        f"no convergence after {_CD_MAX_ITER} iterations", last_slope=slope
    )


def _fit_penalized(
    samples: Sequence[CalibrationSample], lam: float, mix: float, kind: str, hyper: dict
) -> FittedRegressor:
    if not math.isfinite(lam) or lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    if len(samples) < 2:
        raise ValueError("need at least 2 samples")
    p, t = _as_xy(samples)
    if lam == 0.0 and np.unique(p).size < 2:
        raise ValueError("need at least 2 distinct pixel values when lambda is 0")
    p_bar = float(p.mean())
    t_bar = float(t.mean())
    slope, _ = _coordinate_descent(p - p_bar, t - t_bar, lam, mix)
    model = FittedRegressor(kind, {"intercept": t_bar - slope * p_bar, "slope": slope}, hyper)
    return _with_diagnostics(model, samples)


def fit_lasso(samples: Sequence[CalibrationSample], lam: float) -> FittedRegressor:
    """L1-penalized line via coordinate descent; large lambda zeroes the slope."""
    return _fit_penalized(samples, lam, 1.0, "lasso", {"lambda": lam})


def fit_elastic_net(samples: Sequence[CalibrationSample], lam: float, mix: float) -> FittedRegressor:
    """Blend of L1 and L2 penalties; mix=0 equals ridge, mix=1 equals lasso."""
    if not 0.0 <= mix <= 1.0:
        raise ValueError(f"mix must be in [0, 1], got {mix}")
    return _fit_penalized(samples, lam, mix, "elastic_net", {"lambda": lam, "mix": mix})


def fit_knn(samples: Sequence[CalibrationSample], k: int) -> FittedRegressor:
    """Store the samples; predict the unweighted mean of the k nearest by |dpixel|."""
    if not isinstance(k, int) or isinstance(k, bool) or not 1 <= k <= len(samples):
        raise ValueError(f"k must be in [1, {len(samples)}], got {k!r}")
    model = FittedRegressor(
        "knn",
        {
            "pixels": [s.max_pixel for s in samples],
            "temps": [s.temperature_c for s in samples],
            "k": k,
        },
        {"k": k},
    )
    return _with_diagnostics(model, samples)


def _build_tree(
    ps: np.ndarray, ts: np.ndarray, depth: int, max_depth: int, min_leaf: int
) -> dict:
    # ps is sorted ascending; ts rides along.
    if depth >= max_depth or ps.size < 2 * min_leaf or bool(np.all(ts == ts[0])):
        return {"kind": "leaf", "value": float(ts.mean())}
    boundaries = np.nonzero(ps[:-1] != ps[1:])[0]  # split between i and i+1
    left_sizes = boundaries + 1
    right_sizes = ps.size - left_sizes
    valid = (left_sizes >= min_leaf) & (right_sizes >= min_leaf)
    boundaries = boundaries[valid]
    if boundaries.size == 0:
        return {"kind": "leaf", "value": float(ts.mean())}
    # Total squared error of each candidate split via prefix sums:
    # SSE = sum(t^2) - (sum t)^2 / n on each side.
    s1 = np.cumsum(ts)
    s2 = np.cumsum(ts * ts)
    n_left = (boundaries + 1).astype(np.float64)
    n_right = ps.size - n_left
    sse_left = s2[boundaries] - s1[boundaries] ** 2 / n_left
    sse_right = (s2[-1] - s2[boundaries]) - (s1[-1] - s1[boundaries]) ** 2 / n_right
    best = int(np.argmin(sse_left + sse_right))  # ties: lowest threshold
    cut = int(boundaries[best])
    threshold = (float(ps[cut]) + float(ps[cut + 1])) / 2.0
    return {
        "kind": "split",
        "threshold": threshold,
        "left": _build_tree(ps[: cut + 1], ts[: cut + 1], depth + 1, max_depth, min_leaf),
        "right": _build_tree(ps[cut + 1 :], ts[cut + 1 :], depth + 1, max_depth, min_leaf),
    }


def fit_tree(
    samples: Sequence[CalibrationSample], max_depth: int, min_samples_leaf: int
) -> FittedRegressor:
    """Binary regression tree on pixel thresholds.

    Candidate thresholds are midpoints between consecutive distinct sorted
    pixel values; the split minimizing the summed squared error is taken.
    Growth stops at max_depth, at min_samples_leaf, or on a zero-variance
    node; leaves predict their mean temperature.
    """
    if not isinstance(max_depth, int) or max_depth < 0:
        raise ValueError(f"max_depth must be a non-negative integer, got {max_depth!r}")
    if not isinstance(min_samples_leaf, int) or min_samples_leaf < 1:
        raise ValueError(f"min_samples_leaf must be >= 1, got {min_samples_leaf!r}")
    if len(samples) < 2 * min_samples_leaf:
        raise ValueError(
            f"need at least {2 * min_samples_leaf} samples for min_samples_leaf={min_samples_leaf}"
        )
    p, t = _as_xy(samples)
    order = np.argsort(p, kind="stable")
    tree = _build_tree(p[order], t[order], 0, max_depth, min_samples_leaf)
    model = FittedRegressor(
        "decision_tree",
        {"tree": tree},
        {"max_depth": max_depth, "min_samples_leaf": min_samples_leaf},
    )
    return _with_diagnostics(model, samples)


def mse(truth: Sequence[float], pred: Sequence[float]) -> float:
    """Mean squared error in squared degrees Celsius."""
    t = np.asarray(truth, dtype=np.float64)
    y = np.asarray(pred, dtype=np.float64)
    if t.size == 0 or t.shape != y.shape:
        raise ValueError(f"need equal nonzero lengths, got {t.shape} and {y.shape}")
    return float(np.mean((t - y) ** 2))


def r2(truth: Sequence[float], pred: Sequence[float]) -> float:
    """Coefficient of determination: 1 - SSE / SST.

    Undefined (raises) when the truth vector is constant.
    """
    t = np.asarray(truth, dtype=np.float64)
    y = np.asarray(pred, dtype=np.float64)
    if t.size < 2 or t.shape != y.shape:
        raise ValueError(f"need equal lengths >= 2, got {t.shape} and {y.shape}")
    sst = float(np.sum((t - t.mean()) ** 2))
    if sst == 0.0:
        raise ValueError("truth is constant: R2 is undefined")
    return 1.0 - float(np.sum((t - y) ** 2)) / sst


@dataclass(frozen=True)
class ModelSpec:
    """A model kind plus hyperparameters; the open contract for adding
    further regressor families later."""

    kind: str
    hyperparams: Mapping

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")

    def fit(self, samples: Sequence[CalibrationSample]) -> FittedRegressor:
        h = self.hyperparams
        if self.kind == "linear":
            return fit_ols(samples)
        if self.kind == "ridge":
            return fit_ridge(samples, h["lambda"])
        if self.kind == "lasso":
            return fit_lasso(samples, h["lambda"])
        if self.kind == "elastic_net":
            return fit_elastic_net(samples, h["lambda"], h["mix"])
        if self.kind == "knn":
            return fit_knn(samples, h["k"])
        return fit_tree(samples, h["max_depth"], h["min_samples_leaf"])


@dataclass
class CrossValEntry:
    """CV scores for one grid point."""

    spec: ModelSpec
    mean_mse: float
    mean_r2: float
    fold_mses: list[float]
    fold_r2s: list[float]
    n_folds: int
    grid_index: int = 0


@dataclass
class CrossValReport:
    """All grid points, sorted best first, plus the sample statistics the
    scores were computed against."""

    entries: list[CrossValEntry]
    n_samples: int
    mean_temperature_c: float
    n_folds: int
    seed: int

    def to_text(self) -> str:
        lines = [
            f"samples={self.n_samples} mean_temperature_c={self.mean_temperature_c:.4f} "
            f"folds={self.n_folds} seed={self.seed}",
            f"{'rank':>4}  {'model':<13} {'hyperparams':<40} {'cv_mse':>12} {'cv_r2':>10}",
        ]
        for rank, entry in enumerate(self.entries, start=1):
            hyper = json.dumps(entry.spec.hyperparams, sort_keys=True)
            lines.append(
                f"{rank:>4}  {entry.spec.kind:<13} {hyper:<40} "
                f"{entry.mean_mse:>12.6f} {entry.mean_r2:>10.6f}"
            )
        return "\n".join(lines) + "\n"


def kfold_partition(n_samples: int, n_folds: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle, then contiguous folds whose sizes differ by at most one."""
    if not 2 <= n_folds <= n_samples:
        raise ValueError(f"n_folds must be in [2, {n_samples}], got {n_folds}")
    rng = np.random.default_rng(seed)
    return np.array_split(rng.permutation(n_samples), n_folds)


def k_fold_cv(
    samples: Sequence[CalibrationSample],
    spec: ModelSpec,
    k_folds: int,
    seed: int,
) -> CrossValEntry:
    """Cross-validate one grid point. Deterministic given the seed.

    Per-fold R2 is NaN when a fold's truth is constant (always the case for
    leave-one-out); the mean skips NaN folds and is NaN if none remain.
    """
    samples = list(samples)
    folds = kfold_partition(len(samples), k_folds, seed)
    fold_mses: list[float] = []
    fold_r2s: list[float] = []
    for fold in folds:
        held_out = set(int(i) for i in fold)
        train = [s for i, s in enumerate(samples) if i not in held_out]
        test = [samples[int(i)] for i in fold]
        try:
            model = spec.fit(train)
        except ValueError as exc:
            raise ValueError(f"fold underflow for {spec.kind}: {exc}") from exc
        truth = [s.temperature_c for s in test]
        preds = [model.predict(s.max_pixel) for s in test]
        fold_mses.append(mse(truth, preds))
        try:
            fold_r2s.append(r2(truth, preds))
        except ValueError:
            fold_r2s.append(float("nan"))
    defined = [v for v in fold_r2s if not math.isnan(v)]
    mean_r2 = sum(defined) / len(defined) if defined else float("nan")
    return CrossValEntry(
        spec=spec,
        mean_mse=sum(fold_mses) / len(fold_mses),
        mean_r2=mean_r2,
        fold_mses=fold_mses,
        fold_r2s=fold_r2s,
        n_folds=k_folds,
    )


def grid_search(
    samples: Sequence[CalibrationSample],
    grids: Mapping[str, Sequence[Mapping]] | None = None,
    k_folds: int = 5,
    seed: int = 0,
) -> CrossValReport:
    """Exhaustive CV over every grid point.

    Entries are ranked by ascending mean CV MSE, ties by descending mean CV
    R2 (NaN last), then by grid order. All points share one fold partition
    so scores are comparable.
    """
    samples = list(samples)
    if grids is None:
        grids = DEFAULT_GRIDS
    entries: list[CrossValEntry] = []
    grid_index = 0
    for kind, points in grids.items():
        if not points:
            raise ValueError(f"empty grid for {kind!r}")
        for point in points:
            entry = k_fold_cv(samples, ModelSpec(kind, dict(point)), k_folds, seed)
            entry.grid_index = grid_index
            entries.append(entry)
            grid_index += 1
    entries.sort(
        key=lambda e: (
            e.mean_mse,
            -(e.mean_r2 if not math.isnan(e.mean_r2) else -math.inf),
            e.grid_index,
        )
    )
    _, t = _as_xy(samples)
    return CrossValReport(
        entries=entries,
        n_samples=len(samples),
        mean_temperature_c=float(t.mean()),
        n_folds=k_folds,
        seed=seed,
    )


@dataclass
class GuardResult:
    """Outcome of screening a model against a known-healthy population."""

    passed: bool
    ceiling_c: float
    offending: list[tuple[float, float]]  # (pixel, predicted temperature)


def plausibility_guard(
    model: FittedRegressor,
    screening_pixels: Sequence[float],
    ceiling_c: float = DEFAULT_FEVER_CEILING_C,
) -> GuardResult:
    """Fail a model that predicts above ``ceiling_c`` for any screening pixel.

    The screening pixels should be max-ROI intensities from a population
    known to be afebrile, so any prediction above the ceiling is a model
    artifact, not a detection.
    """
    pixels = list(screening_pixels)
    if not pixels:
        raise ValueError("screening set must be nonempty")
    offending = []
    for px in pixels:
        pred = model.predict(float(px))
        if pred > ceiling_c:
            offending.append((float(px), pred))
    return GuardResult(passed=not offending, ceiling_c=ceiling_c, offending=offending)


def select_model(
    samples: Sequence[CalibrationSample],
    report: CrossValReport,
    screening_pixels: Sequence[float] | None = None,
    ceiling_c: float = DEFAULT_FEVER_CEILING_C,
) -> FittedRegressor:
    """Refit ranked candidates on the full sample set and return the first
    that passes the plausibility guard, with full provenance attached.

    With ``screening_pixels=None`` the guard is skipped and the top-ranked
    candidate wins. Raises NoViableModelError when no candidate passes.
    """
    rejected: list[dict] = []
    for rank, entry in enumerate(report.entries):
        model = entry.spec.fit(list(samples))
        if screening_pixels is None:
            guard_record: dict = {"screened": False, "passed": True}
        else:
            result = plausibility_guard(model, screening_pixels, ceiling_c)
            guard_record = {
                "screened": True,
                "passed": result.passed,
                "ceiling_c": result.ceiling_c,
                "offending": [[px, pred] for px, pred in result.offending],
            }
            if not result.passed:
                rejected.append(
                    {
                        "kind": entry.spec.kind,
                        "hyperparams": dict(entry.spec.hyperparams),
                        "rank": rank,
                        "offending_count": len(result.offending),
                    }
                )
                continue
        model.provenance = {
            "rank": rank,
            "grid_index": entry.grid_index,
            "cv_mean_mse": entry.mean_mse,
            "cv_mean_r2": entry.mean_r2,
            "n_folds": entry.n_folds,
            "seed": report.seed,
            "guard": guard_record,
            "rejected_before": rejected,
        }
        return model
    raise NoViableModelError("no candidate passed the plausibility guard")


def save_model(model: FittedRegressor, path: str | Path) -> None:
    """Persist a model as a versioned JSON text document.

    Floats are serialized through their shortest round-trip representation,
    so a reloaded linear-family model predicts bit-identically.
    """
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "kind": model.kind,
        "hyperparams": model.hyperparams,
        "params": model.params,
        "train_mse": model.train_mse,
        "train_r2": model.train_r2,
        "training_digest": model.training_digest,
        "provenance": model.provenance,
    }
    atomic_write_text(Path(path), json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_model(path: str | Path) -> FittedRegressor:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a {MODEL_FORMAT} document")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported version {doc.get('version')!r}")
    if doc.get("kind") not in MODEL_KINDS:
        raise ValueError(f"{path}: unknown model kind {doc.get('kind')!r}")
    return FittedRegressor(
        kind=doc["kind"],
        params=doc["params"],
        hyperparams=doc.get("hyperparams", {}),
        train_mse=doc.get("train_mse", float("nan")),
        train_r2=doc.get("train_r2", float("nan")),
        training_digest=doc.get("training_digest", ""),
        provenance=doc.get("provenance"),
    )


CALIBRATION_CSV_HEADER = ["max_pixel", "temperature_c"]


def load_calibration_csv(path: str | Path) -> list[CalibrationSample]:
    """Read calibration pairs from a ``max_pixel,temperature_c`` CSV."""
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty calibration file") from None
        if [h.strip() for h in header] != CALIBRATION_CSV_HEADER:
            raise ValueError(
                f"{path}: header must be {','.join(CALIBRATION_CSV_HEADER)}, got {header}"
            )
        samples = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                samples.append(CalibrationSample(float(row[0]), float(row[1])))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return samples


def save_calibration_csv(samples: Sequence[CalibrationSample], path: str | Path) -> None:
    lines = [",".join(CALIBRATION_CSV_HEADER)]
    lines += [f"{s.max_pixel!r},{s.temperature_c!r}" for s in samples]
    atomic_write_text(Path(path), "\n".join(lines) + "\n")
