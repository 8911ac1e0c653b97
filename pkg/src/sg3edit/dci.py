"""Disentanglement / completeness / informativeness over a latent space.

Importance comes from per-attribute sparse linear regressors on the latent
coordinates (R[i][j] = |coefficient|). Disentanglement is one minus the
importance-weighted row entropy (base = number of factors); completeness
is the mirrored column statistic (base = number of codes); informativeness
is mean held-out R^2 clamped to [0, 1].
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import Lasso

from sg3edit.container import write_checkpoint
from sg3edit.errors import InsufficientSamples, SpaceMismatch
from sg3edit.generator.handle import GeneratorHandle
from sg3edit.geometry import IDENTITY_PARAMS
from sg3edit.latents import LatentW, LatentWPlus

MIN_SAMPLES = 10


@dataclass
class DCIConfig:
    alphas: tuple[float, ...] = (1e-4, 1e-3, 1e-2, 1e-1)
    holdout_fraction: float = 0.25
    standardize: bool = True
    seed: int = 0
    max_iter: int = 5000
    n_jobs: int = 1


@dataclass
class DCIReport:
    disentanglement: float
    completeness: float
    informativeness: float
    importance: np.ndarray
    per_code_weights: np.ndarray
    per_attribute_r2: np.ndarray = field(default_factory=lambda: np.zeros(0))
    space: str | None = None
    n_samples: int | None = None
    seed: int | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "space": self.space,
                "D": round(self.disentanglement, 6),
                "C": round(self.completeness, 6),
                "I": round(self.informativeness, 6),
                "n_samples": self.n_samples,
                "seed": self.seed,
            },
            sort_keys=True,
        )

    def save(self, path: str | Path) -> None:
        write_checkpoint(
            path,
            {
                "importance": self.importance,
                "per_code_weights": self.per_code_weights,
                "per_attribute_r2": self.per_attribute_r2,
            },
            {"kind": "dci_report", "summary": json.loads(self.to_json())},
        )


def _validate_importance(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    if r.ndim != 2:
        raise ValueError("importance matrix must be 2D (codes x factors)")
    if not np.all(np.isfinite(r)) or np.any(r < 0):
        raise ValueError("importance entries must be finite and nonnegative")
    if not np.any(r > 0):
        raise ValueError("importance matrix is identically zero")
    return r


def _normalized_entropy(p: np.ndarray, base_count: int) -> np.ndarray:
    """Entropy of rows of p, normalized to [0, 1]; all-zero rows score 1."""
    sums = p.sum(axis=1)
    out = np.ones(p.shape[0])
    if base_count <= 1:
        # A single category carries no entropy.
        out[sums > 0] = 0.0
        return out
    valid = sums > 0
    q = p[valid] / sums[valid][:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(q > 0, q * np.log(q), 0.0)
    out[valid] = -terms.sum(axis=1) / np.log(base_count)
    return out


def dci_scores(
    importance: np.ndarray,
    predictions: np.ndarray | None = None,
    targets: np.ndarray | None = None,
) -> DCIReport:
    """Scalar D/C/I from an importance matrix plus held-out predictions."""
    r = _validate_importance(importance)
    num_codes, num_factors = r.shape
    total = r.sum()

    # Aggregate as a ratio of sums so the analytic cases are exact: all-one
    # per-code scores give numerator == denominator bit-for-bit.
    code_entropy = _normalized_entropy(r, num_factors)
    per_code = 1.0 - code_entropy
    row_sums = r.sum(axis=1)
    code_weights = row_sums / total
    disentanglement = float(np.clip(np.sum(per_code * row_sums) / row_sums.sum(), 0.0, 1.0))

    factor_entropy = _normalized_entropy(r.T, num_codes)
    per_factor = 1.0 - factor_entropy
    col_sums = r.sum(axis=0)
    completeness = float(np.clip(np.sum(per_factor * col_sums) / col_sums.sum(), 0.0, 1.0))

    per_attribute_r2 = np.zeros(num_factors)
    informativeness = 0.0
    if predictions is not None and targets is not None:
        predictions = np.asarray(predictions, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.float64)
        if predictions.shape != targets.shape:
            raise ValueError("predictions and targets must have matching shapes")
        for j in range(num_factors):
            per_attribute_r2[j] = _r2(targets[:, j], predictions[:, j])
        informativeness = float(np.clip(per_attribute_r2, 0.0, 1.0).mean())

    return DCIReport(
        disentanglement=disentanglement,
        completeness=completeness,
        informativeness=informativeness,
        importance=r,
        per_code_weights=code_weights,
        per_attribute_r2=per_attribute_r2,
    )


def _r2(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    ss_res = float(np.sum((y_true - y_pred) ** 2))
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0.0:
        return 0.0 if ss_res > 0 else 1.0
    return 1.0 - ss_res / ss_tot


def fit_regressors(
    codes: np.ndarray,
    attributes: np.ndarray,
    config: DCIConfig | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-attribute sparse linear fits on latent coordinates.

    Returns (importance, held-out predictions, held-out targets). The L1
    strength is chosen per attribute from a small grid by held-out R^2.
    Rank deficiency only warns; duplicated samples produce identical fits.
    """
    cfg = config or DCIConfig()
    x = np.asarray(codes, dtype=np.float64)
    y = np.asarray(attributes, dtype=np.float64)
    if x.ndim == 3:
        x = x.reshape(x.shape[0], -1)
    if y.ndim == 1:
        y = y[:, None]
    n = x.shape[0]
    if n < MIN_SAMPLES:
        raise InsufficientSamples(f"need >= {MIN_SAMPLES} samples, got {n}")
    if y.shape[0] != n:
        raise ValueError("codes and attributes disagree on sample count")
    if y.shape[1] < 1:
        raise ValueError("need at least one attribute")

    if np.linalg.matrix_rank(x - x.mean(axis=0)) < min(x.shape[1], n - 1):
        warnings.warn("latent coordinates are rank-deficient; importances may spread")

    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(n)
    n_test = max(1, int(round(n * cfg.holdout_fraction)))
    test_idx, train_idx = order[:n_test], order[n_test:]

    x_mean = x[train_idx].mean(axis=0)
    x_scale = x[train_idx].std(axis=0)
    x_scale = np.where(x_scale > 1e-12, x_scale, 1.0)
    if cfg.standardize:
        xt = (x - x_mean) / x_scale
    else:
        xt = x

    def fit_attribute(j: int) -> tuple[np.ndarray, np.ndarray]:
        best = None
        for alpha in cfg.alphas:
            model = Lasso(alpha=alpha, max_iter=cfg.max_iter)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConvergenceWarning)
                model.fit(xt[train_idx], y[train_idx, j])
            pred = model.predict(xt[test_idx])
            score = _r2(y[test_idx, j], pred)
            if best is None or score > best[0]:
                best = (score, np.abs(model.coef_), pred)
        return best[1], best[2]

    importance = np.zeros((x.shape[1], y.shape[1]))
    predictions = np.zeros((n_test, y.shape[1]))
    if cfg.n_jobs > 1:
        # Attributes fit in parallel; results reduce in fixed column order,
        # so the report is identical to the serial run.
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=cfg.n_jobs) as pool:
            fitted = list(pool.map(fit_attribute, range(y.shape[1])))
    else:
        fitted = [fit_attribute(j) for j in range(y.shape[1])]
    for j, (coef, pred) in enumerate(fitted):
        importance[:, j] = coef
        predictions[:, j] = pred
    return importance, predictions, y[test_idx]


def run_dci_pipeline(
    handle: GeneratorHandle,
    space: str,
    n_samples: int,
    classifier_client,
    attributes: list[str],
    pseudo_align: bool = False,
    seed: int = 0,
    config: DCIConfig | None = None,
) -> DCIReport:
    """Sample a latent space, score synthesized images, fit, and report.

    ``pseudo_align`` feeds the classifiers pseudo-aligned renders when the
    generator is an unaligned one. The W+ space is rejected: codes with
    independently sampled rows render unnatural imagery, making classifier
    scores (and therefore the metrics) unreliable.
    """
    if space == "Wplus":
        raise SpaceMismatch(
            "DCI over W+ is not computed: independently sampled rows render "
            "unnatural images and classifier scores become unreliable"
        )
    if space not in ("Z", "W", "S"):
        raise SpaceMismatch(f"unknown space {space!r}")
    if n_samples < MIN_SAMPLES:
        raise InsufficientSamples(f"need >= {MIN_SAMPLES} samples")
    if not attributes:
        raise ValueError("need at least one attribute")

    z = handle.sample_z(n_samples, seed)
    w = handle.map_z_batch(z)
    do_align = pseudo_align and handle.config.alignment == "unaligned"
    w_bar = handle.stored_average_latent if do_align else None

    codes = np.zeros((n_samples, 0))
    scores = np.zeros((n_samples, len(attributes)))
    rows: list[np.ndarray] = []
    for i in range(n_samples):
        code = LatentWPlus.from_w(LatentW(w[i]))
        if space == "Z":
            rows.append(z[i])
        elif space == "W":
            rows.append(w[i])
        else:
            rows.append(handle.compute_styles(code).values)
        render_code = handle.pseudo_align(code, w_bar) if do_align else code
        image = handle.synthesize(render_code, IDENTITY_PARAMS)
        for j, attr in enumerate(attributes):
            scores[i, j] = classifier_client.score(image, attr)
    codes = np.stack(rows)

    importance, predictions, targets = fit_regressors(codes, scores, config)
    report = dci_scores(importance, predictions, targets)
    report.space = space
    report.n_samples = n_samples
    report.seed = seed
    return report


def format_table(reports: list[DCIReport]) -> str:
    """Text table of D/C/I rows, one per analyzed space."""
    header = f"{'Space':<8}{'Disent.':>10}{'Compl.':>10}{'Inform.':>10}"
    lines = [header, "-" * len(header)]
    for rep in reports:
        lines.append(
            f"{rep.space or '?':<8}"
            f"{rep.disentanglement:>10.3f}{rep.completeness:>10.3f}{rep.informativeness:>10.3f}"
        )
    return "\n".join(lines)
