"""Linear least-squares translation of radio maps into floor plans.

Training stacks luminance-converted, area-downsampled image pairs as columns
(inputs Y, targets X, both P x T with P the working pixel count) and solves

    W = X Y^T (Y Y^T + alpha I)^(-1)

which minimizes the ridge-augmented mean squared training error. With
alpha = 0 the minimum-norm solution W = X pinv(Y) is returned, reproducing
the plain least-squares objective whenever Y Y^T is invertible. Prediction
is x_hat = W y, clipped to [0, 255]; the clamp post-processing min(x, x_hat)
consumes the ground truth and must be flagged as oracle-assisted wherever
its outputs are scored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import ShapeMismatchError, SingularSystemError
from .radiomap import RadioMap


@dataclass(frozen=True)
class LinearMap:
    """Fitted weights acting on vectorized working-resolution luminance."""

    weights: np.ndarray
    working_resolution: int
    ridge_alpha: float
    training_count: int = 0

    def __post_init__(self) -> None:
        p = self.working_resolution**2
        if self.weights.shape != (p, p):
            raise ValueError("weights must be square over the working pixel count")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")


def luminance(image: np.ndarray) -> np.ndarray:
    """Mean over RGB channels as float64; grayscale images pass through."""
    arr = np.asarray(image, dtype=float)
    if arr.ndim == 3:
        return arr.mean(axis=2)
    if arr.ndim == 2:
        return arr
    raise ShapeMismatchError(f"expected 2-d or 3-d image, got shape {arr.shape}")


def _overlap_matrix(n_in: int, n_out: int) -> np.ndarray:
    # Row i gives the fractional coverage of input cells by output cell i,
    # normalized so rows sum to one (exact area averaging for any size pair).
    edges_in = np.arange(n_in + 1) / n_in
    edges_out = np.arange(n_out + 1) / n_out
    lo = np.maximum.outer(edges_out[:-1], edges_in[:-1])
    hi = np.minimum.outer(edges_out[1:], edges_in[1:])
    return np.clip(hi - lo, 0.0, None) * n_out


def resample_area(image: np.ndarray, out_side: int) -> np.ndarray:
    """Area-weighted resampling of a 2-d grid to out_side x out_side."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise ShapeMismatchError("area resampling expects a 2-d grid")
    a = _overlap_matrix(img.shape[0], out_side)
    b = _overlap_matrix(img.shape[1], out_side)
    return a @ img @ b.T


def _as_working_vector(image, resolution: int) -> np.ndarray:
    if isinstance(image, RadioMap):
        image = image.rgb
    lum = luminance(image)
    if lum.shape != (resolution, resolution):
        lum = resample_area(lum, resolution)
    return lum.reshape(-1)


def fit_arrays(inputs: np.ndarray, targets: np.ndarray, alpha: float) -> np.ndarray:
    """Solve the normal equations on already-vectorized columns.

    inputs and targets are (P, T). alpha = 0 requests the minimum-norm
    plain least-squares solution.
    """
    y = np.asarray(inputs, dtype=float)
    x = np.asarray(targets, dtype=float)
    if y.ndim != 2 or x.ndim != 2 or y.shape != x.shape:
        raise ShapeMismatchError(
            f"inputs {y.shape} and targets {x.shape} must be matching (P, T) stacks"
        )
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if alpha == 0.0:
        if not np.any(y):
            raise SingularSystemError("inputs are identically zero; system has no information")
        return x @ np.linalg.pinv(y)
    gram = y @ y.T
    gram[np.diag_indices_from(gram)] += alpha
    try:
        factor = cho_factor(gram, lower=True)
    except LinAlgError as exc:  # pragma: no cover - PD for alpha > 0
        raise SingularSystemError(str(exc)) from exc
    return cho_solve(factor, y @ x.T).T


def default_alpha(inputs: np.ndarray) -> float:
    """Conditioning default: 1e-6 * trace(Y Y^T) / P."""
    y = np.asarray(inputs, dtype=float)
    return 1e-6 * float(np.sum(y * y)) / y.shape[0]


def fit(training_pairs, resolution: int = 64, alpha: float | None = None) -> LinearMap:
    """Fit the linear map on (radio map, floor plan) pairs.

    alpha=None applies the conditioning default; alpha=0 solves the plain
    least-squares objective.
    """
    if len(training_pairs) < 1:
        raise ValueError("at least one training pair is required")
    ys = []
    xs = []
    for rmap, plan in training_pairs:
        ys.append(_as_working_vector(rmap, resolution))
        xs.append(_as_working_vector(plan, resolution))
    y = np.stack(ys, axis=1)
    x = np.stack(xs, axis=1)
    if alpha is None:
        alpha = default_alpha(y)
    weights = fit_arrays(y, x, alpha)
    return LinearMap(weights=weights, working_resolution=resolution,
                     ridge_alpha=float(alpha), training_count=y.shape[1])


def predict_values(linear_map: LinearMap, radio_map) -> np.ndarray:
    """Raw linear prediction at working resolution, before clipping."""
    y = _as_working_vector(radio_map, linear_map.working_resolution)
    if y.shape[0] != linear_map.weights.shape[1]:
        raise ShapeMismatchError("radio map does not match the fitted resolution")
    r = linear_map.working_resolution
    return (linear_map.weights @ y).reshape(r, r)


def predict(linear_map: LinearMap, radio_map) -> np.ndarray:
    """Predicted floor plan as an RGB uint8 image at working resolution."""
    values = np.clip(predict_values(linear_map, radio_map), 0.0, 255.0)
    channel = np.rint(values).astype(np.uint8)
    return np.repeat(channel[:, :, None], 3, axis=2)


def oracle_clamp(prediction: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Entry-wise minimum with the ground truth.

    Ground-truth-assisted post-processing: downstream reports must mark any
    score computed on clamped output as oracle-assisted.
    """
    pred = np.asarray(prediction)
    true = np.asarray(truth)
    if pred.shape != true.shape:
        raise ShapeMismatchError(f"prediction {pred.shape} != truth {true.shape}")
    return np.minimum(pred, true)
