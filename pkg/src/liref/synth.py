"""Desk-scale light-field synthesizer: plane sweep, warp, residual optimization.

The synthesis pipeline mirrors the two-stage structure common in view
synthesis: estimate a disparity map from the sparse input views, warp the
central view to an approximate (Lambertian, occlusion-free) light field,
then optimize an additive per-sample residual against the reference under
a chosen loss configuration. The residual is a free parameter per sample,
which makes it the smallest differentiable synthesizer that exercises the
loss gradients end to end; comparisons between loss configurations are
made at an equal, fixed optimization budget, since any of them would reach
the reference given unlimited steps.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .lightfield import LightField, View, ViewSet, extract_sublightfields, sample_inputs
from .losses import LossSpec, value_and_gradient
from .metrics import QualityReport, quality_report
from .refocus import ShiftEngine, shift_image

DEFAULT_R_SWEEP = tuple(np.arange(-10, 11) * 0.25)


@dataclass(frozen=True)
class DisparityMap:
    """Per-pixel shift (pixels per unit angular step) plus the search used to find it."""

    values: np.ndarray
    d_min: float
    d_max: float
    d_step: float
    window: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("disparity map must be 2-D")
        if values.min() < self.d_min - 1e-12 or values.max() > self.d_max + 1e-12:
            raise ValueError("disparity values outside the declared search range")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class AdamParams:
    """First-order optimizer settings; defaults follow common practice."""

    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    epochs: int = 300

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("moment decay rates must lie in (0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 1:
            raise ValueError("need at least one epoch")


@dataclass
class SynthRun:
    """One residual optimization: inputs, loss trace, and the final prediction."""

    loss_spec: LossSpec
    adam: AdamParams
    history: np.ndarray  # (epochs, 3): total, view term, refocus term
    predicted: LightField
    initial_loss: float
    final_loss: float
    seconds: float
    inputs: ViewSet | None = None

    def __post_init__(self):
        if self.history.shape != (self.adam.epochs, 3):
            raise ValueError("loss history must hold one row per epoch")


class Adam:
    """Adaptive-moment gradient step over one parameter array."""

    def __init__(self, params: AdamParams):
        self.p = params
        self.t = 0
        self.m: np.ndarray | None = None
        self.v: np.ndarray | None = None

    def step(self, theta: np.ndarray, grad: np.ndarray) -> None:
        if self.m is None:
            self.m = np.zeros_like(theta)
            self.v = np.zeros_like(theta)
        self.t += 1
        p = self.p
        self.m *= p.beta1
        self.m += (1.0 - p.beta1) * grad
        self.v *= p.beta2
        self.v += (1.0 - p.beta2) * (grad * grad)
        m_hat = self.m / (1.0 - p.beta1 ** self.t)
        v_hat = self.v / (1.0 - p.beta2 ** self.t)
        theta -= p.learning_rate * m_hat / (np.sqrt(v_hat) + p.epsilon)


def plane_sweep_disparity(views: ViewSet, d_min: float, d_max: float, d_step: float,
                          window: int = 7) -> DisparityMap:
    """Winner-take-all disparity of the center view by scanning candidate shifts.

    For each candidate ``d`` every non-center view is resampled at
    ``x - d * (s, t)`` (bilinear, clamp) and compared to the center view;
    the per-pixel absolute differences are summed over channels and views
    and box-filtered over ``window``. Candidates are scanned in order of
    increasing ``|d|`` and a candidate must strictly improve the cost to
    win, so exact ties resolve toward the smallest magnitude.
    """
    if len(views) < 2:
        raise ValueError("plane sweep needs the center view plus at least one more")
    if d_step <= 0:
        raise ValueError("search step must be positive")
    if d_min > d_max:
        raise ValueError("empty disparity search range")
    count = int(np.floor((d_max - d_min) / d_step + 1e-9)) + 1
    candidates = sorted((d_min + k * d_step for k in range(count)), key=lambda d: (abs(d), d))
    center = views.center
    others = [v for v, role in zip(views.views, views.roles) if role != "center"]
    engine = ShiftEngine.bilinear("clamp")
    best_cost = np.full(center.data.shape[:2], np.inf)
    best_d = np.zeros(center.data.shape[:2])
    for d in candidates:
        cost = np.zeros(center.data.shape[:2])
        for v in others:
            s, t = v.index
            shifted = shift_image(v.data, (d * s, d * t), engine)
            cost += np.sum(np.abs(center.data - shifted), axis=2)
        cost = ndimage.uniform_filter(cost, size=window, mode="nearest")
        better = cost < best_cost
        best_cost[better] = cost[better]
        best_d[better] = d
    return DisparityMap(values=best_d, d_min=d_min, d_max=d_max, d_step=d_step, window=window)


def warp_synthesize(center: View, disparity: DisparityMap | np.ndarray,
                    target_indices: list[tuple[int, int]],
                    boundary: str = "clamp") -> LightField:
    """Backward-warp the center view to each target angular index.

    The view at angular ``(s, t)`` samples the center at
    ``x + disparity(x) * (s, t)`` with bilinear interpolation, so there are
    no holes. Target indices must form a full centered angular grid.
    """
    disp = disparity.values if isinstance(disparity, DisparityMap) else np.asarray(disparity)
    img = center.data
    if disp.shape != img.shape[:2]:
        raise ValueError(f"disparity shape {disp.shape} does not match view {img.shape[:2]}")
    n = max(max(abs(s), abs(t)) for s, t in target_indices)
    grid = 2 * n + 1
    if sorted(target_indices) != sorted((s - n, t - n) for s in range(grid) for t in range(grid)):
        raise ValueError("target indices must form a full centered angular grid")
    h, w = img.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    out = np.empty((grid, grid, h, w, img.shape[2]))
    for s in range(-n, n + 1):
        for t in range(-n, n + 1):
            px = xs + disp * s
            py = ys + disp * t
            out[s + n, t + n] = _bilinear_sample(img, px, py, boundary)
    return LightField(out)


def _bilinear_sample(img: np.ndarray, px: np.ndarray, py: np.ndarray,
                     boundary: str) -> np.ndarray:
    """Bilinear lookup of ``img`` at spatially varying positions ``(px, py)``."""
    h, w = img.shape[:2]
    x0 = np.floor(px).astype(np.int64)
    y0 = np.floor(py).astype(np.int64)
    fx = (px - x0)[..., None]
    fy = (py - y0)[..., None]
    if boundary == "circular":
        x0m, x1m = x0 % w, (x0 + 1) % w
        y0m, y1m = y0 % h, (y0 + 1) % h
    else:
        x0m, x1m = np.clip(x0, 0, w - 1), np.clip(x0 + 1, 0, w - 1)
        y0m, y1m = np.clip(y0, 0, h - 1), np.clip(y0 + 1, 0, h - 1)
    top = (1 - fx) * img[y0m, x0m] + fx * img[y0m, x1m]
    bottom = (1 - fx) * img[y1m, x0m] + fx * img[y1m, x1m]
    return (1 - fy) * top + fy * bottom


def optimize_residual(initial: LightField, reference: LightField, spec: LossSpec,
                      adam: AdamParams = AdamParams(),
                      inputs: ViewSet | None = None) -> SynthRun:
    """Optimize an additive residual so ``initial + residual`` fits the reference.

    The residual starts at zero and is updated by Adam on the analytic loss
    gradient. The recorded history holds the loss at the start of each
    epoch; the final loss is evaluated after the last update and must
    improve on the start for the optimization to be considered healthy
    (not enforced here; asserted by the experiment driver's consumers).
    """
    if not initial.same_shape_as(reference):
        raise ValueError(f"light field shapes differ: {initial.samples.shape} vs {reference.samples.shape}")
    theta = np.zeros_like(initial.samples)
    optimizer = Adam(adam)
    history = np.empty((adam.epochs, 3))
    started = time.perf_counter()
    for epoch in range(adam.epochs):
        total, view_term, refocus_term, grad = value_and_gradient(
            initial.samples + theta, reference.samples, spec)
        if not np.isfinite(total):
            raise RuntimeError(
                f"non-finite loss {total!r} at epoch {epoch} for config {spec.token}")
        history[epoch] = (total, view_term, refocus_term)
        optimizer.step(theta, grad)
    predicted = LightField(initial.samples + theta)
    final = value_and_gradient(predicted.samples, reference.samples, spec)[0]
    return SynthRun(loss_spec=spec, adam=adam, history=history, predicted=predicted,
                    initial_loss=float(history[0, 0]), final_loss=float(final),
                    seconds=time.perf_counter() - started, inputs=inputs)


@dataclass(frozen=True)
class PipelineResult:
    """Synthesis of one sub-lightfield: initialization plus one run per config."""

    disparity: DisparityMap
    initial: LightField
    reference: LightField
    synthesized_indices: tuple[tuple[int, int], ...]
    runs: dict[str, SynthRun]
    reports: dict[str, QualityReport]


@dataclass(frozen=True)
class ExperimentResult:
    """All per-scene pipeline results of an experiment, plus fold bookkeeping."""

    scene_results: list[tuple[int, PipelineResult]]
    failures: list[tuple[int, str]]
    folds: list[list[int]] | None
    configs: tuple[str, ...]

    def reports_for(self, token: str) -> list[QualityReport]:
        return [res.reports[token] for _, res in self.scene_results]


def synthesize_views(lf: LightField, output_radius: int = 1,
                     d_min: float = 0.0, d_max: float = 1.5, d_step: float = 0.1,
                     window: int = 7) -> tuple[LightField, LightField, ViewSet, DisparityMap]:
    """Stage one of the pipeline: inputs -> disparity -> warped initialization.

    Returns ``(initial, reference, inputs, disparity)`` where both light
    fields cover the centered ``(2 * output_radius + 1)^2`` angular block
    of ``lf``: the initialization is warped from the central input view,
    the reference is cut from ``lf`` itself.
    """
    inputs = sample_inputs(lf)
    disparity = plane_sweep_disparity(inputs, d_min, d_max, d_step, window)
    n_out = output_radius
    targets = [(s, t) for s in range(-n_out, n_out + 1) for t in range(-n_out, n_out + 1)]
    initial = warp_synthesize(inputs.center, disparity, targets)
    n = lf.angular_radius
    block = lf.samples[n - n_out:n + n_out + 1, n - n_out:n + n_out + 1]
    return initial, LightField(block), inputs, disparity


def run_pipeline(lf: LightField, configs: list[LossSpec], adam: AdamParams = AdamParams(),
                 r_sweep=DEFAULT_R_SWEEP, output_radius: int = 1,
                 **sweep_kwargs) -> PipelineResult:
    """Full pipeline on one sub-lightfield: plane sweep, warp, one run per config.

    The ``(2 * output_radius + 1)^2`` output block includes the central
    input view; quality reports average the view-domain metrics over the
    non-input (actually synthesized) views.
    """
    initial, reference, inputs, disparity = synthesize_views(
        lf, output_radius=output_radius, **sweep_kwargs)
    synthesized = tuple((s, t) for s in range(-output_radius, output_radius + 1)
                        for t in range(-output_radius, output_radius + 1) if (s, t) != (0, 0))
    runs: dict[str, SynthRun] = {}
    reports: dict[str, QualityReport] = {}
    for spec in configs:
        run = optimize_residual(initial, reference, spec, adam, inputs=inputs)
        runs[spec.token] = run
        reports[spec.token] = quality_report(
            run.predicted, reference, list(synthesized), list(r_sweep),
            engine=spec.rie.engine, config=spec.token)
    return PipelineResult(disparity=disparity, initial=initial, reference=reference,
                          synthesized_indices=synthesized, runs=runs, reports=reports)


def kfold_partition(count: int, k: int) -> list[list[int]]:
    """Split ``range(count)`` into k contiguous folds, larger folds first."""
    if k < 1 or k > count:
        raise ValueError(f"cannot split {count} scenes into {k} folds")
    base, extra = divmod(count, k)
    folds, start = [], 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append(list(range(start, start + size)))
        start += size
    return folds


def run_experiment(scenes: list[LightField], configs: list[LossSpec],
                   adam: AdamParams = AdamParams(), r_sweep=DEFAULT_R_SWEEP,
                   kfold: int | None = None, sub_window: int = 5) -> ExperimentResult:
    """Run the synthesis pipeline per scene and config; failures are logged, not fatal.

    Scenes wider than ``sub_window`` views are first cut into
    ``sub_window x sub_window`` sub-lightfields and every block is
    processed. With ``kfold`` set, scenes are additionally partitioned into
    folds for grouped reporting (at desk scale each scene is optimized
    directly, so folds only group the evaluation).
    """
    if not scenes:
        raise ValueError("need at least one scene")
    if not configs:
        raise ValueError("need at least one loss configuration")
    tokens = tuple(spec.token for spec in configs)
    if len(set(tokens)) != len(tokens):
        raise ValueError("duplicate loss configurations")
    folds = kfold_partition(len(scenes), kfold) if kfold is not None else None
    scene_results: list[tuple[int, PipelineResult]] = []
    failures: list[tuple[int, str]] = []
    for index, scene in enumerate(scenes):
        try:
            blocks = (extract_sublightfields(scene, sub_window)
                      if scene.grid_size > sub_window else [scene])
            for block in blocks:
                scene_results.append((index, run_pipeline(block, configs, adam, r_sweep)))
        except Exception as exc:  # noqa: BLE001 - per-scene isolation is the contract
            failures.append((index, f"{type(exc).__name__}: {exc}"))
    return ExperimentResult(scene_results=scene_results, failures=failures,
                            folds=folds, configs=tokens)
