"""Image quality metrics and the quality report generator.

MAE/MSE/PSNR run on all channels; the structural metrics (SSIM, GMSD) run
on single-channel luma, so callers convert color inputs first. The report
generator produces one view-domain row (means over the synthesized views)
and one refocus-domain row per refocus value, matching the comparison
tables this package exists to reproduce the shape of.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lightfield import LightField, View, to_luma
from .losses import base_error
from .refocus import DEFAULT_ENGINE, Refocuser, ShiftEngine

PSNR_INF = math.inf

CSV_HEADER = "config,domain,r,mae,mse,psnr,ssim,gmsd"


@dataclass(frozen=True)
class SsimParams:
    """Structural-similarity settings: Gaussian window and stabilizers.

    Defaults are the standard ones for unit-range images: an 11x11 Gaussian
    window with sigma 1.5, stabilizers ``C1 = (0.01 * peak)^2``,
    ``C2 = (0.03 * peak)^2``, ``C3 = C2 / 2``, and unit exponents on the
    luminance, contrast, and structure terms.
    """

    window_size: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    peak: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.window_size % 2 == 0 or self.window_size < 3:
            raise ValueError("window size must be odd and at least 3")
        if min(self.sigma, self.k1, self.k2, self.peak) <= 0:
            raise ValueError("sigma, k1, k2, and peak must be positive")

    @property
    def c1(self) -> float:
        return (self.k1 * self.peak) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.peak) ** 2

    @property
    def c3(self) -> float:
        return self.c2 / 2.0

    def window(self) -> np.ndarray:
        half = self.window_size // 2
        g = np.exp(-((np.arange(self.window_size) - half) ** 2) / (2.0 * self.sigma ** 2))
        k = np.outer(g, g)
        return k / k.sum()


DEFAULT_SSIM = SsimParams()
DEFAULT_GMS_STABILIZER = 0.0026  # reference constant rescaled to unit-range inputs


@dataclass(frozen=True)
class ReportRow:
    """One line of a quality report; view-domain rows leave r/ssim/gmsd unset."""

    config: str
    domain: str  # "view" | "refocus"
    r: float | None
    mae: float
    mse: float
    psnr: float
    ssim: float | None = None
    gmsd: float | None = None


@dataclass(frozen=True)
class QualityReport:
    """View-domain means plus a refocus-parameter sweep of all five metrics."""

    rows: tuple[ReportRow, ...]

    def view_row(self) -> ReportRow:
        return next(r for r in self.rows if r.domain == "view")

    def refocus_rows(self) -> list[ReportRow]:
        return [r for r in self.rows if r.domain == "refocus"]

    def refocus_row_at(self, r: float) -> ReportRow:
        return next(row for row in self.refocus_rows() if abs(row.r - r) < 1e-9)


def _single_channel(x: np.ndarray | View, name: str) -> np.ndarray:
    img = x.data if isinstance(x, View) else np.asarray(x, dtype=np.float64)
    if img.ndim == 3:
        if img.shape[2] != 1:
            raise ValueError(f"{name} expects single-channel input; convert to luma first")
        img = img[:, :, 0]
    if img.ndim != 2:
        raise ValueError(f"{name} expects a 2-D image, got shape {img.shape}")
    return img


def psnr(x: np.ndarray | View, y: np.ndarray | View, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; identical inputs report +infinity."""
    if peak <= 0:
        raise ValueError("peak must be positive")
    mse = base_error(x, y, p=2)
    if mse == 0.0:
        return PSNR_INF
    return 10.0 * math.log10(peak * peak / mse)


def ssim(x: np.ndarray | View, y: np.ndarray | View,
         params: SsimParams = DEFAULT_SSIM) -> float:
    """Mean structural similarity over all fully valid window positions.

    Local means, variances, and covariance are taken under the Gaussian
    window; the luminance, contrast, and structure terms are multiplied
    with their configured exponents. Result lies in ``[-1, 1]`` and is 1
    exactly when the images match.
    """
    a = _single_channel(x, "ssim")
    b = _single_channel(y, "ssim")
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    win = params.window_size
    if a.shape[0] < win or a.shape[1] < win:
        raise ValueError(f"image {a.shape} smaller than the {win}x{win} window")
    kernel = params.window()

    def local_mean(img: np.ndarray) -> np.ndarray:
        windows = np.lib.stride_tricks.sliding_window_view(img, (win, win))
        return np.tensordot(windows, kernel, axes=([2, 3], [0, 1]))

    mu_a = local_mean(a)
    mu_b = local_mean(b)
    var_a = local_mean(a * a) - mu_a * mu_a
    var_b = local_mean(b * b) - mu_b * mu_b
    cov = local_mean(a * b) - mu_a * mu_b
    # weighted second moments can round slightly negative on flat patches
    var_a = np.maximum(var_a, 0.0)
    var_b = np.maximum(var_b, 0.0)
    sd_a, sd_b = np.sqrt(var_a), np.sqrt(var_b)
    luminance = (2 * mu_a * mu_b + params.c1) / (mu_a ** 2 + mu_b ** 2 + params.c1)
    contrast = (2 * sd_a * sd_b + params.c2) / (var_a + var_b + params.c2)
    structure = (cov + params.c3) / (sd_a * sd_b + params.c3)
    score = (luminance ** params.alpha) * (contrast ** params.beta) * (structure ** params.gamma)
    return float(np.mean(score))


def _prewitt_magnitude(img: np.ndarray) -> np.ndarray:
    """Gradient magnitude via 3x3 Prewitt operators with edge replication."""
    padded = np.pad(img, 1, mode="edge")
    cols = padded[:-2] + padded[1:-1] + padded[2:]
    gx = (cols[:, 2:] - cols[:, :-2]) / 3.0
    rows = padded[:, :-2] + padded[:, 1:-1] + padded[:, 2:]
    gy = (rows[2:] - rows[:-2]) / 3.0
    return np.sqrt(gx * gx + gy * gy)


def gmsd(reference: np.ndarray | View, distorted: np.ndarray | View,
         c: float = DEFAULT_GMS_STABILIZER) -> float:
    """Standard deviation of the pixel-wise gradient-magnitude similarity.

    Zero for identical inputs and for gradient-free (constant) pairs, where
    the similarity is 1 everywhere; larger means more structural
    distortion. Uses the population standard deviation.
    """
    if c <= 0:
        raise ValueError("stabilizer c must be positive")
    a = _single_channel(reference, "gmsd")
    b = _single_channel(distorted, "gmsd")
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    m_r = _prewitt_magnitude(a)
    m_d = _prewitt_magnitude(b)
    gms = (2.0 * m_r * m_d + c) / (m_r * m_r + m_d * m_d + c)
    return float(np.std(gms))


def _luma_plane(img: np.ndarray) -> np.ndarray:
    return to_luma(View(img)).data[:, :, 0]


def quality_report(pred: LightField, gt: LightField,
                   synthesized_indices: list[tuple[int, int]],
                   r_sweep: list[float] | np.ndarray,
                   engine: ShiftEngine = DEFAULT_ENGINE,
                   config: str = "eval",
                   ssim_params: SsimParams = DEFAULT_SSIM) -> QualityReport:
    """Per-view means over the synthesized views plus a refocus-domain sweep.

    View-domain row: MAE/MSE/PSNR averaged over the listed views only.
    Refocus-domain rows: all five metrics of the refocused pair at each
    refocus value (SSIM and GMSD on luma). Refocused intermediates stay
    unclamped.
    """
    if not pred.same_shape_as(gt):
        raise ValueError(f"light field shapes differ: {pred.samples.shape} vs {gt.samples.shape}")
    if len(synthesized_indices) == 0:
        raise ValueError("need at least one synthesized view index")
    maes, mses, psnrs = [], [], []
    for (s, t) in synthesized_indices:
        pv, gv = pred.view(s, t), gt.view(s, t)
        maes.append(base_error(pv, gv, p=1))
        mses.append(base_error(pv, gv, p=2))
        psnrs.append(psnr(pv, gv))
    rows = [ReportRow(config=config, domain="view", r=None,
                      mae=float(np.mean(maes)), mse=float(np.mean(mses)),
                      psnr=float(np.mean(psnrs)))]
    rp, rg = Refocuser(pred, engine), Refocuser(gt, engine)
    for r in r_sweep:
        img_p = rp.refocus(float(r))
        img_g = rg.refocus(float(r))
        rows.append(ReportRow(
            config=config, domain="refocus", r=float(r),
            mae=base_error(img_p, img_g, p=1),
            mse=base_error(img_p, img_g, p=2),
            psnr=psnr(img_p, img_g),
            ssim=ssim(_luma_plane(img_p), _luma_plane(img_g), ssim_params),
            gmsd=gmsd(_luma_plane(img_g), _luma_plane(img_p)),
        ))
    return QualityReport(rows=tuple(rows))


def _csv_cell(value: float | None) -> str:
    if value is None:
        return "NA"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(float(value))


def report_to_csv(report: QualityReport) -> str:
    """Render a report as CSV; view rows use NA for r/ssim/gmsd, infinities as 'inf'."""
    lines = [CSV_HEADER]
    for row in report.rows:
        lines.append(",".join([
            row.config, row.domain, _csv_cell(row.r), _csv_cell(row.mae),
            _csv_cell(row.mse), _csv_cell(row.psnr), _csv_cell(row.ssim),
            _csv_cell(row.gmsd),
        ]))
    return "\n".join(lines) + "\n"


def reports_to_csv(reports: list[QualityReport]) -> str:
    lines = [CSV_HEADER]
    for report in reports:
        for row in report.rows:
            lines.append(",".join([
                row.config, row.domain, _csv_cell(row.r), _csv_cell(row.mae),
                _csv_cell(row.mse), _csv_cell(row.psnr), _csv_cell(row.ssim),
                _csv_cell(row.gmsd),
            ]))
    return "\n".join(lines) + "\n"
