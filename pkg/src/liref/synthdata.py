"""Synthetic light fields: smooth random fields and occlusion test scenes.

The verification fields are spectrally tapered noise. On even-sized images
the self-conjugate DFT Nyquist bins are zeroed as well, because no
real-valued subpixel translation can carry those bins on a unit phase; the
closed-form refocus identities are exact precisely on this Nyquist-free
subspace (and everywhere on odd sizes).

The occlusion scenes render a textured background plane and a textured
foreground quad at two different disparities, so single-disparity warping
from the central view is wrong exactly around the quad's edges. That is
the failure mode refocus-domain losses are meant to clean up, which makes
these scenes the acceptance workload for loss comparisons.
"""

from __future__ import annotations

import numpy as np

from .lightfield import LightField
from .refocus import omega_grid


def _remove_nyquist(field: np.ndarray) -> np.ndarray:
    """Zero the self-conjugate Nyquist rows/columns of each view (even sizes only)."""
    h, w = field.shape[2], field.shape[3]
    if h % 2 != 0 and w % 2 != 0:
        return field
    spectra = np.fft.fft2(field, axes=(2, 3))
    if h % 2 == 0:
        spectra[:, :, h // 2, :, :] = 0.0
    if w % 2 == 0:
        spectra[:, :, :, w // 2, :] = 0.0
    return np.fft.ifft2(spectra, axes=(2, 3)).real


def _smooth(field: np.ndarray, smoothness: float) -> np.ndarray:
    """Attenuate high spatial frequencies with a periodic Gaussian taper."""
    if smoothness <= 0:
        return field
    h, w = field.shape[2], field.shape[3]
    wy, wx = omega_grid(h), omega_grid(w)
    taper = np.exp(-0.5 * smoothness ** 2 * (wy[:, None] ** 2 + wx[None, :] ** 2))
    spectra = np.fft.fft2(field, axes=(2, 3)) * taper[None, None, :, :, None]
    return np.fft.ifft2(spectra, axes=(2, 3)).real


def _rescale(field: np.ndarray, lo: float, hi: float) -> np.ndarray:
    fmin, fmax = field.min(), field.max()
    if fmax - fmin < 1e-12:
        return np.full_like(field, 0.5 * (lo + hi))
    return lo + (hi - lo) * (field - fmin) / (fmax - fmin)


def random_lightfield(rng: np.random.Generator, angular_radius: int, height: int,
                      width: int, channels: int = 1, smoothness: float = 0.0,
                      nyquist_free: bool = False, lo: float = 0.0,
                      hi: float = 1.0) -> LightField:
    """Random light field with optional spatial smoothing and Nyquist removal."""
    grid = 2 * angular_radius + 1
    field = rng.uniform(-1.0, 1.0, size=(grid, grid, height, width, channels))
    if smoothness > 0:
        field = _smooth(field, smoothness)
    if nyquist_free:
        field = _remove_nyquist(field)
    return LightField(_rescale(field, lo, hi))


def verification_pair(rng: np.random.Generator, angular_radius: int, height: int,
                      width: int, channels: int = 1) -> tuple[LightField, LightField]:
    """A (prediction, reference) pair suitable for the closed-form identity checks.

    Both fields are mildly smoothed noise; on even sizes their difference
    is kept Nyquist-free so the spectral-phase shift translates it exactly.
    """
    gt = random_lightfield(rng, angular_radius, height, width, channels,
                           smoothness=0.8, nyquist_free=True)
    noise = rng.normal(0.0, 0.08, size=gt.samples.shape)
    noise = _remove_nyquist(_smooth(noise, 0.8))
    return LightField(gt.samples + noise), gt


def constant_lightfield(value: float, angular_radius: int, height: int, width: int,
                        channels: int = 1) -> LightField:
    grid = 2 * angular_radius + 1
    return LightField(np.full((grid, grid, height, width, channels), float(value)))


def _smooth_texture(rng: np.random.Generator, height: int, width: int, channels: int,
                    smoothness: float, lo: float, hi: float) -> np.ndarray:
    tex = rng.uniform(-1.0, 1.0, size=(1, 1, height, width, channels))
    return _rescale(_smooth(tex, smoothness), lo, hi)[0, 0]


def _warp_plane(tex: np.ndarray, dx: float, dy: float) -> np.ndarray:
    """Bilinear resample of a periodic texture at ``x + (dx, dy)``."""
    h, w = tex.shape[:2]
    xs = (np.arange(w) + dx) % w
    ys = (np.arange(h) + dy) % h
    x0 = np.floor(xs).astype(int)
    y0 = np.floor(ys).astype(int)
    fx, fy = xs - x0, ys - y0
    x1, y1 = (x0 + 1) % w, (y0 + 1) % h
    row0 = (1 - fx)[None, :, None] * tex[:, x0] + fx[None, :, None] * tex[:, x1]
    return (1 - fy)[:, None, None] * row0[y0] + fy[:, None, None] * row0[y1]


def occlusion_scene(rng: np.random.Generator, angular_radius: int = 2, height: int = 32,
                    width: int = 32, channels: int = 1, background_disparity: float = 0.0,
                    foreground_disparity: float = 2.0) -> LightField:
    """Two textured planes at different disparities, the nearer one occluding.

    Each view places the background at ``background_disparity * (s, t)`` and
    composites a foreground quad moving at ``foreground_disparity * (s, t)``;
    the quad's mask moves with the foreground, so disoccluded background
    appears and disappears across views. The two textures live in disjoint
    intensity bands and the default foreground disparity exceeds the
    synthesizer's default plane-sweep search range, so warping from the
    central view leaves occlusion artifacts too large for a fixed small
    optimization budget to erase; that residual is what makes equal-budget
    loss comparisons informative.
    """
    grid = 2 * angular_radius + 1
    bg = _smooth_texture(rng, height, width, channels, 1.0, 0.02, 0.3)
    fg = _smooth_texture(rng, height, width, channels, 0.8, 0.7, 0.98)
    # hard-edged rectangular occluder at a random interior position; the
    # disjoint intensity bands make wrong-layer pixels cost at least ~0.4,
    # more than a 300-step optimizer at the default rate can traverse
    qh = int(rng.integers(height // 3, height // 2))
    qw = int(rng.integers(width // 3, width // 2))
    top = int(rng.integers(2, height - qh - 2))
    left = int(rng.integers(2, width - qw - 2))
    mask = np.zeros((height, width, 1))
    mask[top:top + qh, left:left + qw, 0] = 1.0
    views = np.empty((grid, grid, height, width, channels))
    for a in range(grid):
        for b in range(grid):
            s, t = a - angular_radius, b - angular_radius
            bg_view = _warp_plane(bg, background_disparity * s, background_disparity * t)
            fg_view = _warp_plane(fg, foreground_disparity * s, foreground_disparity * t)
            alpha = _warp_plane(mask, foreground_disparity * s, foreground_disparity * t)
            views[a, b] = alpha * fg_view + (1.0 - alpha) * bg_view
    return LightField(np.clip(views, 0.0, 1.0))


def occlusion_scenes(master_seed: int, count: int, **kwargs) -> list[LightField]:
    """Deterministic batch of occlusion scenes; scene ``i`` uses rng seed ``[master_seed, i]``."""
    return [occlusion_scene(np.random.default_rng([master_seed, i]), **kwargs)
            for i in range(count)]
