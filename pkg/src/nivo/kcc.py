"""Kernel cross-correlator over 2-D circular shifts.

A ridge regressor is trained on every circular shift of a sample ``x`` at
once; because the kernel matrix is circulant the solution is an elementwise
division in the Fourier domain. Evaluating a query ``z`` gives the response
for all of its circular shifts, whose peak is the displacement between the
two signals.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft

from .errors import ConfigError, DataError


@dataclass(frozen=True, eq=False)
class KccParams:
    lam: float = 1e-4
    sigma: float = 0.2
    target: object = "gaussian"  # "gaussian" | "onehot" | explicit 2-D array
    target_sigma: float = 1.0
    psr_exclusion_radius: int = 5
    kernel: str = "gaussian"  # "gaussian" | "linear"

    def __post_init__(self):
        if not self.lam >= 0:
            raise ConfigError(f"kcc.lambda must be >= 0, got {self.lam}")
        if not self.sigma > 0:
            raise ConfigError(f"kcc.sigma must be > 0, got {self.sigma}")
        if isinstance(self.target, str):
            if self.target not in ("gaussian", "onehot"):
                raise ConfigError(f"kcc.target must be 'gaussian', 'onehot' or an array, got {self.target!r}")
        else:
            t = np.asarray(self.target, dtype=np.float64)
            if t.ndim != 2 or not np.all(np.isfinite(t)):
                raise ConfigError("kcc.target array must be 2-D and finite")
            object.__setattr__(self, "target", t)
        if isinstance(self.target, str) and self.target == "gaussian" and not self.target_sigma > 0:
            raise ConfigError(f"kcc.target_sigma must be > 0, got {self.target_sigma}")
        if self.psr_exclusion_radius < 0:
            raise ConfigError("kcc.psr_exclusion_radius must be >= 0")
        if self.kernel not in ("gaussian", "linear"):
            raise ConfigError(f"kcc.kernel must be 'gaussian' or 'linear', got {self.kernel!r}")


@dataclass(frozen=True, eq=False)
class KccModel:
    x: np.ndarray
    x_spectrum: np.ndarray
    alpha_spectrum: np.ndarray
    x_norm_sq: float
    params: KccParams

    @property
    def shape(self):
        return self.x.shape


@dataclass(frozen=True, eq=False)
class CorrelationResult:
    peak_shift: tuple  # (rows, cols), z ~ roll(x, peak_shift)
    peak_value: float
    psr: float
    response: np.ndarray | None = field(default=None, repr=False)


def circular_offsets(shape):
    """Signed circular distance from index 0 along each axis, in (-N/2, N/2]."""
    return [wrap_shift(np.arange(n), n) for n in shape]


def wrap_shift(s, n):
    """Map shift ``s`` (mod ``n``) into ``(-n/2, n/2]``."""
    s = np.mod(s, n)
    return np.where(s > n // 2, s - n, s)


def target_response(shape, params: KccParams) -> np.ndarray:
    """Desired response ``y``: peak 1 at zero shift."""
    if not isinstance(params.target, str):
        if params.target.shape != tuple(shape):
            raise ConfigError(f"kcc.target shape {params.target.shape} does not match sample {tuple(shape)}")
        return params.target
    if params.target == "onehot":
        y = np.zeros(shape)
        y[0, 0] = 1.0
        return y
    di, dj = circular_offsets(shape)
    r2 = di[:, None] ** 2 + dj[None, :] ** 2
    return np.exp(-0.5 * r2 / params.target_sigma ** 2)


def _kernel_response(xf, x_norm_sq, zf, z_norm_sq, n, params: KccParams):
    """``h[m] = k(roll(z, m), x)`` for every 2-D shift ``m``."""
    c = fft.ifft2(xf * np.conj(zf)).real
    if params.kernel == "linear":
        return c
    d = np.maximum(x_norm_sq + z_norm_sq - 2.0 * c, 0.0)
    # squared distance per element: sigma is in intensity units, independent of image size
    return np.exp(-d / (params.sigma ** 2 * n))


def _check(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ConfigError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DataError(f"{name} contains non-finite values")
    return a


def train(x, params: KccParams = KccParams()) -> KccModel:
    """Fit ``F(alpha) = F(y) / (F(k^xx) + lambda)``."""
    x = _check(x, "training sample")
    xf = fft.fft2(x)
    x_norm_sq = float(np.sum(x * x))
    kxx = _kernel_response(xf, x_norm_sq, xf, x_norm_sq, x.size, params)
    yf = fft.fft2(target_response(x.shape, params))
    alphaf = yf / (fft.fft2(kxx) + params.lam)
    x.setflags(write=False)
    return KccModel(x, xf, alphaf, x_norm_sq, params)


def response_map(model: KccModel, z) -> np.ndarray:
    """``f`` over all circular shifts of ``z``: ``F(f) = F(k^zx) o F(alpha)``.

    Returned complex; the imaginary part is round-off only.
    """
    z = _check(z, "query")
    if z.shape != model.shape:
        raise ConfigError(f"query shape {z.shape} does not match model shape {model.shape}")
    zf = fft.fft2(z)
    kzx = _kernel_response(model.x_spectrum, model.x_norm_sq, zf, float(np.sum(z * z)), z.size,
                           model.params)
    return fft.ifft2(fft.fft2(kzx) * model.alpha_spectrum)


def psr(response, peak, exclusion_radius: int) -> float:
    """Peak-to-sidelobe ratio ``(peak - mean_s) / std_s``.

    The sidelobe is every pixel outside the ``(2r+1)^2`` window centred
    circularly on ``peak``. Zero sidelobe spread returns ``inf``.
    """
    response = np.asarray(response, dtype=np.float64)
    H, W = response.shape
    r = int(exclusion_radius)
    mask = np.ones((H, W), dtype=bool)
    rows = np.arange(peak[0] - r, peak[0] + r + 1) % H
    cols = np.arange(peak[1] - r, peak[1] + r + 1) % W
    mask[np.ix_(rows, cols)] = False
    side = response[mask]
    if side.size == 0:
        return float("inf")
    mu, sd = side.mean(), side.std()
    peak_value = response[peak[0], peak[1]]
    if sd <= 1e-12 * max(abs(peak_value), abs(mu), 1e-300):
        return float("inf")
    return float((peak_value - mu) / sd)


def detect(model: KccModel, z, keep_response=False) -> CorrelationResult:
    """Locate the displacement of ``z`` relative to the training sample."""
    resp = response_map(model, z).real
    flat = int(np.argmax(resp))
    i, j = divmod(flat, resp.shape[1])
    H, W = resp.shape
    # the response peaks at the shift that brings z back onto x
    shift = (int(wrap_shift(-i, H)), int(wrap_shift(-j, W)))
    value = float(resp[i, j])
    ratio = psr(resp, (i, j), model.params.psr_exclusion_radius)
    return CorrelationResult(shift, value, ratio, resp if keep_response else None)


def normalize_image(image, valid=None) -> np.ndarray:
    """Mean-subtract over valid pixels, zero the rest, scale to unit max magnitude."""
    img = np.asarray(image, dtype=np.float64)
    if valid is None:
        valid = np.ones(img.shape, dtype=bool)
    out = np.zeros_like(img)
    if not np.any(valid):
        return out
    vals = img[valid]
    vals = vals - vals.mean()
    peak = np.max(np.abs(vals))
    out[valid] = vals / peak if peak > 0 else 0.0
    return out
