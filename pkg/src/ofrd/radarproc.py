"""Subcarrier-domain radar processing chain.

Receive grid -> element-wise quotient (or matched filter) against the
known transmit grid -> linear interpolation across symbols at null
subcarriers -> windowed 2-D periodogram over a restricted range/Doppler
search space -> analytic CFAR threshold -> maximum-likelihood single-target
readout.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .waveform import SPEED_OF_LIGHT, validate_mask

DIVISION_GUARD = 1e-12


@dataclass(frozen=True)
class ProcessedGrid:
    """Quotient or matched-filter grid with its pre-interpolation mask."""

    data: np.ndarray
    mask: np.ndarray
    mode: str
    numerology: object


@dataclass(frozen=True)
class SearchSpace:
    """Feasible periodogram indices and their physical calibration.

    Range bins run 0..n_range_bins-1; Doppler bins run symmetrically from
    -max_doppler_bin..+max_doppler_bin, with negative indices wrapping to
    the top of the Doppler transform.
    """

    n_range_bins: int
    max_doppler_bin: int
    range_size: int        # inner (range) transform length S' >= S
    doppler_size: int      # outer (Doppler) transform length R' >= R
    distance_per_bin_m: float
    velocity_per_bin_mps: float

    def __post_init__(self):
        if self.n_range_bins < 1 or self.n_range_bins > self.range_size:
            raise ValueError("range bin count outside the transform size")
        if 2 * self.max_doppler_bin + 1 > self.doppler_size:
            raise ValueError("Doppler bin span exceeds the transform size")

    @property
    def n_cells(self):
        return self.n_range_bins * (2 * self.max_doppler_bin + 1)

    @property
    def doppler_bins(self):
        return np.arange(-self.max_doppler_bin, self.max_doppler_bin + 1)

    @staticmethod
    def from_numerology(num, range_size=None, doppler_size=None):
        """Limit delays to the cyclic prefix and Doppler to 10% of the spacing."""
        s_size = range_size or num.active_subcarriers
        r_size = doppler_size or num.ofdm_symbols
        df, ts = num.subcarrier_spacing_hz, num.symbol_duration_s
        n_range = int(np.floor(num.cp_length_s * s_size * df)) + 1
        max_dopp = int(np.floor(0.1 * df * ts * r_size))
        return SearchSpace(
            n_range_bins=min(n_range, s_size),
            max_doppler_bin=max_dopp,
            range_size=s_size,
            doppler_size=r_size,
            distance_per_bin_m=SPEED_OF_LIGHT / (2.0 * s_size * df),
            velocity_per_bin_mps=SPEED_OF_LIGHT
            / (2.0 * r_size * ts * num.carrier_freq_hz),
        )


@dataclass(frozen=True)
class RadarImage:
    """Range/Doppler power map over the restricted search space.

    ``values[s, j]`` is the periodogram at range bin s and Doppler bin
    ``space.doppler_bins[j]``.
    """

    values: np.ndarray
    space: SearchSpace

    def __post_init__(self):
        expect = (self.space.n_range_bins, 2 * self.space.max_doppler_bin + 1)
        if self.values.shape != expect:
            raise ValueError(f"image shape {self.values.shape}, expected {expect}")

    def distance_axis(self):
        return np.arange(self.space.n_range_bins) * self.space.distance_per_bin_m

    def velocity_axis(self):
        return self.space.doppler_bins * self.space.velocity_per_bin_mps


@dataclass(frozen=True)
class Detection:
    range_bin: int
    doppler_bin: int
    distance_m: float
    velocity_mps: float
    peak: float
    threshold: float


def process_grids(tx, rx, mode="quotient"):
    """Element-wise receive/transmit combination at the active bins.

    ``quotient`` divides (reflection-channel estimate); ``matched_filter``
    multiplies by the conjugate.  Inactive bins are left at zero and
    flagged in the mask for the interpolation stage.
    """
    if mode not in ("quotient", "matched_filter"):
        raise ValueError(f"unknown processing mode {mode!r}")
    if tx.data.shape != rx.data.shape:
        raise ValueError("transmit and receive grids differ in shape")
    mask = np.asarray(tx.mask, dtype=bool)
    out = np.zeros_like(rx.data)
    if mode == "quotient":
        ref = tx.data[mask]
        if np.any(np.abs(ref) < DIVISION_GUARD):
            raise ZeroDivisionError(
                "active transmit bin with near-zero magnitude; quotient "
                "processing needs a unit-modulus constellation"
            )
        out[mask] = rx.data[mask] / ref
    else:
        out[mask] = rx.data[mask] * np.conj(tx.data[mask])
    return ProcessedGrid(data=out, mask=mask, mode=mode, numerology=tx.numerology)


def interpolate_grid(grid):
    """Fill null subcarriers by linear interpolation along the symbol axis.

    Each inactive (p, q) between two active symbols q1 < q < q2 of the same
    subcarrier is filled linearly; positions before the first or after the
    last active symbol copy the nearest active value.  Active bins are
    never altered.  Fully inactive rows stay zero (excluded from
    processing); rows with a single active entry are rejected.
    """
    mask = validate_mask(grid.mask, grid.data.shape)
    if mask.all():
        return grid
    s, r = grid.data.shape
    idx = np.arange(r)[None, :]

    # index of the nearest active symbol at or before / after each position
    left = np.maximum.accumulate(np.where(mask, idx, -1), axis=1)
    right = np.minimum.accumulate(np.where(mask, idx, r)[:, ::-1], axis=1)[:, ::-1]

    has_left = left >= 0
    has_right = right < r
    left_c = np.clip(left, 0, r - 1)
    right_c = np.clip(right, 0, r - 1)
    vl = np.take_along_axis(grid.data, left_c, axis=1)
    vr = np.take_along_axis(grid.data, right_c, axis=1)

    span = np.where(right > left, right - left, 1)
    frac = (idx - left) / span
    filled = np.where(
        has_left & has_right, vl + (vr - vl) * frac,
        np.where(has_left, vl, np.where(has_right, vr, 0.0)),
    )
    data = np.where(mask, grid.data, filled)
    return ProcessedGrid(
        data=data, mask=mask, mode=grid.mode, numerology=grid.numerology
    )


def make_window(name, n_subcarriers, n_symbols):
    """Separable 2-D taper: per-subcarrier and per-symbol 1-D windows."""
    if name == "rectangular":
        return np.ones(n_subcarriers), np.ones(n_symbols)
    if name == "hamming":
        return np.hamming(n_subcarriers), np.hamming(n_symbols)
    raise ValueError(f"unknown window {name!r}")


def window_energy(name, n_subcarriers, n_symbols):
    """Total squared window weight, the noise gain of the periodogram."""
    wp, wq = make_window(name, n_subcarriers, n_symbols)
    return float(np.sum(wp**2) * np.sum(wq**2))


def periodogram(grid, space, window="rectangular"):
    """Windowed 2-D periodogram restricted to the search space.

    Inner unnormalized inverse DFTs of length S' across subcarriers give
    per-symbol range profiles; outer forward DFTs of length R' across
    symbols give Doppler profiles; the squared magnitude is cropped to
    range bins 0..S_MAX-1 and Doppler bins -R_MAX..R_MAX (negative bins
    read from the top of the transform).
    """
    s, r = grid.data.shape
    if space.range_size < s or space.doppler_size < r:
        raise ValueError("transform sizes must be at least the grid size")
    if window == "rectangular":
        tapered = grid.data
    else:
        wp, wq = make_window(window, s, r)
        tapered = grid.data * wp[:, None] * wq[None, :]
    ranged = np.fft.ifft(tapered, n=space.range_size, axis=0) * space.range_size
    # rows outside the search space never contribute to the output
    ranged = ranged[: space.n_range_bins, :]
    full = np.abs(np.fft.fft(ranged, n=space.doppler_size, axis=1)) ** 2
    m = space.max_doppler_bin
    values = np.concatenate([full[:, space.doppler_size - m:], full[:, : m + 1]],
                            axis=1)
    return RadarImage(values=values, space=space)


def cfar_threshold(noise_variance, window, grid_shape, space, p_fa_total=0.1):
    """Detection threshold fixing the total false-alarm probability.

    Under noise only, each periodogram cell is exponential with mean equal
    to the per-bin noise variance times the window energy; the per-cell
    false-alarm rate is deflated by the search-space size and inverted
    through the exponential tail.
    """
    if noise_variance <= 0:
        raise ValueError("noise variance must be positive")
    if not 0.0 < p_fa_total < 1.0:
        raise ValueError("total false-alarm probability must lie in (0, 1)")
    energy = window_energy(window, *grid_shape)
    if energy <= 0:
        raise ValueError("degenerate window with zero energy")
    p_fa_cell = 1.0 - (1.0 - p_fa_total) ** (1.0 / space.n_cells)
    return -noise_variance * energy * np.log(p_fa_cell)


def detect_and_estimate(image, threshold):
    """Single-target readout: global argmax over the search space.

    Returns one detection when the peak exceeds the threshold, else an
    empty list.  Ties break toward the smallest range bin, then the
    smallest (most negative) Doppler bin.  No sub-pixel refinement.
    """
    values = image.values
    flat = int(np.argmax(values))  # row-major: smallest s, then smallest r
    s, j = np.unravel_index(flat, values.shape)
    peak = float(values[s, j])
    if peak <= threshold:
        return []
    r = int(image.space.doppler_bins[j])
    return [
        Detection(
            range_bin=int(s),
            doppler_bin=r,
            distance_m=s * image.space.distance_per_bin_m,
            velocity_mps=r * image.space.velocity_per_bin_mps,
            peak=peak,
            threshold=float(threshold),
        )
    ]


def resolutions(num, range_size=None, doppler_size=None):
    """Resolution and unambiguous-limit figures for a numerology.

    Resolutions follow the grid extent (S, R); bin spacings follow the
    transform sizes (S', R').
    """
    df, ts = num.subcarrier_spacing_hz, num.symbol_duration_s
    s_size = range_size or num.active_subcarriers
    r_size = doppler_size or num.ofdm_symbols
    return {
        "distance_resolution_m": SPEED_OF_LIGHT / (2.0 * num.active_subcarriers * df),
        "velocity_resolution_mps": SPEED_OF_LIGHT
        / (2.0 * num.ofdm_symbols * ts * num.carrier_freq_hz),
        "max_distance_m": SPEED_OF_LIGHT * num.cp_length_s / 2.0,
        "max_velocity_mps": 0.1 * df * SPEED_OF_LIGHT / (2.0 * num.carrier_freq_hz),
        "distance_per_bin_m": SPEED_OF_LIGHT / (2.0 * s_size * df),
        "velocity_per_bin_mps": SPEED_OF_LIGHT
        / (2.0 * r_size * ts * num.carrier_freq_hz),
    }


def processing_gain_db(n_subcarriers, n_symbols):
    """Coherent integration gain of the subcarrier processing, in dB."""
    if n_subcarriers < 1 or n_symbols < 1:
        raise ValueError("grid dimensions must be positive")
    return 10.0 * np.log10(n_symbols * n_subcarriers)


class OfdmRadarProcessor(BaseEstimator):
    """Estimator facade over the processing chain.

    ``fit`` binds the known transmit grid (a monostatic radar knows its own
    transmission) and precomputes the search space and CFAR threshold;
    ``transform`` maps receive grids to radar images and ``predict`` to
    detection lists, so the chain drops into standard estimator tooling.

    Parameters
    ----------
    window: str
        ``"rectangular"`` or ``"hamming"``.
    mode: str
        ``"quotient"`` or ``"matched_filter"``.
    noise_variance: float
        Grid-domain per-bin noise variance used for the threshold.
    p_fa_total: float
        Total false-alarm probability over the search space.
    range_size, doppler_size: int or None
        Transform lengths; default to the grid extent (no zero padding).
    interpolate: bool
        Fill null subcarriers before the periodogram.
    """

    def __init__(self, window="rectangular", mode="quotient", noise_variance=1.0,
                 p_fa_total=0.1, range_size=None, doppler_size=None,
                 interpolate=True):
        self.window = window
        self.mode = mode
        self.noise_variance = noise_variance
        self.p_fa_total = p_fa_total
        self.range_size = range_size
        self.doppler_size = doppler_size
        self.interpolate = interpolate

    def fit(self, tx_grid, y=None):
        self.tx_grid_ = tx_grid
        num = tx_grid.numerology
        self.space_ = SearchSpace.from_numerology(
            num, range_size=self.range_size, doppler_size=self.doppler_size
        )
        self.threshold_ = cfar_threshold(
            self.noise_variance, self.window, tx_grid.data.shape,
            self.space_, self.p_fa_total,
        )
        return self

    def transform(self, rx_grid):
        self._check_fitted()
        grid = process_grids(self.tx_grid_, rx_grid, mode=self.mode)
        if self.interpolate:
            grid = interpolate_grid(grid)
        return periodogram(grid, self.space_, window=self.window)

    def predict(self, rx_grid):
        self._check_fitted()
        return detect_and_estimate(self.transform(rx_grid), self.threshold_)

    def _check_fitted(self):
        if not hasattr(self, "tx_grid_"):
            raise RuntimeError("processor is not fitted; call fit(tx_grid) first")
