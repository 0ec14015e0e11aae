"""OFDM waveform layer: numerologies, resource grids, and the OFDM modem.

Grid convention
---------------
A resource grid is an (S, R) complex matrix: S subcarrier rows by R OFDM
symbol columns.  Row p maps to the signed, DC-centred frequency offset
``offset(p)`` (in units of the subcarrier spacing), with the DC bin skipped:
rows 0..S/2-1 sit below DC, rows S/2..S-1 above it.  The DC bin never
carries data.  Active entries are unit-power QPSK symbols; inactive entries
are exactly zero.
"""

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299792458.0

QPSK = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / np.sqrt(2.0)


def _default_fft_size(n_subcarriers):
    # smallest power of two holding the active band at <= 90% utilization
    n = 1
    while n < n_subcarriers / 0.9:
        n *= 2
    return n


@dataclass(frozen=True)
class Numerology:
    """OFDM numerology: subcarrier spacing, CP, grid size, carrier."""

    subcarrier_spacing_hz: float
    cp_length_s: float
    active_subcarriers: int
    ofdm_symbols: int
    carrier_freq_hz: float = 3.5e9
    fft_size: int = 0
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        if self.subcarrier_spacing_hz <= 0:
            raise ValueError("subcarrier spacing must be positive")
        if self.cp_length_s < 0:
            raise ValueError("CP length must be non-negative")
        if self.carrier_freq_hz <= 0:
            raise ValueError("carrier frequency must be positive")
        if self.active_subcarriers < 2 or self.active_subcarriers % 2:
            raise ValueError("active subcarrier count must be even and >= 2")
        if self.ofdm_symbols < 1:
            raise ValueError("need at least one OFDM symbol")
        if self.fft_size == 0:
            object.__setattr__(
                self, "fft_size", _default_fft_size(self.active_subcarriers)
            )
        if self.fft_size < self.active_subcarriers + 1:
            raise ValueError("FFT size must exceed the active subcarrier count")

    @property
    def symbol_duration_s(self):
        return 1.0 / self.subcarrier_spacing_hz + self.cp_length_s

    @property
    def sample_rate_hz(self):
        return self.fft_size * self.subcarrier_spacing_hz

    @property
    def cp_samples(self):
        return int(round(self.cp_length_s * self.sample_rate_hz))

    @property
    def samples_per_symbol(self):
        return self.fft_size + self.cp_samples

    @property
    def frame_samples(self):
        return self.ofdm_symbols * self.samples_per_symbol


# 10 ms downlink frames at 3.5 GHz for the four reference carriers
PRESETS = {
    "LTE20": Numerology(15e3, 4.7e-6, 1200, 140, name="LTE20"),
    "NR20": Numerology(15e3, 4.7e-6, 1272, 140, name="NR20"),
    "NR40": Numerology(30e3, 2.3e-6, 1272, 280, name="NR40"),
    "NR100": Numerology(30e3, 2.3e-6, 3276, 280, name="NR100"),
}


def make_numerology(preset=None, **params):
    """Return a preset numerology by name, or build one from raw parameters.

    Parameters
    ----------
    preset: str, optional
        One of ``LTE20, NR20, NR40, NR100``.  When given, ``params`` may
        override individual fields (e.g. ``ofdm_symbols`` for a shorter
        frame).
    **params:
        Fields of :class:`Numerology` for a custom configuration.
    """
    if preset is not None:
        if preset not in PRESETS:
            raise ValueError(
                f"unknown preset {preset!r}; known: {', '.join(sorted(PRESETS))}"
            )
        base = PRESETS[preset]
        if not params:
            return base
        fields = {
            "subcarrier_spacing_hz": base.subcarrier_spacing_hz,
            "cp_length_s": base.cp_length_s,
            "active_subcarriers": base.active_subcarriers,
            "ofdm_symbols": base.ofdm_symbols,
            "carrier_freq_hz": base.carrier_freq_hz,
            "fft_size": base.fft_size,
            "name": base.name,
        }
        fields.update(params)
        return Numerology(**fields)
    return Numerology(**params)


def subcarrier_offsets(n_subcarriers):
    """Signed centred frequency offsets of the grid rows (DC skipped)."""
    p = np.arange(n_subcarriers)
    half = n_subcarriers // 2
    return np.where(p < half, p - half, p - half + 1)


def validate_mask(mask, shape=None):
    """Check the activity-mask invariants.

    Every subcarrier row must either be fully inactive (excluded from
    processing) or hold at least two active entries so that interpolation
    has bracketing points.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ValueError("mask must be 2-D (subcarriers x symbols)")
    if shape is not None and mask.shape != tuple(shape):
        raise ValueError(f"mask shape {mask.shape} does not match grid {shape}")
    if mask.shape[1] >= 2:  # single-symbol grids never interpolate
        counts = mask.sum(axis=1)
        bad = np.where(counts == 1)[0]
        if bad.size:
            raise ValueError(
                f"subcarrier rows {bad[:8].tolist()} have a single active entry; "
                "rows must be fully inactive or have >= 2 active entries"
            )
    return mask


@dataclass(frozen=True)
class ResourceGrid:
    """Frequency-domain grid (S x R) with its activity mask and numerology."""

    data: np.ndarray
    mask: np.ndarray
    numerology: Numerology

    def __post_init__(self):
        num = self.numerology
        expect = (num.active_subcarriers, num.ofdm_symbols)
        if self.data.shape != expect:
            raise ValueError(f"grid shape {self.data.shape}, expected {expect}")
        validate_mask(self.mask, self.data.shape)
        if np.any(self.data[~self.mask] != 0):
            raise ValueError("inactive grid entries must be exactly zero")


@dataclass(frozen=True)
class TimeFrame:
    """Time-domain frame of CP-prefixed OFDM symbols."""

    samples: np.ndarray
    numerology: Numerology

    def __post_init__(self):
        if len(self.samples) != self.numerology.frame_samples:
            raise ValueError(
                f"frame has {len(self.samples)} samples, expected "
                f"{self.numerology.frame_samples}"
            )

    @property
    def sample_rate_hz(self):
        return self.numerology.sample_rate_hz


def generate_tx_grid(num, mask_policy="full", density=0.9, seed=0):
    """Draw a deterministic QPSK transmit grid under a null-subcarrier policy.

    Parameters
    ----------
    num: Numerology
    mask_policy: str
        ``"full"`` activates every resource element; ``"uniform_random"``
        activates a random subset of ``round(density * S)`` subcarriers per
        OFDM symbol; any other value is treated as the path of a mask
        pattern file (see :func:`load_mask_pattern`).
    density: float
        Active fraction per symbol for the ``uniform_random`` policy.
    seed: int
        Fixes both the mask draw and the QPSK payload.
    """
    rng = np.random.default_rng(seed)
    s, r = num.active_subcarriers, num.ofdm_symbols
    if mask_policy == "full":
        mask = np.ones((s, r), dtype=bool)
    elif mask_policy == "uniform_random":
        if not 0.0 < density <= 1.0:
            raise ValueError("density must lie in (0, 1]")
        n_active = int(round(density * s))
        mask = np.zeros((s, r), dtype=bool)
        for q in range(r):
            mask[rng.choice(s, size=n_active, replace=False), q] = True
    else:
        mask = load_mask_pattern(mask_policy, num)
    validate_mask(mask, (s, r))
    if mask.all():
        data = QPSK[rng.integers(0, 4, size=(s, r))]
    else:
        data = np.zeros((s, r), dtype=np.complex128)
        data[mask] = QPSK[rng.integers(0, 4, size=int(mask.sum()))]
    return ResourceGrid(data=data, mask=mask, numerology=num)


def modulate(grid):
    """OFDM-modulate a resource grid into a CP-prefixed time frame.

    Per symbol, the S rows are placed at their DC-centred FFT bins and an
    unnormalized inverse DFT of size N is taken (time energy equals N times
    the grid column energy), then the last N_cp samples are prepended as
    the cyclic prefix.
    """
    num = grid.numerology
    n, n_cp = num.fft_size, num.cp_samples
    bins = subcarrier_offsets(num.active_subcarriers) % n
    spectrum = np.zeros((n, num.ofdm_symbols), dtype=np.complex128)
    spectrum[bins, :] = grid.data
    body = np.fft.ifft(spectrum, axis=0) * n
    symbols = np.concatenate([body[n - n_cp:, :], body], axis=0)
    return TimeFrame(samples=symbols.T.reshape(-1), numerology=num)


def demodulate(frame, num=None):
    """Recover the resource grid from a time frame (CP drop + forward DFT).

    The returned grid carries an all-active mask; the caller is expected to
    reapply the transmit mask, which only it knows.
    """
    num = num or frame.numerology
    samples = frame.samples if isinstance(frame, TimeFrame) else np.asarray(frame)
    if len(samples) != num.frame_samples:
        raise ValueError(
            f"frame length {len(samples)} does not match numerology "
            f"({num.frame_samples} samples)"
        )
    n, n_cp = num.fft_size, num.cp_samples
    symbols = samples.reshape(num.ofdm_symbols, num.samples_per_symbol)
    spectrum = np.fft.fft(symbols[:, n_cp:], axis=1) / n
    bins = subcarrier_offsets(num.active_subcarriers) % n
    data = spectrum[:, bins].T
    mask = np.ones(data.shape, dtype=bool)
    return ResourceGrid(data=data, mask=mask, numerology=num)


def load_mask_pattern(path, num):
    """Read a mask pattern file: one '0'/'1' line per OFDM symbol.

    The file must hold exactly R lines of exactly S characters; line q,
    character p gives the activity of subcarrier p in symbol q.
    """
    s, r = num.active_subcarriers, num.ofdm_symbols
    with open(path, "r", encoding="ascii") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if len(lines) != r:
        raise ValueError(f"mask pattern has {len(lines)} lines, expected {r}")
    mask = np.zeros((s, r), dtype=bool)
    for q, line in enumerate(lines):
        if len(line) != s or set(line) - {"0", "1"}:
            raise ValueError(
                f"mask pattern line {q + 1} must be {s} characters of '0'/'1'"
            )
        mask[:, q] = np.frombuffer(line.encode("ascii"), dtype=np.uint8) == ord("1")
    return validate_mask(mask, (s, r))


def save_mask_pattern(path, mask):
    """Write a mask in the pattern-file format accepted by load_mask_pattern."""
    mask = np.asarray(mask, dtype=bool)
    with open(path, "w", encoding="ascii") as fh:
        for q in range(mask.shape[1]):
            fh.write("".join("1" if a else "0" for a in mask[:, q]) + "\n")
