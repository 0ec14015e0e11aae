"""Synthesis of the received signal: targets, multipath, noise, and SI.

Two receive paths are provided.  The fast frequency-domain path applies
per-path phase ramps directly on the resource grid (per-symbol constant
Doppler).  The time-domain path upsamples the transmit frame, runs it
through an optional polynomial PA model and a tapped-delay SI coupling,
adds continuously rotated target echoes and thermal noise, and decimates
back to the base rate; it is the input for the cancellation stages.

Randomness is split into two child streams (multipath, then noise) of the
given seed, so a realization is reproducible per path independently.
"""

from dataclasses import dataclass, field

import numpy as np

from .validation import as_complex_signal
from .waveform import SPEED_OF_LIGHT, ResourceGrid, TimeFrame, subcarrier_offsets


@dataclass(frozen=True)
class Target:
    """Point reflection: complex gain, two-way delay, Doppler shift."""

    gain: complex
    delay_s: float
    doppler_hz: float = 0.0

    def __post_init__(self):
        if self.delay_s < 0:
            raise ValueError("target delay must be non-negative")
        if not np.isfinite(self.gain):
            raise ValueError("target gain must be finite")

    @staticmethod
    def from_kinematics(distance_m, velocity_mps, gain=1.0, carrier_freq_hz=3.5e9):
        """Build a target from one-way distance and radial velocity."""
        return Target(
            gain=gain,
            delay_s=2.0 * distance_m / SPEED_OF_LIGHT,
            doppler_hz=2.0 * velocity_mps * carrier_freq_hz / SPEED_OF_LIGHT,
        )


@dataclass(frozen=True)
class MultipathSpec:
    """Indirect reflections of the first target.

    ``num_paths`` extra paths with exponentially distributed excess delays
    (mean ``rms_delay_spread_s``) and complex Gaussian gains scaled so
    their total power sits ``power_rel_db`` below the first target.  All
    paths inherit the first target's Doppler shift.
    """

    power_rel_db: float = -15.0
    rms_delay_spread_s: float = 100e-9
    num_paths: int = 8

    def __post_init__(self):
        if self.num_paths < 0:
            raise ValueError("num_paths must be >= 0")


@dataclass(frozen=True)
class SiCoupling:
    """Direct transmitter-to-receiver coupling.

    ``taps`` holds (delay_s, relative complex weight) pairs of the coupling
    channel (nanosecond-scale delays).  The weights are rescaled so the
    demodulated per-bin SI power sits ``si_to_noise_db`` above the grid
    noise variance; with ``si_to_noise_db=None`` the weights are absolute.
    ``pa_coeffs`` maps odd polynomial orders to coefficients of the PA
    model; alternatively ``pa_a3_dbc`` sets the third-order coefficient
    for a given distortion level at the frame's operating power.
    """

    taps: tuple = ((4e-9, 1.0),)
    si_to_noise_db: float = None
    pa_coeffs: dict = None
    pa_a3_dbc: float = None

    def __post_init__(self):
        if len(self.taps) == 0:
            raise ValueError("SI coupling needs at least one tap")
        for delay, gain in self.taps:
            if delay < 0 or not np.isfinite(gain):
                raise ValueError("SI tap delays must be >= 0 with finite gains")


@dataclass(frozen=True)
class Scene:
    targets: tuple = ()
    multipath: MultipathSpec = None
    noise_variance: float = 0.0
    si: SiCoupling = None

    def __post_init__(self):
        if self.noise_variance < 0:
            raise ValueError("noise variance must be >= 0")
        object.__setattr__(self, "targets", tuple(self.targets))


def gain_for_snr(snr_db, noise_variance):
    """Target gain giving the requested per-bin receiver input SNR."""
    return float(np.sqrt(noise_variance * 10.0 ** (snr_db / 10.0)))


def _rng_pair(seed):
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    mp_seq, noise_seq = seq.spawn(2)
    return np.random.default_rng(mp_seq), np.random.default_rng(noise_seq)


def _realize_multipath(scene, rng):
    """Expand the multipath spec into concrete (gain, delay, doppler) paths."""
    mp = scene.multipath
    if mp is None or mp.num_paths == 0 or not scene.targets:
        return []
    first = scene.targets[0]
    excess = rng.exponential(scale=mp.rms_delay_spread_s, size=mp.num_paths)
    raw = rng.standard_normal(mp.num_paths) + 1j * rng.standard_normal(mp.num_paths)
    total = abs(first.gain) ** 2 * 10.0 ** (mp.power_rel_db / 10.0)
    raw *= np.sqrt(total / np.sum(np.abs(raw) ** 2))
    return [
        Target(gain=g, delay_s=first.delay_s + d, doppler_hz=first.doppler_hz)
        for g, d in zip(raw, excess)
    ]


def _si_gains(scene, num):
    """SI tap weights scaled to the configured SI-to-noise level.

    The mean demodulated per-bin SI power of the tapped-delay channel is
    evaluated over the active band and used as the normalization, so the
    configured dB level is met exactly for a linear PA.
    """
    si = scene.si
    delays = np.array([t[0] for t in si.taps])
    gains = np.array([t[1] for t in si.taps], dtype=np.complex128)
    if si.si_to_noise_db is None:
        return delays, gains
    if scene.noise_variance <= 0:
        raise ValueError("si_to_noise_db needs a positive noise variance")
    offsets = subcarrier_offsets(num.active_subcarriers)
    response = np.exp(
        -2j * np.pi * np.outer(offsets * num.subcarrier_spacing_hz, delays)
    ) @ gains
    mean_power = np.mean(np.abs(response) ** 2)
    target = scene.noise_variance * 10.0 ** (si.si_to_noise_db / 10.0)
    return delays, gains * np.sqrt(target / mean_power)


def apply_scene_grid(tx, scene, seed=0):
    """Frequency-domain receive path.

    Each propagation path multiplies the grid by an outer product of a
    delay phase ramp across subcarrier offsets and a Doppler phase ramp
    across symbols; SI coupling taps enter as zero-Doppler paths (the PA
    model is ignored on this path).  Noise is i.i.d. circular complex
    Gaussian of the scene's variance.
    """
    num = tx.numerology
    mp_rng, noise_rng = _rng_pair(seed)
    paths = list(scene.targets) + _realize_multipath(scene, mp_rng)
    gains = [t.gain for t in paths]
    delays = [t.delay_s for t in paths]
    dopplers = [t.doppler_hz for t in paths]
    if scene.si is not None:
        si_delays, si_gains = _si_gains(scene, num)
        gains += list(si_gains)
        delays += list(si_delays)
        dopplers += [0.0] * len(si_delays)

    s, r = num.active_subcarriers, num.ofdm_symbols
    channel = np.zeros((s, r), dtype=np.complex128)
    if gains:
        offsets = subcarrier_offsets(s)[:, None] * num.subcarrier_spacing_hz
        symbols = np.arange(r)[None, :] * num.symbol_duration_s
        # (S, K) @ (K, R): one rank-1 term per path
        u = np.exp(-2j * np.pi * offsets * np.asarray(delays)[None, :])
        v = np.exp(2j * np.pi * np.asarray(dopplers)[:, None] * symbols)
        channel = (u * np.asarray(gains)[None, :]) @ v
    data = tx.data * channel
    if scene.noise_variance > 0:
        noise = noise_rng.standard_normal((s, r, 2)).view(np.complex128)[:, :, 0]
        data = data + np.sqrt(scene.noise_variance / 2.0) * noise
    return ResourceGrid(data=data, mask=np.ones((s, r), dtype=bool), numerology=num)


# ---------------------------------------------------------------------------
# time-domain path


def upsample_fft(x, factor):
    """Bandlimited upsampling by zero-insertion + ideal low-pass (via FFT).

    Exact for signals with no energy at the band edge; preserves the
    original samples at multiples of ``factor``.
    """
    x = as_complex_signal(x)
    if factor == 1:
        return x.copy()
    n = len(x)
    spec = np.fft.fft(x)
    out = np.zeros(n * factor, dtype=np.complex128)
    half = n // 2
    out[:half] = spec[:half]
    out[-(n - half):] = spec[half:]
    return np.fft.ifft(out) * factor


def downsample_fft(x, factor):
    """Ideal low-pass to the target band followed by decimation (via FFT)."""
    x = as_complex_signal(x)
    if factor == 1:
        return x.copy()
    if len(x) % factor:
        raise ValueError("signal length must be divisible by the decimation factor")
    n = len(x) // factor
    spec = np.fft.fft(x)
    half = n // 2
    kept = np.concatenate([spec[:half], spec[-(n - half):]])
    return np.fft.ifft(kept) / factor


def delay_signal(x, n_samples):
    """Delay by a whole number of samples, circularly over the frame.

    For delays within the cyclic prefix the wrapped head falls entirely in
    the first symbol's discarded CP, so the circular shift is equivalent to
    a physical delay for every demodulation window while keeping the
    FFT-based resampling exact (no edge discontinuity).
    """
    if n_samples < 0:
        raise ValueError("delay must be non-negative")
    if n_samples >= len(x):
        raise ValueError(f"delay of {n_samples} samples exceeds the frame")
    if n_samples == 0:
        return x.copy()
    return np.roll(x, n_samples)


def pa_apply(x, coeffs):
    """Odd-order baseband polynomial PA: sum_p a_p |x|^(p-1) x."""
    x = np.asarray(x)
    mag2 = np.abs(x) ** 2
    out = np.zeros_like(x)
    for order, coeff in sorted(coeffs.items()):
        if order % 2 == 0 or order < 1:
            raise ValueError("PA polynomial orders must be odd and >= 1")
        out = out + coeff * mag2 ** ((order - 1) // 2) * x
    return out


def pa_coeffs_for_dbc(x, a3_dbc, a1=1.0):
    """Third-order PA coefficients giving the requested distortion level.

    The level is defined as the power of the cubic branch relative to the
    linear branch at the operating power of ``x``.
    """
    x = np.asarray(x)
    m2 = np.mean(np.abs(x) ** 2)
    m6 = np.mean(np.abs(x) ** 6)
    a3 = abs(a1) * 10.0 ** (a3_dbc / 20.0) * np.sqrt(m2 / m6)
    return {1: complex(a1), 3: complex(a3)}


@dataclass(frozen=True)
class ReceiverStreams:
    """Oversampled station-internal signals for the cancellation stages."""

    tx: np.ndarray       # clean transmit samples (digital canceller reference)
    pa_out: np.ndarray   # PA output (RF canceller reference)
    rx: np.ndarray       # receiver input: SI + echoes + noise
    oversample: int
    numerology: object
    pa_coeffs: dict = field(default=None)

    @property
    def sample_rate_hz(self):
        return self.oversample * self.numerology.sample_rate_hz

    def to_base_rate(self, x=None):
        """Decimate an oversampled stream (default: rx) back to base rate."""
        return downsample_fft(self.rx if x is None else x, self.oversample)


def simulate_receiver(tx, scene, oversample=4, seed=0):
    """Run the time-domain receive chain at the oversampled rate.

    Returns the oversampled transmit reference, PA output, and receiver
    input so canceller experiments can tap the same points a hardware
    station would.  Delays (targets and SI taps) are quantized to the
    oversampled grid; echoes reflect the PA output and rotate continuously
    at their Doppler frequency; noise is calibrated so the demodulated
    per-bin variance equals the scene's ``noise_variance``.
    """
    num = tx.numerology
    factor = int(oversample)
    if factor < 1:
        raise ValueError("oversample factor must be >= 1")
    mp_rng, noise_rng = _rng_pair(seed)
    fs = factor * num.sample_rate_hz

    x_os = upsample_fft(tx.samples, factor)
    pa_coeffs = {1: 1.0}
    if scene.si is not None:
        if scene.si.pa_coeffs is not None:
            pa_coeffs = dict(scene.si.pa_coeffs)
        elif scene.si.pa_a3_dbc is not None:
            pa_coeffs = pa_coeffs_for_dbc(x_os, scene.si.pa_a3_dbc)
    pa_os = pa_apply(x_os, pa_coeffs) if pa_coeffs != {1: 1.0} else x_os.copy()

    rx = np.zeros_like(x_os)
    if scene.si is not None:
        si_delays, si_gains = _si_gains(scene, num)
        if scene.si.si_to_noise_db is not None:
            # calibration assumed a unit-gain channel input; the coupling
            # physically taps the PA output, so refer it back through a1
            si_gains = si_gains / abs(pa_coeffs.get(1, 1.0))
        for delay, gain in zip(si_delays, si_gains):
            rx += gain * delay_signal(pa_os, int(round(delay * fs)))

    paths = list(scene.targets) + _realize_multipath(scene, mp_rng)
    if paths:
        t = np.arange(len(x_os)) / fs
        for path in paths:
            echo = path.gain * delay_signal(pa_os, int(round(path.delay_s * fs)))
            if path.doppler_hz:
                echo = echo * np.exp(2j * np.pi * path.doppler_hz * t)
            rx += echo

    if scene.noise_variance > 0:
        var = scene.noise_variance * num.fft_size * factor
        rx = rx + np.sqrt(var / 2.0) * (
            noise_rng.standard_normal(len(rx))
            + 1j * noise_rng.standard_normal(len(rx))
        )
    return ReceiverStreams(
        tx=x_os, pa_out=pa_os, rx=rx, oversample=factor,
        numerology=num, pa_coeffs=pa_coeffs,
    )


def apply_scene_time(tx, scene, oversample=4, seed=0):
    """Time-domain counterpart of apply_scene_grid, decimated to base rate."""
    streams = simulate_receiver(tx, scene, oversample=oversample, seed=seed)
    return TimeFrame(samples=streams.to_base_rate(), numerology=tx.numerology)
