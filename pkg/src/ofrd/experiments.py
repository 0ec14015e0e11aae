"""Monte-Carlo experiment harness.

Each runner consumes a validated configuration, executes seeded trials
(optionally across a thread pool; per-trial seeds make the outputs
independent of scheduling), and writes CSV/binary artifacts plus a run
manifest into the output directory.
"""

import concurrent.futures
import hashlib
import json
import os
import time
from configparser import ConfigParser

import numpy as np

from . import __version__
from .canceller import MemoryPolynomialCanceller, RfCanceller, memory_polynomial_ls, mp_predict
from .fileio import write_radar_image
from .radarproc import OfdmRadarProcessor, SearchSpace
from .scene import (
    MultipathSpec,
    Scene,
    SiCoupling,
    Target,
    apply_scene_grid,
    gain_for_snr,
    simulate_receiver,
)
from .waveform import (
    SPEED_OF_LIGHT,
    demodulate,
    generate_tx_grid,
    make_numerology,
    modulate,
)


class ConfigError(ValueError):
    """Invalid or missing experiment configuration."""


_REQUIRED = object()

# section -> key -> (kind, default); kinds: int, float, str, bool,
# floats (comma list), opt_float ("" -> None)
SCHEMA = {
    "experiment": {
        "type": ("str", _REQUIRED),
        "seed": ("int", 12345),
        "trials": ("int", 500),
        "threads": ("int", 0),
    },
    "waveform": {
        "preset": ("str", "NR40"),
        "ofdm_symbols": ("int", 0),
        "mask": ("str", "full"),
        "mask_density": ("float", 0.9),
    },
    "scene": {
        "targets": ("str", ""),
        "distance_range_m": ("floats", (20.0, 200.0)),
        "velocity_range_mps": ("floats", (-40.0, 40.0)),
        "noise_variance": ("float", 1.0),
        "multipath_rel_db": ("opt_float", -15.0),
        "multipath_delay_spread_ns": ("float", 100.0),
        "multipath_paths": ("int", 8),
        "si_levels_db": ("floats", ()),
        "si_tap_delays_ns": ("floats", (4.0,)),
        "si_tap_gains_db": ("floats", ()),
        "pa_a3_dbc": ("opt_float", None),
    },
    "radar": {
        "window": ("str", "rectangular"),
        "p_fa_total": ("float", 0.1),
        "range_pad": ("int", 1),
        "doppler_pad": ("int", 1),
    },
    "sweep": {
        "snr_db": ("floats", tuple(range(-45, -5, 5))),
    },
    "canceller": {
        "stage": ("str", "none"),
        "oversample": ("int", 4),
        "rf_tap_delays_ns": ("floats", (0.0, 4.17, 10.0)),
        "rf_block_len": ("int", 4096),
        "rf_passes": ("int", 12),
        "mu_rf": ("opt_float", None),
        "order": ("int", 11),
        "pre_taps": ("int", 5),
        "post_taps": ("int", 5),
        "mu_dsp": ("float", 0.5),
        "dsp_passes": ("int", 25),
        "train_samples": ("int", 100000),
    },
    "roc": {
        "images": ("int", 100),
        "target_distance_m": ("float", 40.0),
        "target_velocity_mps": ("float", 0.0),
        "target_snr_db": ("float", -20.0),
        "si_db": ("opt_float", None),
    },
    "isolation": {
        "taps_per_side": ("floats", (0, 1, 2, 3, 4, 5, 6, 7, 8)),
        "si_db": ("float", 60.0),
    },
}

EXPERIMENT_TYPES = ("pd_rmse", "si_masking", "roc", "isolation_sweep")


def _parse_value(kind, raw, where):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "str":
            return raw
        if kind == "bool":
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind == "floats":
            return tuple(float(v) for v in raw.split(",") if v.strip() != "")
        if kind == "opt_float":
            return None if raw == "" else float(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {kind}") from exc
    raise ConfigError(f"{where}: unknown schema kind {kind}")


def _format_value(kind, value):
    if value is None:
        return ""
    if kind == "floats":
        return ",".join(repr(float(v)) for v in value)
    if kind == "bool":
        return "true" if value else "false"
    if kind in ("float", "opt_float"):
        return repr(float(value))
    return str(value)


def validate_config(raw_sections):
    """Validate raw {section: {key: str}} against the schema with defaults."""
    cfg = {}
    for section, got in raw_sections.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key in got:
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown config key {section}.{key}")
    for section, keys in SCHEMA.items():
        cfg[section] = {}
        got = raw_sections.get(section, {})
        for key, (kind, default) in keys.items():
            if key in got:
                cfg[section][key] = _parse_value(kind, got[key], f"{section}.{key}")
            elif default is _REQUIRED:
                raise ConfigError(f"missing required config field {section}.{key}")
            else:
                cfg[section][key] = default
    if cfg["experiment"]["type"] not in EXPERIMENT_TYPES:
        raise ConfigError(
            f"experiment.type must be one of {', '.join(EXPERIMENT_TYPES)}"
        )
    if cfg["experiment"]["trials"] < 1:
        raise ConfigError("experiment.trials must be >= 1")
    if not cfg["sweep"]["snr_db"]:
        raise ConfigError("sweep.snr_db must be non-empty")
    return cfg


def load_config(path, overrides=()):
    """Parse an INI config file, apply key=value overrides, validate."""
    parser = ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    raw = {s: dict(parser.items(s)) for s in parser.sections()}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        dotted, value = item.split("=", 1)
        if "." not in dotted:
            raise ConfigError(f"override key {dotted!r} must be section.key")
        section, key = dotted.split(".", 1)
        raw.setdefault(section, {})[key] = value
    return validate_config(raw)


def dump_config(cfg):
    """Canonical INI text of a validated config (round-trips exactly)."""
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (kind, _) in keys.items():
            lines.append(f"{key} = {_format_value(kind, cfg[section][key])}")
        lines.append("")
    return "\n".join(lines)


def config_hash(cfg):
    return hashlib.sha256(dump_config(cfg).encode("ascii")).hexdigest()


def resolve_threads(cfg, override=None):
    if override:
        return max(1, int(override))
    if cfg["experiment"]["threads"]:
        return max(1, cfg["experiment"]["threads"])
    env = os.environ.get("OFRD_THREADS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def write_manifest(out_dir, cfg, artifacts, duration_s):
    manifest = {
        "tool_version": __version__,
        "config_hash": config_hash(cfg),
        "experiment": cfg["experiment"]["type"],
        "artifacts": sorted(str(a) for a in artifacts),
        "duration_s": duration_s,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="ascii") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# ---------------------------------------------------------------------------
# shared pieces


def _numerology(cfg):
    over = {}
    if cfg["waveform"]["ofdm_symbols"]:
        over["ofdm_symbols"] = cfg["waveform"]["ofdm_symbols"]
    return make_numerology(cfg["waveform"]["preset"], **over)


def _multipath(cfg):
    scene = cfg["scene"]
    if scene["multipath_rel_db"] is None or scene["multipath_paths"] == 0:
        return None
    return MultipathSpec(
        power_rel_db=scene["multipath_rel_db"],
        rms_delay_spread_s=scene["multipath_delay_spread_ns"] * 1e-9,
        num_paths=scene["multipath_paths"],
    )


def _fixed_targets(cfg, num):
    """Targets from the 'd_m,v_mps,snr_db; ...' scene string."""
    text = cfg["scene"]["targets"].strip()
    if not text:
        return []
    out = []
    for chunk in text.split(";"):
        parts = [p for p in chunk.split(",") if p.strip() != ""]
        if len(parts) != 3:
            raise ConfigError(
                "scene.targets entries must be distance_m,velocity_mps,snr_db"
            )
        d, v, snr = (float(p) for p in parts)
        out.append(
            Target.from_kinematics(
                d, v, gain=gain_for_snr(snr, cfg["scene"]["noise_variance"]),
                carrier_freq_hz=num.carrier_freq_hz,
            )
        )
    return out


def _si_coupling(cfg, si_db):
    if si_db is None:
        return None
    delays = cfg["scene"]["si_tap_delays_ns"]
    gains_db = cfg["scene"]["si_tap_gains_db"] or (0.0,) * len(delays)
    if len(gains_db) != len(delays):
        raise ConfigError(
            "scene.si_tap_gains_db must match si_tap_delays_ns in length"
        )
    # fixed phase ramp across taps keeps multi-tap channels complex-valued
    taps = tuple(
        (d * 1e-9, 10.0 ** (g / 20.0) * np.exp(0.4j * k))
        for k, (d, g) in enumerate(zip(delays, gains_db))
    )
    return SiCoupling(taps=taps, si_to_noise_db=si_db,
                      pa_a3_dbc=cfg["scene"]["pa_a3_dbc"])


def _processor(cfg, noise_variance):
    num = _numerology(cfg)
    return OfdmRadarProcessor(
        window=cfg["radar"]["window"],
        noise_variance=noise_variance,
        p_fa_total=cfg["radar"]["p_fa_total"],
        range_size=cfg["radar"]["range_pad"] * num.active_subcarriers,
        doppler_size=cfg["radar"]["doppler_pad"] * num.ofdm_symbols,
    )


def _fmt(value):
    """Deterministic CSV number formatting."""
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return "nan"
    return f"{value:.10g}"


def _run_trials(worker, n_trials, threads):
    """Execute seeded trials, preserving trial order in the results."""
    if threads <= 1:
        return [worker(i) for i in range(n_trials)]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, range(n_trials)))


# ---------------------------------------------------------------------------
# detection-probability / RMSE sweep


def run_pd_rmse_sweep(cfg, out_dir, threads=None):
    """Single-target detection probability and estimation RMSE vs input SNR.

    Per trial, the target distance and velocity are drawn uniformly from
    the configured ranges, multipath and noise are realized from the trial
    seed, and a detection counts when the periodogram peak lands within
    one pixel of the truth on both axes.  RMSE is taken over detected
    trials only; a point with no detections reports nan.
    """
    os.makedirs(out_dir, exist_ok=True)
    started = time.monotonic()
    threads = resolve_threads(cfg, threads)
    num = _numerology(cfg)
    scene_cfg = cfg["scene"]
    noise_var = scene_cfg["noise_variance"]
    multipath = _multipath(cfg)
    proc = _processor(cfg, noise_var).fit(
        generate_tx_grid(num, cfg["waveform"]["mask"],
                         cfg["waveform"]["mask_density"],
                         seed=cfg["experiment"]["seed"])
    )
    space = proc.space_
    d_lo, d_hi = scene_cfg["distance_range_m"]
    v_lo, v_hi = scene_cfg["velocity_range_mps"]
    seed_base = cfg["experiment"]["seed"]
    n_trials = cfg["experiment"]["trials"]
    mask, density = cfg["waveform"]["mask"], cfg["waveform"]["mask_density"]

    def trial(snr_db, index):
        seq = np.random.SeedSequence(seed_base + index)
        draw_seq, grid_seq, scene_seq = seq.spawn(3)
        rng = np.random.default_rng(draw_seq)
        distance = rng.uniform(d_lo, d_hi)
        velocity = rng.uniform(v_lo, v_hi)
        target = Target.from_kinematics(
            distance, velocity, gain=gain_for_snr(snr_db, noise_var),
            carrier_freq_hz=num.carrier_freq_hz,
        )
        scene = Scene(targets=(target,), multipath=multipath,
                      noise_variance=noise_var)
        tx = generate_tx_grid(num, mask, density, seed=grid_seq)
        rx = apply_scene_grid(tx, scene, seed=scene_seq)
        local = OfdmRadarProcessor(**proc.get_params()).fit(tx)
        detections = local.predict(rx)
        if not detections:
            return False, 0.0, 0.0
        det = detections[0]
        s_true = distance / space.distance_per_bin_m
        r_true = velocity / space.velocity_per_bin_mps
        hit = (abs(det.range_bin - s_true) <= 1.0
               and abs(det.doppler_bin - r_true) <= 1.0)
        return hit, det.distance_m - distance, det.velocity_mps - velocity

    rows = []
    for snr_db in cfg["sweep"]["snr_db"]:
        results = _run_trials(lambda i: trial(snr_db, i), n_trials, threads)
        hits = [r for r in results if r[0]]
        n_hit = len(hits)
        if n_hit:
            d_rmse = float(np.sqrt(np.mean([r[1] ** 2 for r in hits])))
            v_rmse = float(np.sqrt(np.mean([r[2] ** 2 for r in hits])))
        else:
            d_rmse = v_rmse = float("nan")
        rows.append((snr_db, n_hit / n_trials, d_rmse, v_rmse, n_hit, n_trials))

    csv_path = os.path.join(out_dir, "pd_rmse.csv")
    with open(csv_path, "w", encoding="ascii") as fh:
        fh.write("snr_db,detection_probability,distance_rmse_m,"
                 "velocity_rmse_mps,trials_detected,trials\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row[:4])
                     + f",{row[4]},{row[5]}\n")
    write_manifest(out_dir, cfg, [csv_path], time.monotonic() - started)
    return {"csv": csv_path, "points": rows, "space": space}


# ---------------------------------------------------------------------------
# SI masking images


VISIBILITY_MARGIN_DB = 3.0


def target_visibility(image, target_distance_m, target_velocity_mps, threshold):
    """Peak and visibility of a known target against its local background.

    The peak is searched within one pixel of the true position.  The
    background is the median of flanking cells of the same Doppler row
    (range offsets 3..8 on both sides), the relevant reference when an SI
    ridge occupies the row.  The target counts as visible when its peak
    exceeds the CFAR threshold and stands at least 3 dB above that
    background; a target buried in SI sidelobes fails the margin even
    though the sidelobes themselves cross the threshold.
    """
    space = image.space
    values = image.values
    s_true = target_distance_m / space.distance_per_bin_m
    r_true = target_velocity_mps / space.velocity_per_bin_mps
    s_c = int(round(s_true))
    j_c = int(round(r_true)) + space.max_doppler_bin
    window = []
    for s in range(max(s_c - 1, 0), min(s_c + 2, values.shape[0])):
        for j in range(max(j_c - 1, 0), min(j_c + 2, values.shape[1])):
            window.append((values[s, j], s, j))
    peak, s_p, j_p = max(window)
    background_cells = [
        values[s, j_p]
        for off in range(3, 9)
        for s in (s_p - off, s_p + off)
        if 0 <= s < values.shape[0]
    ]
    background = float(np.median(background_cells))
    margin_db = float(10 * np.log10(peak / background))
    return {
        "peak": float(peak),
        "visible": bool(peak > threshold and margin_db >= VISIBILITY_MARGIN_DB),
        "peak_to_background_db": margin_db,
        "pixel": (s_p, j_p - space.max_doppler_bin),
    }


def run_si_masking(cfg, out_dir, threads=None):
    """Radar images of a fixed multi-target scene under swept SI levels.

    Emits one OFRD image per SI level plus a metrics CSV with each true
    target's peak, visibility, and peak-to-background ratio.
    """
    os.makedirs(out_dir, exist_ok=True)
    started = time.monotonic()
    num = _numerology(cfg)
    noise_var = cfg["scene"]["noise_variance"]
    targets = _fixed_targets(cfg, num)
    if not targets:
        raise ConfigError("si_masking needs explicit scene.targets")
    si_levels = cfg["scene"]["si_levels_db"] or (None,)
    seed = cfg["experiment"]["seed"]
    tx = generate_tx_grid(num, cfg["waveform"]["mask"],
                          cfg["waveform"]["mask_density"], seed=seed)
    proc = _processor(cfg, noise_var).fit(tx)

    artifacts = []
    metrics = []
    kinematics = [
        (t, 0.5 * t.delay_s * SPEED_OF_LIGHT,
         0.5 * t.doppler_hz * SPEED_OF_LIGHT / num.carrier_freq_hz)
        for t in targets
    ]
    for si_db in si_levels:
        scene = Scene(targets=targets, multipath=_multipath(cfg),
                      noise_variance=noise_var, si=_si_coupling(cfg, si_db))
        rx = apply_scene_grid(tx, scene, seed=seed)
        image = proc.transform(rx)
        label = "nosi" if si_db is None else f"si{si_db:g}db"
        path = os.path.join(out_dir, f"image_{label}.ofrd")
        write_radar_image(path, image)
        artifacts.append(path)
        for target, dist, vel in kinematics:
            vis = target_visibility(image, dist, vel, proc.threshold_)
            metrics.append((si_db if si_db is not None else float("nan"),
                            dist, vel, vis["peak"], proc.threshold_,
                            int(vis["visible"]), vis["peak_to_background_db"]))

    csv_path = os.path.join(out_dir, "si_masking_metrics.csv")
    with open(csv_path, "w", encoding="ascii") as fh:
        fh.write("si_db,distance_m,velocity_mps,peak,threshold,visible,"
                 "peak_to_background_db\n")
        for row in metrics:
            fh.write(",".join(_fmt(v) for v in row[:5])
                     + f",{row[5]}," + _fmt(row[6]) + "\n")
    artifacts.append(csv_path)
    write_manifest(out_dir, cfg, artifacts, time.monotonic() - started)
    return {"csv": csv_path, "images": artifacts[:-1], "metrics": metrics}


# ---------------------------------------------------------------------------
# empirical ROC


def _build_cancellers(cfg, streams):
    """Train the configured cancellation stages on SI-only streams."""
    stage = cfg["canceller"]["stage"]
    rf = digital = None
    n_train = min(cfg["canceller"]["train_samples"], len(streams.rx))
    rx_train = streams.rx[:n_train]
    if stage in ("rf", "rf_digital"):
        rf = RfCanceller(
            sample_rate_hz=streams.sample_rate_hz,
            tap_delays_s=tuple(d * 1e-9 for d in cfg["canceller"]["rf_tap_delays_ns"]),
            step_size=cfg["canceller"]["mu_rf"],
            block_len=cfg["canceller"]["rf_block_len"],
            n_passes=cfg["canceller"]["rf_passes"],
        )
        rf.fit(streams.pa_out[:n_train], rx_train)
        rx_train = rf.cancel(streams.pa_out[:n_train], rx_train)
    if stage in ("digital", "rf_digital"):
        digital = MemoryPolynomialCanceller(
            order=cfg["canceller"]["order"],
            pre_taps=cfg["canceller"]["pre_taps"],
            post_taps=cfg["canceller"]["post_taps"],
            step_size=cfg["canceller"]["mu_dsp"],
            n_passes=cfg["canceller"]["dsp_passes"],
        )
        digital.fit(streams.tx[:n_train], rx_train)
    return rf, digital


def _apply_cancellers(rf, digital, streams):
    residual = streams.rx
    if rf is not None:
        residual = rf.cancel(streams.pa_out, residual)
    if digital is not None:
        residual = digital.cancel(streams.tx, residual)
    return residual


def run_roc(cfg, out_dir, threads=None):
    """Empirical ROC from paired image sets with and without the probe target.

    The test statistic of each image is the periodogram maximum over the
    3x3 pixel block centred on the probe target's true position; the
    threshold sweeps the pooled statistics of both hypotheses.
    """
    os.makedirs(out_dir, exist_ok=True)
    started = time.monotonic()
    threads = resolve_threads(cfg, threads)
    num = _numerology(cfg)
    roc_cfg = cfg["roc"]
    noise_var = cfg["scene"]["noise_variance"]
    si_db = roc_cfg["si_db"]
    probe = Target.from_kinematics(
        roc_cfg["target_distance_m"], roc_cfg["target_velocity_mps"],
        gain=gain_for_snr(roc_cfg["target_snr_db"], noise_var),
        carrier_freq_hz=num.carrier_freq_hz,
    )
    clutter = tuple(_fixed_targets(cfg, num))
    scene_h0 = Scene(targets=clutter, noise_variance=noise_var,
                     si=_si_coupling(cfg, si_db))
    scene_h1 = Scene(targets=clutter + (probe,), noise_variance=noise_var,
                     si=_si_coupling(cfg, si_db))

    seed = cfg["experiment"]["seed"]
    stage = cfg["canceller"]["stage"]
    oversample = cfg["canceller"]["oversample"]
    proc_template = _processor(cfg, noise_var)
    space = SearchSpace.from_numerology(
        num,
        range_size=cfg["radar"]["range_pad"] * num.active_subcarriers,
        doppler_size=cfg["radar"]["doppler_pad"] * num.ofdm_symbols,
    )
    s_c = int(round(roc_cfg["target_distance_m"] / space.distance_per_bin_m))
    j_c = int(round(roc_cfg["target_velocity_mps"] / space.velocity_per_bin_mps))
    if not (1 <= s_c < space.n_range_bins - 1) or abs(j_c) > space.max_doppler_bin - 1:
        raise ConfigError("roc target block falls outside the search space")
    j_c += space.max_doppler_bin

    rf = digital = None
    if stage != "none":
        train_tx = generate_tx_grid(num, "full", seed=seed)
        train_streams = simulate_receiver(
            modulate(train_tx), scene_h0, oversample=oversample, seed=seed
        )
        rf, digital = _build_cancellers(cfg, train_streams)

    def statistic(scene, index):
        seq = np.random.SeedSequence(seed + 1 + index)
        grid_seq, scene_seq = seq.spawn(2)
        tx = generate_tx_grid(num, cfg["waveform"]["mask"],
                              cfg["waveform"]["mask_density"], seed=grid_seq)
        if stage == "none":
            rx = apply_scene_grid(tx, scene, seed=scene_seq)
        else:
            streams = simulate_receiver(modulate(tx), scene,
                                        oversample=oversample, seed=scene_seq)
            residual = _apply_cancellers(rf, digital, streams)
            rx_frame = streams.to_base_rate(residual)
            rx = demodulate(rx_frame, num)
        local = OfdmRadarProcessor(**proc_template.get_params()).fit(tx)
        image = local.transform(rx)
        block = image.values[s_c - 1: s_c + 2, j_c - 1: j_c + 2]
        return float(block.max())

    n_images = roc_cfg["images"]
    stats_h0 = np.asarray(_run_trials(lambda i: statistic(scene_h0, i),
                                      n_images, threads))
    stats_h1 = np.asarray(_run_trials(lambda i: statistic(scene_h1, i),
                                      n_images, threads))

    thresholds = np.unique(np.concatenate([stats_h0, stats_h1]))[::-1]
    rows = [(float(t),
             float(np.mean(stats_h0 >= t)),
             float(np.mean(stats_h1 >= t))) for t in thresholds]
    csv_path = os.path.join(out_dir, "roc.csv")
    with open(csv_path, "w", encoding="ascii") as fh:
        fh.write("threshold,p_fa,p_d\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    write_manifest(out_dir, cfg, [csv_path], time.monotonic() - started)
    return {"csv": csv_path, "points": rows,
            "stats_h0": stats_h0, "stats_h1": stats_h1}


# ---------------------------------------------------------------------------
# digital-canceller tap sweep


def _passband_power(x, sample_rate_hz, passband_hz):
    spec = np.abs(np.fft.fft(x)) ** 2 / len(x) ** 2
    freqs = np.fft.fftfreq(len(x), d=1.0 / sample_rate_hz)
    return float(np.sum(spec[np.abs(freqs) <= passband_hz / 2.0]))


def run_isolation_sweep(cfg, out_dir, threads=None):
    """Residual passband power vs digital-canceller tap count.

    SI-only scene; for each symmetric tap count the linear (order 1) and
    nonlinear (configured order) cancellers are solved by block least
    squares on the same training streams and the residual power inside the
    signal passband is integrated.
    """
    os.makedirs(out_dir, exist_ok=True)
    started = time.monotonic()
    num = _numerology(cfg)
    noise_var = cfg["scene"]["noise_variance"]
    scene = Scene(targets=(), noise_variance=noise_var,
                  si=_si_coupling(cfg, cfg["isolation"]["si_db"]))
    seed = cfg["experiment"]["seed"]
    oversample = cfg["canceller"]["oversample"]
    tx = generate_tx_grid(num, "full", seed=seed)
    streams = simulate_receiver(modulate(tx), scene,
                                oversample=oversample, seed=seed)
    n_train = min(cfg["canceller"]["train_samples"], len(streams.rx))
    x, y = streams.tx[:n_train], streams.rx[:n_train]
    passband = num.active_subcarriers * num.subcarrier_spacing_hz
    fs = streams.sample_rate_hz

    rows = []
    for taps in cfg["isolation"]["taps_per_side"]:
        taps = int(taps)
        sub = {}
        for label, order in (("linear", 1), ("nonlinear", cfg["canceller"]["order"])):
            coef = memory_polynomial_ls(x, y, order, taps, taps)
            residual = y - mp_predict(x, coef, order, taps, taps)
            sub[label] = 10 * np.log10(_passband_power(residual, fs, passband))
        rows.append((taps, 2 * taps + 1, sub["linear"], sub["nonlinear"]))

    uncancelled = 10 * np.log10(_passband_power(y, fs, passband))
    csv_path = os.path.join(out_dir, "isolation_sweep.csv")
    with open(csv_path, "w", encoding="ascii") as fh:
        fh.write("taps_per_side,total_taps,linear_residual_db,"
                 "nonlinear_residual_db\n")
        for row in rows:
            fh.write(f"{row[0]},{row[1]}," + _fmt(row[2]) + "," + _fmt(row[3]) + "\n")
    write_manifest(out_dir, cfg, [csv_path], time.monotonic() - started)
    return {"csv": csv_path, "rows": rows, "uncancelled_db": uncancelled}


RUNNERS = {
    "pd_rmse": run_pd_rmse_sweep,
    "si_masking": run_si_masking,
    "roc": run_roc,
    "isolation_sweep": run_isolation_sweep,
}


def run_experiment(cfg, out_dir, threads=None):
    return RUNNERS[cfg["experiment"]["type"]](cfg, out_dir, threads=threads)
