"""ofrd: baseband OFDM radar simulation with self-interference cancellation."""

__version__ = "0.1.0"

from .waveform import (  # noqa: F401
    PRESETS,
    SPEED_OF_LIGHT,
    Numerology,
    ResourceGrid,
    TimeFrame,
    demodulate,
    generate_tx_grid,
    load_mask_pattern,
    make_numerology,
    modulate,
    save_mask_pattern,
)
from .scene import (  # noqa: F401
    MultipathSpec,
    Scene,
    SiCoupling,
    Target,
    apply_scene_grid,
    apply_scene_time,
    gain_for_snr,
    pa_apply,
    pa_coeffs_for_dbc,
    simulate_receiver,
)
from .radarproc import (  # noqa: F401
    Detection,
    OfdmRadarProcessor,
    ProcessedGrid,
    RadarImage,
    SearchSpace,
    cfar_threshold,
    detect_and_estimate,
    interpolate_grid,
    periodogram,
    process_grids,
    processing_gain_db,
    resolutions,
)
from .canceller import (  # noqa: F401
    DivergenceError,
    MemoryPolynomialCanceller,
    RfCanceller,
    estimate_basis_correlation,
    load_canceller_state,
    memory_polynomial_ls,
    save_canceller_state,
)
from .fileio import (  # noqa: F401
    read_radar_image,
    render_pgm,
    write_detections_csv,
    write_radar_image,
)
