"""On-disk formats: radar-image binary, axis sidecars, CSV, and PGM."""

import csv
import struct

import numpy as np

from .radarproc import Detection, RadarImage, SearchSpace

IMAGE_MAGIC = b"OFRD"
_HEADER = struct.Struct("<4sIII")  # magic, rows, cols, reserved


def image_sidecar_path(image_path):
    return str(image_path) + ".axes.txt"


def write_radar_image(path, image):
    """Write an image as the 16-byte OFRD header plus row-major float64.

    A text sidecar (``<path>.axes.txt``) carries the axis calibration.
    """
    values = np.ascontiguousarray(image.values, dtype="<f8")
    rows, cols = values.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(IMAGE_MAGIC, rows, cols, 0))
        fh.write(values.tobytes())
    space = image.space
    with open(image_sidecar_path(path), "w", encoding="ascii") as fh:
        fh.write(f"range_bins={rows}\n")
        fh.write(f"doppler_bins={cols}\n")
        fh.write(f"range_transform_size={space.range_size}\n")
        fh.write(f"doppler_transform_size={space.doppler_size}\n")
        fh.write(f"max_doppler_bin={space.max_doppler_bin}\n")
        fh.write(f"distance_per_bin_m={space.distance_per_bin_m!r}\n")
        fh.write(f"velocity_per_bin_mps={space.velocity_per_bin_mps!r}\n")


def read_radar_image(path):
    """Read an OFRD image back; the sidecar is optional (axes default to 1)."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise ValueError(f"{path}: truncated radar-image header")
        magic, rows, cols, _ = _HEADER.unpack(header)
        if magic != IMAGE_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}, expected {IMAGE_MAGIC!r}")
        payload = fh.read(rows * cols * 8)
    if len(payload) != rows * cols * 8:
        raise ValueError(f"{path}: truncated radar-image payload")
    values = np.frombuffer(payload, dtype="<f8").reshape(rows, cols)

    axes = {}
    try:
        with open(image_sidecar_path(path), "r", encoding="ascii") as fh:
            for line in fh:
                if "=" in line:
                    key, value = line.strip().split("=", 1)
                    axes[key] = value
    except FileNotFoundError:
        pass
    space = SearchSpace(
        n_range_bins=rows,
        max_doppler_bin=(cols - 1) // 2,
        range_size=int(axes.get("range_transform_size", rows)),
        doppler_size=int(axes.get("doppler_transform_size", cols)),
        distance_per_bin_m=float(axes.get("distance_per_bin_m", 1.0)),
        velocity_per_bin_mps=float(axes.get("velocity_per_bin_mps", 1.0)),
    )
    return RadarImage(values=values.copy(), space=space)


def write_detections_csv(path, detections):
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["range_bin", "doppler_bin", "distance_m", "velocity_mps",
             "peak", "threshold"]
        )
        for det in detections:
            writer.writerow(
                [det.range_bin, det.doppler_bin, f"{det.distance_m:.10g}",
                 f"{det.velocity_mps:.10g}", f"{det.peak:.10g}",
                 f"{det.threshold:.10g}"]
            )


def read_detections_csv(path):
    out = []
    with open(path, "r", newline="", encoding="ascii") as fh:
        for row in csv.DictReader(fh):
            out.append(
                Detection(
                    range_bin=int(row["range_bin"]),
                    doppler_bin=int(row["doppler_bin"]),
                    distance_m=float(row["distance_m"]),
                    velocity_mps=float(row["velocity_mps"]),
                    peak=float(row["peak"]),
                    threshold=float(row["threshold"]),
                )
            )
    return out


def render_pgm(image_values, path, floor_db=-60.0):
    """Render a power map as an 8-bit binary PGM with dB grayscale.

    The peak maps to white and anything ``floor_db`` below it (or an
    all-zero image) to black.
    """
    values = np.asarray(image_values, dtype=np.float64)
    peak = values.max(initial=0.0)
    if peak <= 0:
        pixels = np.zeros(values.shape, dtype=np.uint8)
    else:
        with np.errstate(divide="ignore"):
            db = 10.0 * np.log10(np.maximum(values, 0.0) / peak)
        level = np.clip(1.0 - db / floor_db, 0.0, 1.0)
        pixels = np.round(255.0 * level).astype(np.uint8)
    rows, cols = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())
    return pixels
