"""IF-signal synthesis and point-cloud recovery for a two-RX FMCW radar.

A frame is synthesized as complex (I/Q) baseband: each reflector contributes
one tone whose frequency encodes range, whose chirp-to-chirp phase step
encodes radial velocity, and whose RX-to-RX phase step encodes azimuth.
Recovery inverts exactly those three observables: FFT peak bin, two-chirp
phase difference, two-RX phase difference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .physics import (
    ChirpConfig,
    azimuth_phase,
    beat_frequency,
    doppler_phase,
    phase_at_range,
    range_from_beat,
    velocity_from_phase,
)
from .pointcloud import RadarPoint

#: Cap on reported SNR so that noiseless spectra stay finite [dB].
SNR_CAP_DB = 120.0

DEFAULT_THRESHOLD_DB = 12.0


@dataclass
class Reflector:
    """A point scatterer in the radar frame.

    ``radial_velocity`` is the range rate [m/s]: positive when receding.
    """

    position: np.ndarray
    radial_velocity: float = 0.0
    rcs_amplitude: float = 1.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        if self.rcs_amplitude < 0:
            raise ValueError("rcs_amplitude must be >= 0")


@dataclass
class RawFrame:
    """IF samples of one frame, indexed [chirp][rx][sample]."""

    samples: np.ndarray
    config: ChirpConfig
    timestamp_ms: int = 0

    def __post_init__(self):
        expected = (self.config.n_chirps, 2, self.config.n_samples)
        if self.samples.shape != expected:
            raise ValueError(f"samples must have shape {expected}, got {self.samples.shape}")


@dataclass
class Detection:
    """One recovered point in polar radar coordinates."""

    range_m: float
    radial_velocity: float
    azimuth_rad: float
    elevation_rad: float
    snr_db: float

    def __post_init__(self):
        if self.range_m <= 0:
            raise ValueError("range_m must be > 0")
        if not math.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")


def synthesize_frame(
    reflectors: list[Reflector],
    cfg: ChirpConfig,
    seed: int,
    timestamp_ms: int = 0,
) -> RawFrame:
    """Simulate the IF samples of one frame.

    Each sample is the coherent sum over reflectors of
    ``A * exp(i(2 pi f0 t + phi0 + chirp * dphi_vel + rx * dphi_az))``
    plus circular Gaussian noise of std ``cfg.noise_std``. Bit-identical
    for identical (reflectors, cfg, seed).
    """
    n = cfg.n_samples
    t = np.arange(n) / cfg.sample_rate_hz
    chirp_idx = np.arange(cfg.n_chirps)
    rx_idx = np.arange(2)

    samples = np.zeros((cfg.n_chirps, 2, n), dtype=complex)
    if reflectors:
        lam = cfg.wavelength_m
        dist = np.array([float(np.linalg.norm(r.position)) for r in reflectors])
        if np.any(dist <= 0):
            raise ValueError("reflector at zero range")
        if any(r.position[1] <= 0 for r in reflectors):
            raise ValueError("reflectors must lie in the front half-space (y > 0)")
        amp = np.array([r.rcs_amplitude for r in reflectors])
        f0 = np.array([beat_frequency(d, cfg.slope_hz_per_s) for d in dist])
        phi0 = np.array([phase_at_range(d, lam) for d in dist])
        dphi_v = np.array(
            [doppler_phase(r.radial_velocity, cfg.chirp_time_s, lam) for r in reflectors]
        )
        theta = np.array([math.atan2(r.position[0], r.position[1]) for r in reflectors])
        dphi_a = np.array([azimuth_phase(th, cfg.rx_spacing_m, lam) for th in theta])

        # phase[r, chirp, rx, sample]
        phase = (
            2.0 * math.pi * f0[:, None, None, None] * t[None, None, None, :]
            + phi0[:, None, None, None]
            + chirp_idx[None, :, None, None] * dphi_v[:, None, None, None]
            + rx_idx[None, None, :, None] * dphi_a[:, None, None, None]
        )
        samples = np.sum(amp[:, None, None, None] * np.exp(1j * phase), axis=0)

    if cfg.noise_std > 0:
        rng = np.random.default_rng(seed)
        scale = cfg.noise_std / math.sqrt(2.0)
        samples = samples + scale * (
            rng.standard_normal(samples.shape) + 1j * rng.standard_normal(samples.shape)
        )
    return RawFrame(samples=samples, config=cfg, timestamp_ms=timestamp_ms)


def range_spectrum(frame: RawFrame, chirp: int, rx: int) -> np.ndarray:
    """DFT of one chirp's samples; bin k sits at range k * c * fs / (2 S n)."""
    n_chirps, n_rx, _ = frame.samples.shape
    if not (0 <= chirp < n_chirps and 0 <= rx < n_rx):
        raise IndexError(f"chirp/rx index ({chirp}, {rx}) out of bounds")
    return np.fft.fft(frame.samples[chirp, rx])


def bin_to_range(cfg: ChirpConfig, k: int) -> float:
    """Range [m] represented by FFT bin ``k``."""
    return range_from_beat(k * cfg.sample_rate_hz / cfg.n_samples, cfg.slope_hz_per_s)


def detect_points(frame: RawFrame, threshold_db: float = DEFAULT_THRESHOLD_DB) -> list[Detection]:
    """Constant-threshold peak detector over the range spectrum.

    Peaks are local maxima of chirp 0 / RX 0 spectral power exceeding the
    noise floor (median power) by ``threshold_db``. Velocity comes from the
    chirp-0/chirp-1 phase difference at the peak bin, azimuth from the
    RX0/RX1 phase difference; elevation is fixed at the boresight plane.
    """
    if not math.isfinite(threshold_db):
        raise ValueError("threshold_db must be finite")
    cfg = frame.config
    spec_c0_rx0 = range_spectrum(frame, 0, 0)
    spec_c1_rx0 = range_spectrum(frame, 1, 0)
    spec_c0_rx1 = range_spectrum(frame, 0, 1)

    power = np.abs(spec_c0_rx0) ** 2
    if not np.any(power > 0):
        return []
    floor = max(float(np.median(power)), float(power.max()) * 10 ** (-SNR_CAP_DB / 10.0))
    gate = floor * 10 ** (threshold_db / 10.0)

    lam = cfg.wavelength_m
    detections = []
    for k in range(1, cfg.n_samples - 1):
        if not (power[k] > gate and power[k] > power[k - 1] and power[k] >= power[k + 1]):
            continue
        rng_m = bin_to_range(cfg, k)
        dphi_v = float(np.angle(spec_c1_rx0[k] * np.conj(spec_c0_rx0[k])))
        vel = velocity_from_phase(dphi_v, cfg.chirp_time_s, lam)
        dphi_a = float(np.angle(spec_c0_rx1[k] * np.conj(spec_c0_rx0[k])))
        # clip: noise can push the implied sine epsilon past the field edge
        sin_az = float(np.clip(lam * dphi_a / (2.0 * math.pi * cfg.rx_spacing_m), -1.0, 1.0))
        az = math.asin(sin_az)
        snr_db = min(10.0 * math.log10(power[k] / floor), SNR_CAP_DB)
        detections.append(
            Detection(
                range_m=rng_m,
                radial_velocity=vel,
                azimuth_rad=az,
                elevation_rad=0.0,
                snr_db=snr_db,
            )
        )
    return detections


def detections_to_points(detections: list[Detection], timestamp_ms: int = 0) -> list[RadarPoint]:
    """Spherical-to-Cartesian conversion into the radar frame."""
    points = []
    for d in detections:
        ca, sa = math.cos(d.azimuth_rad), math.sin(d.azimuth_rad)
        ce, se = math.cos(d.elevation_rad), math.sin(d.elevation_rad)
        xyz = np.array([d.range_m * sa * ce, d.range_m * ca * ce, d.range_m * se])
        points.append(RadarPoint(xyz=xyz, velocity=d.radial_velocity, snr=d.snr_db))
    return points
