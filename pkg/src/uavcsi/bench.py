"""Benchmarks: NMSE/BER sweeps, closed-form FLOP counts, energy savings.

Sweeps walk the (scheme, SNR, rho, beta) grid.  Each point simulates
frames until the bit-error stop rule is met (at least ``min_bit_errors``
observed and at least ``min_frames`` simulated) or the frame cap is hit;
capped points are flagged in the manifest.  All randomness derives from
(seed, point index, frame index) so reruns are bit-identical.
"""

from __future__ import annotations

import csv
import json
import math
import subprocess
import time
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig, config_hash
from .errors import ConfigurationError, DegenerateSignalError
from .link import cached_walsh, simulate_frame, simulate_ref8_frame
from .pipeline import infer, infer_ablation
from .receive import RxObservation, despread, detect_with_csi, lmmse_csi, ref8_baseline
from .serialization import ModelParams
from .transmit import demap_qpsk

SCHEMES = ("proposed", "ablation", "ref8", "lmmse")

CSV_HEADER = ("scheme,snr_db,rho,beta,nmse,ber,frames,bit_errors,"
              "sensing_accuracy,wall_seconds")


def nmse(h_true: np.ndarray, h_est: np.ndarray) -> float:
    """|| h - h_est ||^2 / || h ||^2 for one sample."""
    denom = float(np.vdot(h_true, h_true).real)
    if denom == 0.0:
        raise DegenerateSignalError("reference CSI has zero norm")
    diff = h_est - h_true
    return float(np.vdot(diff, diff).real) / denom


def flops(scheme: str, n: int, m: int, la: int) -> float:
    """Closed-form per-frame FLOP counts of the compared receivers."""
    if min(n, m, la) <= 0:
        raise ConfigurationError("dimensions must be positive")
    pooled = (la // 3) * (n // 3)
    if scheme == "proposed":
        return (3 * n + 7 * n ** 2 + 3 * n ** 2 * m + 2 * n * m + 9 * la * n
                + pooled / 4 + 2 * la * n ** 2 + 2 * la ** 2 * n ** 2)
    if scheme == "ablation":
        return (3 * n + 3 * n ** 2 + 3 * n ** 2 * m + 2 * n * m
                + 2 * la * n ** 2 + 2 * la ** 2 * n ** 2)
    if scheme == "ref8":
        return 6 * n + 6 * n * m + 6 * la * n ** 2 + 6 * la * n ** 2 * m
    if scheme == "ref9":
        return 4 * la * n * m + 32 * m * la * n + 32 * m ** 2
    raise ConfigurationError(f"unknown scheme {scheme!r}")


def energy_saved(n: int, eu: float, t_sym: float, m: int):
    """Energy of the superimposed vs. time-multiplexed feedback frame.

    Returns (superimposed, non_superimposed, saved): M*Eu*T vs (M+N)*Eu*T,
    the difference N*Eu*T being the per-frame saving.
    """
    if eu <= 0 or t_sym <= 0 or m <= 0 or n < 0:
        raise ConfigurationError("energy model needs positive inputs")
    superimposed = m * eu * t_sym
    non_superimposed = (m + n) * eu * t_sym
    return superimposed, non_superimposed, n * eu * t_sym


@dataclass(frozen=True)
class MetricRecord:
    """One benchmark grid point."""

    scheme: str
    snr_db: float
    rho: float
    beta: float
    nmse: float
    ber: float
    frames: int
    bit_errors: int
    sensing_accuracy: float
    wall_seconds: float
    capped: bool = False     # stop rule not met within the frame cap


def _point_rng(seed: int, point: int, frame: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, point, frame]))


def _pinv_phi(mp: ModelParams) -> np.ndarray:
    return np.linalg.pinv(mp.phi.phi)


def run_point(cfg: ExperimentConfig, mp: ModelParams, scheme: str, snr_db: float,
              rho: float, beta: float, point_id: int) -> MetricRecord:
    """Simulate one grid point until the stop rule fires."""
    ch, link, sw = cfg.channel, cfg.link, cfg.sweep
    cap = sw.frame_cap(link.m_symbols)
    bits_per_frame = 2 * link.m_symbols
    phi_pinv = _pinv_phi(mp) if scheme == "lmmse" else None
    q = cached_walsh(link.m_symbols, ch.n_antennas)
    frames = 0
    bit_errors = 0
    nmse_sum = 0.0
    sense_hits = 0
    sensed = scheme == "proposed"
    t0 = time.perf_counter()
    while True:
        rng = _point_rng(sw.seed, point_id, frames)
        los = bool(rng.random() < beta)
        if scheme == "ref8":
            fr = simulate_ref8_frame(ch, link, los, snr_db, rng, rho=rho,
                                     pilot_len=cfg.pilot_len)
            q8 = cached_walsh(link.m_symbols, ch.n_truncated * ch.n_antennas)
            z8, d_hard = ref8_baseline(fr.y, fr.G_hat[0], rho, link.eu, fr.sigma2,
                                       q8, iters=link.ref8_iters,
                                       detector=link.detector)
            h_est = z8 * fr.h_scale
            nmse_sum += nmse(fr.g2u.h, h_est)
            bit_errors += int(np.count_nonzero(demap_qpsk(d_hard) != fr.bits))
        else:
            fr = simulate_frame(ch, link, mp.phi, los, snr_db, rng, rho=rho,
                                pilot_len=cfg.pilot_len)
            obs = RxObservation(y=fr.y, sigma2=fr.sigma2, g_hat=fr.G_hat[0],
                                eu=link.eu, rho=rho)
            if scheme == "proposed":
                out = infer(obs, fr.G_hat, mp, detector=link.detector)
                sense_hits += int(out.chi == int(los))
                h_est, det_bits = out.h_hat, out.d_bits
            elif scheme == "ablation":
                out = infer_ablation(obs, mp, detector=link.detector)
                h_est, det_bits = out.h_hat, out.d_bits
            elif scheme == "lmmse":
                v = despread(fr.y, q)
                z1 = lmmse_csi(v, obs.g_hat, rho, link.eu, fr.sigma2,
                               link.m_symbols, data_interference=True,
                               detector=link.detector)
                h_est = (z1 * fr.frame.z_norm) @ phi_pinv
                _, det_bits = detect_with_csi(fr.y, obs.g_hat, z1, rho, link.eu,
                                              fr.sigma2, q, detector=link.detector)
            else:
                raise ConfigurationError(f"unknown scheme {scheme!r}")
            nmse_sum += nmse(fr.g2u.h, h_est)
            bit_errors += int(np.count_nonzero(det_bits != fr.bits))
        frames += 1
        if frames >= sw.min_frames and bit_errors >= sw.min_bit_errors:
            capped = False
            break
        if frames >= cap:
            capped = bit_errors < sw.min_bit_errors
            break
    wall = time.perf_counter() - t0 if sw.record_walltime else 0.0
    return MetricRecord(
        scheme=scheme, snr_db=snr_db, rho=rho, beta=beta,
        nmse=nmse_sum / frames, ber=bit_errors / (frames * bits_per_frame),
        frames=frames, bit_errors=bit_errors,
        sensing_accuracy=sense_hits / frames if sensed else float("nan"),
        wall_seconds=wall, capped=capped)


def run_sweep(cfg: ExperimentConfig, mp: ModelParams, progress=None) -> list:
    """Walk the configured grid; deterministic under (config, seed)."""
    records = []
    point_id = 0
    for scheme in cfg.sweep.schemes:
        if scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {scheme!r}")
        for snr_db in cfg.sweep.snr_grid_db:
            for rho in cfg.sweep.rho_grid:
                for beta in cfg.sweep.beta_grid:
                    rec = run_point(cfg, mp, scheme, float(snr_db), float(rho),
                                    float(beta), point_id)
                    records.append(rec)
                    point_id += 1
                    if progress is not None:
                        progress(rec)
    return records


# ---------------------------------------------------------------------------
# emission

def _fmt(v: float) -> str:
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return f"{v:.12g}"


def records_to_csv(records) -> str:
    lines = [CSV_HEADER]
    for r in records:
        lines.append(",".join([
            r.scheme, _fmt(r.snr_db), _fmt(r.rho), _fmt(r.beta), _fmt(r.nmse),
            _fmt(r.ber), str(r.frames), str(r.bit_errors),
            _fmt(r.sensing_accuracy), _fmt(r.wall_seconds)]))
    return "\n".join(lines) + "\n"


def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=10)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def emit(records, out_dir, cfg: ExperimentConfig, name: str = "results") -> dict:
    """Write the fixed-header CSV and a JSON manifest; returns the paths."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{name}.csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(records_to_csv(records))
    manifest = {
        "config_hash": config_hash(cfg),
        "seed": cfg.sweep.seed,
        "git": git_describe(),
        "n_records": len(records),
        "capped_points": [
            {"scheme": r.scheme, "snr_db": r.snr_db, "rho": r.rho, "beta": r.beta}
            for r in records if r.capped],
    }
    man_path = os.path.join(out_dir, f"{name}.manifest.json")
    with open(man_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"csv": csv_path, "manifest": man_path}


def parse_records_csv(path) -> list:
    """Inverse of :func:`emit` for the fixed-header CSV."""
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            records.append(MetricRecord(
                scheme=row["scheme"], snr_db=float(row["snr_db"]),
                rho=float(row["rho"]), beta=float(row["beta"]),
                nmse=float(row["nmse"]), ber=float(row["ber"]),
                frames=int(row["frames"]), bit_errors=int(row["bit_errors"]),
                sensing_accuracy=float(row["sensing_accuracy"]),
                wall_seconds=float(row["wall_seconds"])))
    return records
