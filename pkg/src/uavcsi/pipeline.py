"""Offline training of the three networks and the online branching receiver.

Training order is fixed: sensing net, aid net, recovery net.  The recovery
net's LoS training inputs are passed through the already-trained aid net
so that training matches deployment.  Online, the sensed LoS flag routes
the refined compressed CSI either through the aid net (LoS) or directly
(NLoS) before data re-detection and CSI recovery; the ablation variant is
exactly the NLoS branch with sensing skipped.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .datasets import load_split
from .errors import ConfigurationError
from .link import cached_walsh
from .nnet import (hard_decision, make_aidnet, make_recnet, make_sennet,
                   predict_batched, train)
from .receive import RxObservation, detect_with_csi, initial_feature
from .serialization import ModelParams
from .transmit import draw_compression_matrix


def complex_to_real(z: np.ndarray) -> np.ndarray:
    """[Re | Im] along the last axis."""
    return np.concatenate([z.real, z.imag], axis=-1)


def real_to_complex(v: np.ndarray) -> np.ndarray:
    n = v.shape[-1] // 2
    return v[..., :n] + 1j * v[..., n:]


def sense_normalize(x: np.ndarray) -> np.ndarray:
    """Scale each sensing input matrix to unit rms.

    The LoS discriminant is the relative energy profile, so per-sample
    normalization makes the classifier invariant to link gain and to the
    estimation-noise pedestal; it transfers far better across eval SNRs
    than any fixed scale.
    """
    single = x.ndim == 2
    if single:
        x = x[None]
    rms = np.sqrt(np.mean(x ** 2, axis=(1, 2), keepdims=True))
    out = x / np.maximum(rms, 1e-300)
    return out[0] if single else out


@dataclass
class PipelineOutput:
    """Per-frame result of the online receiver."""

    chi: int
    branch_taken: str            # "los" or "nlos"
    h_hat: np.ndarray            # (La*N,) recovered CSI
    d_bits: np.ndarray           # (2M,) detected payload bits
    z_feature: np.ndarray        # (N,) initial feature (refined estimate)
    z_used: np.ndarray           # (N,) estimate used for detection/recovery
    sense_score: float
    timings: dict = field(default_factory=dict)


def _net_rng(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, 100 + tag]))


def sennet_accuracy(net, params: dict, x: np.ndarray, labels: np.ndarray) -> float:
    scores = predict_batched(net, params, x)[:, 0]
    decisions = (scores > 0.5).astype(np.int64)
    return float(np.mean(decisions == labels))


def train_all(cfg: ExperimentConfig, data_dir, *, log=None):
    """Train the three networks in order; returns (ModelParams, summary).

    ``data_dir`` must hold the containers written by ``build_datasets``.
    The summary carries the training histories, best epochs, and the
    sensing validation accuracy.
    """
    ch, tr = cfg.channel, cfg.train
    n, la = ch.n_antennas, ch.n_truncated
    summary: dict = {"history": {}, "best_epoch": {}}

    def note(msg):
        if log is not None:
            log(msg)

    # -- sensing net ---------------------------------------------------
    _, d_train = load_split(data_dir, "sennet", "train")
    _, d_val = load_split(data_dir, "sennet", "val")
    sennet = make_sennet(la, n)
    rng = _net_rng(cfg.seed, 1)
    params = sennet.init_params(rng)
    note(f"training sensing net on {len(d_train['label'])} samples")
    x_tr = sense_normalize(d_train["g_sense"])
    x_va = sense_normalize(d_val["g_sense"])
    res = train(sennet, params, x_tr, d_train["label"][:, None].astype(float),
                x_va, d_val["label"][:, None].astype(float),
                epochs=tr.epochs_sennet, batch_size=tr.batch_size,
                adam_cfg=tr.adam_sennet, rng=rng)
    sen_acc = sennet_accuracy(sennet, res.best_params, x_va, d_val["label"])
    summary["sennet_val_accuracy"] = sen_acc
    summary["history"]["sennet"] = res.history
    summary["best_epoch"]["sennet"] = res.best_epoch
    sennet_best, sennet_final = res.best_params, res.params
    note(f"sensing val accuracy {sen_acc:.4f}")
    del d_train, d_val, x_tr, x_va

    # -- aid net (LoS-only refinement) ---------------------------------
    _, d_train = load_split(data_dir, "aidnet", "train")
    _, d_val = load_split(data_dir, "aidnet", "val")
    aidnet = make_aidnet(n)
    rng = _net_rng(cfg.seed, 2)
    params = aidnet.init_params(rng)
    note(f"training aid net on {len(d_train['los'])} samples")
    res = train(aidnet, params,
                complex_to_real(d_train["z_hat"]), complex_to_real(d_train["z"]),
                complex_to_real(d_val["z_hat"]), complex_to_real(d_val["z"]),
                epochs=tr.epochs_aidnet, batch_size=tr.batch_size,
                adam_cfg=tr.adam_aidnet, rng=rng)
    summary["history"]["aidnet"] = res.history
    summary["best_epoch"]["aidnet"] = res.best_epoch
    aidnet_best, aidnet_final = res.best_params, res.params
    del d_train, d_val

    # -- recovery net (LoS inputs pass through the trained aid net) ----
    _, d_train = load_split(data_dir, "recnet", "train")
    _, d_val = load_split(data_dir, "recnet", "val")
    recnet = make_recnet(la, n)

    def recnet_inputs(split):
        x = complex_to_real(split["z_hat"])
        los = split["los"].astype(bool)
        if np.any(los):
            x = x.copy()
            x[los] = predict_batched(aidnet, aidnet_best, x[los])
        return x

    rng = _net_rng(cfg.seed, 3)
    params = recnet.init_params(rng)
    note(f"training recovery net on {len(d_train['los'])} samples")
    res = train(recnet, params,
                recnet_inputs(d_train), complex_to_real(d_train["h"]),
                recnet_inputs(d_val), complex_to_real(d_val["h"]),
                epochs=tr.epochs_recnet, batch_size=tr.batch_size,
                adam_cfg=tr.adam_recnet, rng=rng)
    summary["history"]["recnet"] = res.history
    summary["best_epoch"]["recnet"] = res.best_epoch

    phi = draw_compression_matrix(la * n, n, tr.phi_seed)
    mp = ModelParams(
        n=n, la=la, m=cfg.link.m_symbols, phi=phi, q_seed=tr.q_seed,
        sennet=sennet_best, aidnet=aidnet_best, recnet=res.best_params,
        finals={"sennet": sennet_final, "aidnet": aidnet_final,
                "recnet": res.params},
        norms={"sennet_norm": "per_sample"})
    return mp, summary


# ---------------------------------------------------------------------------
# online stage

def _recover(obs: RxObservation, z_used: np.ndarray, mp: ModelParams,
             detector: str, timings: dict):
    """Data re-detection and CSI recovery shared by both branches."""
    q = cached_walsh(mp.m, mp.n)
    t0 = time.perf_counter()
    _, bits = detect_with_csi(obs.y, obs.g_hat, z_used, obs.rho, obs.eu,
                              obs.sigma2, q, detector=detector)
    timings["detect"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    recnet = make_recnet(mp.la, mp.n)
    h_hat = real_to_complex(recnet.forward(mp.recnet, complex_to_real(z_used)[None])[0])
    timings["recover"] = time.perf_counter() - t0
    return bits, h_hat


def infer(obs: RxObservation, G_hat: np.ndarray, mp: ModelParams, *,
          detector: str = "lmmse", force_branch: int | None = None) -> PipelineOutput:
    """Full online receiver: sense, extract, branch, detect, recover."""
    timings: dict = {}
    from .channel import reshape_for_sensing

    t0 = time.perf_counter()
    if force_branch is None:
        if mp.sennet is None:
            raise ConfigurationError("model container has no sensing weights")
        sennet = make_sennet(mp.la, mp.n)
        x_sense = sense_normalize(reshape_for_sensing(G_hat))
        score = float(sennet.forward(mp.sennet, x_sense[None])[0, 0])
        chi = hard_decision(score)
    else:
        score = float("nan")
        chi = int(force_branch)
    timings["sense"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    q = cached_walsh(mp.m, mp.n)
    feat = initial_feature(obs.y, obs.g_hat, obs.rho, obs.eu, obs.sigma2, q,
                           detector=detector)
    timings["feature"] = time.perf_counter() - t0

    if chi == 1:
        if mp.aidnet is None:
            raise ConfigurationError("model container has no aid-net weights")
        t0 = time.perf_counter()
        aidnet = make_aidnet(mp.n)
        z_used = real_to_complex(
            aidnet.forward(mp.aidnet, complex_to_real(feat.z_hat)[None])[0])
        timings["refine"] = time.perf_counter() - t0
    else:
        z_used = feat.z_hat
        timings["refine"] = 0.0

    bits, h_hat = _recover(obs, z_used, mp, detector, timings)
    return PipelineOutput(chi=chi, branch_taken="los" if chi else "nlos",
                          h_hat=h_hat, d_bits=bits, z_feature=feat.z_hat,
                          z_used=z_used, sense_score=score, timings=timings)


def infer_ablation(obs: RxObservation, mp: ModelParams, *,
                   detector: str = "lmmse") -> PipelineOutput:
    """Receiver without sensing/aid nets: always the NLoS path."""
    timings = {"sense": 0.0, "refine": 0.0}
    t0 = time.perf_counter()
    q = cached_walsh(mp.m, mp.n)
    feat = initial_feature(obs.y, obs.g_hat, obs.rho, obs.eu, obs.sigma2, q,
                           detector=detector)
    timings["feature"] = time.perf_counter() - t0
    bits, h_hat = _recover(obs, feat.z_hat, mp, detector, timings)
    return PipelineOutput(chi=0, branch_taken="nlos", h_hat=h_hat, d_bits=bits,
                          z_feature=feat.z_hat, z_used=feat.z_hat,
                          sense_score=float("nan"), timings=timings)
