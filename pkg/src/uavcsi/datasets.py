"""Training/validation/test set generation for the three receiver networks.

Roles and their sample content:

* ``sennet`` -- noise-free sensing inputs (the real-valued reshape of the
  U2G tap matrix) with binary LoS labels, mixed by the LoS fraction beta.
* ``aidnet`` -- refined-CSI features extracted from full 10 dB frames of
  LoS channels only, paired with the normalized compressed-CSI target.
* ``recnet`` -- the same features from 20 dB frames of a beta-mixed
  population (raw, LoS routing through the trained aid net happens at
  training time), paired with the true vectorized CSI.

Each split persists to one container file carrying its tensors, the LoS
flags, and the per-sample seed indices under the root seed, so any sample
can be regenerated in isolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import generate_u2g, ls_estimate_u2g, reshape_for_sensing
from .config import ExperimentConfig
from .errors import ConfigurationError
from .link import simulate_frame
from .receive import initial_feature
from .serialization import read_container, write_container
from .transmit import draw_compression_matrix

ROLES = ("sennet", "aidnet", "recnet")
SPLITS = ("train", "val", "test")
_ROLE_ID = {"sennet": 1, "aidnet": 2, "recnet": 3}
_SPLIT_ID = {"train": 0, "val": 1, "test": 2}


@dataclass(frozen=True)
class DatasetSpec:
    """What to generate for one role."""

    role: str
    n_train: int
    n_val: int
    n_test: int
    beta: float
    gen_snr_db: float

    def __post_init__(self):
        if self.role not in ROLES:
            raise ConfigurationError(f"role must be one of {ROLES}")
        if min(self.n_train, self.n_val, self.n_test) <= 0:
            raise ConfigurationError("split sizes must be positive")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigurationError("beta must lie in [0, 1]")
        if self.role == "aidnet" and self.beta == 0.0:
            raise ConfigurationError(
                "aid-net set needs LoS samples but beta = 0 admits none")

    def count(self, split: str) -> int:
        return {"train": self.n_train, "val": self.n_val, "test": self.n_test}[split]


def spec_for_role(cfg: ExperimentConfig, role: str) -> DatasetSpec:
    counts = getattr(cfg.train, f"counts_{role}")
    return DatasetSpec(role=role, n_train=counts.train, n_val=counts.val,
                       n_test=counts.test, beta=cfg.train.beta,
                       gen_snr_db=getattr(cfg.train, f"snr_db_{role}"))


def sample_rng(root_seed: int, role: str, split: str, index: int) -> np.random.Generator:
    """Deterministic per-sample stream, independent of generation order."""
    return np.random.default_rng(
        np.random.SeedSequence([root_seed, _ROLE_ID[role], _SPLIT_ID[split], index]))


def _gen_sennet_split(cfg: ExperimentConfig, spec: DatasetSpec, split: str):
    count = spec.count(split)
    la, n = cfg.channel.n_truncated, cfg.channel.n_antennas
    inputs = np.empty((count, la, 2 * n))
    labels = np.empty(count, dtype=np.int64)
    for i in range(count):
        rng = sample_rng(cfg.seed, "sennet", split, i)
        los = bool(rng.random() < spec.beta)
        u2g = generate_u2g(cfg.channel, los, rng)
        g_hat = ls_estimate_u2g(u2g, spec.gen_snr_db, cfg.pilot_len, rng,
                                eu=cfg.link.eu)
        inputs[i] = reshape_for_sensing(g_hat)
        labels[i] = int(los)
    return {"g_sense": inputs, "label": labels, "los": labels.copy(),
            "sample_index": np.arange(count, dtype=np.int64)}


def _gen_feature_split(cfg: ExperimentConfig, spec: DatasetSpec, split: str):
    count = spec.count(split)
    ch, link = cfg.channel, cfg.link
    la_n = ch.n_truncated * ch.n_antennas
    phi = draw_compression_matrix(la_n, ch.n_antennas, cfg.train.phi_seed)
    z_hat = np.empty((count, ch.n_antennas), dtype=complex)
    los_flags = np.empty(count, dtype=np.int64)
    z_true = np.empty((count, ch.n_antennas), dtype=complex)
    h_true = np.empty((count, la_n), dtype=complex) if spec.role == "recnet" else None
    for i in range(count):
        rng = sample_rng(cfg.seed, spec.role, split, i)
        los = True if spec.role == "aidnet" else bool(rng.random() < spec.beta)
        fr = simulate_frame(ch, link, phi, los, spec.gen_snr_db, rng,
                            pilot_len=cfg.pilot_len)
        feat = initial_feature(fr.y, fr.G_hat[0], link.rho, link.eu, fr.sigma2,
                               q=_frame_walsh(cfg), detector=link.detector)
        z_hat[i] = feat.z_hat
        z_true[i] = fr.frame.z
        los_flags[i] = int(los)
        if h_true is not None:
            h_true[i] = fr.g2u.h
    out = {"z_hat": z_hat, "z": z_true, "los": los_flags,
           "sample_index": np.arange(count, dtype=np.int64)}
    if h_true is not None:
        out["h"] = h_true
    return out


def _frame_walsh(cfg: ExperimentConfig):
    from .link import cached_walsh
    return cached_walsh(cfg.link.m_symbols, cfg.channel.n_antennas)


def build_split(cfg: ExperimentConfig, role: str, split: str) -> dict:
    spec = spec_for_role(cfg, role)
    if role == "sennet":
        return _gen_sennet_split(cfg, spec, split)
    return _gen_feature_split(cfg, spec, split)


def dataset_meta(cfg: ExperimentConfig, role: str, split: str) -> dict:
    spec = spec_for_role(cfg, role)
    return {
        "role": role, "split": split, "count": spec.count(split),
        "beta": spec.beta, "gen_snr_db": repr(spec.gen_snr_db),
        "n": cfg.channel.n_antennas, "la": cfg.channel.n_truncated,
        "m": cfg.link.m_symbols, "seed_root": cfg.seed,
        "phi_seed": cfg.train.phi_seed,
    }


def dataset_filename(role: str, split: str) -> str:
    return f"{role}.{split}.uavc"


def build_datasets(cfg: ExperimentConfig, out_dir, roles=ROLES, splits=SPLITS,
                   progress=None) -> list:
    """Generate and persist every requested role/split; returns the paths."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for role in roles:
        for split in splits:
            tensors = build_split(cfg, role, split)
            path = os.path.join(out_dir, dataset_filename(role, split))
            write_container(path, "dataset", dataset_meta(cfg, role, split), tensors)
            paths.append(path)
            if progress is not None:
                progress(role, split, path)
    return paths


def load_split(data_dir, role: str, split: str):
    """Load one split; returns (meta, tensors)."""
    import os

    return read_container(os.path.join(data_dir, dataset_filename(role, split)),
                          expect_kind="dataset")


def empirical_los_fraction(los_flags: np.ndarray) -> float:
    return float(np.mean(los_flags))


def binomial_ci_halfwidth(p: float, n: int, z: float = 2.576) -> float:
    """99% normal-approximation half width for a Bernoulli mean."""
    return z * math.sqrt(p * (1.0 - p) / n)
