"""Command-line front end: gen-data, train, infer, sweep, flops, energy.

Artifacts land in a run directory named from the config hash and master
seed, so distinct setups never collide: <out>/run-<hash8>-s<seed>/.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import bench, datasets, pipeline
from .config import config_hash, config_to_dict, load_config, run_dir_name
from .link import simulate_frame
from .nnet import write_history_csv
from .receive import RxObservation
from .serialization import load_model, save_model
from .transmit import draw_compression_matrix


def _run_dir(args, cfg) -> str:
    base = args.out or "runs"
    path = os.path.join(base, run_dir_name(cfg))
    os.makedirs(path, exist_ok=True)
    return path


def cmd_gen_data(args) -> int:
    cfg = load_config(args.config)
    run = _run_dir(args, cfg)
    data_dir = os.path.join(run, "data")
    print(f"generating datasets under {data_dir}")
    datasets.build_datasets(
        cfg, data_dir,
        progress=lambda role, split, p: print(f"  wrote {role}/{split}: {p}"))
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    run = _run_dir(args, cfg)
    data_dir = os.path.join(run, "data")
    mp, summary = pipeline.train_all(cfg, data_dir, log=print)
    model_path = os.path.join(run, "model.uavc")
    save_model(model_path, mp, extra_meta={"config_hash": config_hash(cfg),
                                           "seed": cfg.seed})
    for role, hist in summary["history"].items():
        write_history_csv(os.path.join(run, f"train_{role}.csv"), hist)
    print(f"saved model to {model_path}")
    print(f"sensing val accuracy: {summary['sennet_val_accuracy']:.4f}")
    return 0


def cmd_infer(args) -> int:
    cfg = load_config(args.config)
    mp = load_model(args.model, expect_n=cfg.channel.n_antennas,
                    expect_la=cfg.channel.n_truncated)
    rng = np.random.default_rng(args.seed)
    los = bool(rng.random() < cfg.train.beta)
    fr = simulate_frame(cfg.channel, cfg.link, mp.phi, los, args.snr_db, rng,
                        pilot_len=cfg.pilot_len)
    obs = RxObservation(y=fr.y, sigma2=fr.sigma2, g_hat=fr.G_hat[0],
                        eu=cfg.link.eu, rho=cfg.link.rho)
    out = pipeline.infer(obs, fr.G_hat, mp, detector=cfg.link.detector)
    ber = float(np.mean(out.d_bits != fr.bits))
    print(json.dumps({
        "snr_db": args.snr_db,
        "los_true": int(los),
        "chi": out.chi,
        "branch": out.branch_taken,
        "sense_score": out.sense_score,
        "nmse": bench.nmse(fr.g2u.h, out.h_hat),
        "frame_ber": ber,
        "timings": out.timings,
    }, indent=2))
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    run = _run_dir(args, cfg)
    model_path = args.model or os.path.join(run, "model.uavc")
    mp = load_model(model_path, expect_n=cfg.channel.n_antennas,
                    expect_la=cfg.channel.n_truncated)
    print(f"sweeping {len(cfg.sweep.schemes)} schemes over "
          f"{len(cfg.sweep.snr_grid_db)} SNR x {len(cfg.sweep.rho_grid)} rho x "
          f"{len(cfg.sweep.beta_grid)} beta points")

    def progress(rec):
        print(f"  {rec.scheme:9s} snr={rec.snr_db:5.1f} rho={rec.rho:.2f} "
              f"beta={rec.beta:.2f}  nmse={rec.nmse:.3e} ber={rec.ber:.3e} "
              f"frames={rec.frames}{' (capped)' if rec.capped else ''}")

    records = bench.run_sweep(cfg, mp, progress=progress)
    paths = bench.emit(records, run, cfg)
    print(f"wrote {paths['csv']} and {paths['manifest']}")
    return 0


def cmd_flops(args) -> int:
    for scheme in ("proposed", "ablation", "ref8", "ref9"):
        val = bench.flops(scheme, args.N, args.M, args.La)
        print(f"{scheme:9s} {val:,.2f}")
    return 0


def cmd_energy(args) -> int:
    sup, non, saved = bench.energy_saved(args.N, args.Eu, args.Tsym, args.M)
    print(f"superimposed:     {sup:g}")
    print(f"non-superimposed: {non:g}")
    print(f"saved:            {saved:g}  (ratio {saved / non:.4f})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uavcsi",
                                description="superimposed CSI feedback link simulator")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("gen-data", help="generate the three training datasets")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", default=None, help="base output directory")
    sp.set_defaults(func=cmd_gen_data)

    sp = sub.add_parser("train", help="train the three networks in order")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("infer", help="run one debug frame through the receiver")
    sp.add_argument("--config", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--snr-db", type=float, default=10.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_infer)

    sp = sub.add_parser("sweep", help="run the NMSE/BER benchmark grid")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", default=None)
    sp.add_argument("--model", default=None,
                    help="model container (default: <run>/model.uavc)")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("flops", help="print the closed-form FLOP counts")
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--M", type=int, required=True)
    sp.add_argument("--La", type=int, required=True)
    sp.set_defaults(func=cmd_flops)

    sp = sub.add_parser("energy", help="print the energy-saving model")
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--M", type=int, required=True)
    sp.add_argument("--Eu", type=float, default=1.0)
    sp.add_argument("--Tsym", type=float, default=1.0)
    sp.set_defaults(func=cmd_energy)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
