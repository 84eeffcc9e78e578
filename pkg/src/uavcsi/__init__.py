"""Link-level simulator for LoS-sensing-assisted superimposed CSI feedback.

A UAV compresses and spreads its downlink CSI, superimposes it at low
power on the uplink data stream, and the ground station recovers both
with interference cancellation plus three small trained-from-scratch
networks (LoS sensing, LoS-feature refinement, CSI recovery).
"""

from .bench import MetricRecord, emit, energy_saved, flops, nmse, run_sweep
from .channel import (ChannelConfig, ClusterRay, G2uChannel, U2gChannel,
                      generate_g2u, generate_u2g, ls_estimate_u2g,
                      reshape_for_sensing)
from .config import (ExperimentConfig, LinkConfig, SweepConfig, TrainConfig,
                     config_hash, load_config)
from .datasets import DatasetSpec, build_datasets
from .link import simulate_frame, simulate_ref8_frame
from .nnet import hard_decision, make_aidnet, make_recnet, make_sennet, train
from .pipeline import PipelineOutput, infer, infer_ablation, train_all
from .receive import (InitialFeature, RxObservation, despread, initial_feature,
                      lmmse_csi, lmmse_data, receive, ref8_baseline)
from .serialization import ModelParams, load_model, save_model
from .transmit import (CompressionMatrix, SuperFrame, compress,
                       draw_compression_matrix, modulate_qpsk, spread,
                       superimpose, walsh_matrix)

__version__ = "0.1.0"
