"""Label-consistency decay analysis and relative-similarity graph contrastive learning."""

__version__ = "0.1.0"

from .graphcore import LabeledGraph, HopSets, build_graph, hop_sets, degree_by_label
from .labelstats import DecayCurve, lc_emp, sim_stat, sim_stat_beyond, relative_gap
from .markovlab import (
    LabelTransition,
    DecayReport,
    build_transition,
    lc_prob,
    markov_properties,
    monte_carlo_lc,
    two_label_model,
)
from .synthgen import SbmSpec, generate_sbm, expected_transition
from .relloss import LossConfig, LossReport, loss_pair, loss_list, loss_in, loss_out, count_sim_ops
from .encoder import EncoderConfig, build_encoder, forward, theta, hop_temperature, embed
from .trainer import TrainConfig, train
from .evalsuite import linear_probe, cluster_nmi, sim_at_5, hop_similarity
