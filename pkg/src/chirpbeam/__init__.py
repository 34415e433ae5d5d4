"""Chirp-based hierarchical beam training for near-field XL-MIMO arrays."""

from .analysis import (MetricRow, PatternMap, half_power_support, ideal_pattern,
                       kb_coherence_map, overhead_closed_form, overhead_of, success, sum_rate)
from .codebook import (Codeword, CodebookGrid, TriangleRegion, child_codewords, chirp_codeword,
                       dft_codebook, distance_ring_codebook, elementary_codebook,
                       hierarchy_depth, layer_codewords, top_layer_codebook, top_layer_count)
from .core import (Channel, KbPoint, Scenario, SystemConfig, UserGeometry, exact_distance,
                   generate_channel, kb_to_params, make_channel, nearfield_steering,
                   params_to_kb, taylor_distance)
from .experiments import ConfigError, ExperimentConfig, load_config, parse_config, run_sweep
from .training import (SCHEMES, NoiseSpec, TrainingResult, exhaustive_search,
                       hierarchical_search, perfect_csi, run_scheme)

__version__ = "0.1.0"
