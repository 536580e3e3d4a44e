"""Variable-length feedback coding over discrete memoryless channels,
built around the extrinsic Jensen-Shannon divergence.
"""

__version__ = "0.1.0"

from .belief import (
    Belief,
    ThresholdParams,
    bayes_update,
    map_decode,
    predictive_distribution,
    threshold_params,
    u_tilde,
    uniform_belief,
)
from .channel import (
    Channel,
    ChannelConstants,
    SymmetryPairing,
    asymmetric_uniform_ternary,
    blahut_arimoto,
    bsc,
    channel_constants,
    derive_constants,
    detect_symmetric_pairing,
    kary_symmetric_channel,
    load_channel,
    sample_output,
    save_channel,
    validate_channel,
)
from .divergences import (
    avg_log_likelihood_u,
    ejs_divergence,
    ejs_of_encoder,
    entropy,
    js_divergence,
    kl_divergence,
)
from .schemes import (
    EncodingFunction,
    RandomizedEncoder,
    SCHEME_IDS,
    Scheme,
    binary_partition_alg1,
    binary_partition_alg2,
    bz_randomized_encoder,
    check_binary_condition,
    check_kary_condition,
    ghbz_encoder,
    kary_symmetric_encoder,
    make_scheme,
    maxejs_encoder,
    pm_encoder,
)
from .session import (
    AuditReport,
    BoundSet,
    MonteCarloReport,
    SessionConfig,
    SessionTrace,
    analytic_bounds,
    audit_trace,
    monte_carlo,
    run_session,
    trace_lines,
    write_trace,
)
from . import errors

__all__ = [name for name in dir() if not name.startswith("_")]
