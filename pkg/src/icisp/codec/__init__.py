from .charm import ChannelContext, SliceOrderError
from .coding import (
    SYMBOL_BOUND,
    decode_image,
    encode_image,
    hyper_coding_tables,
    latent_coding_tables,
    round_mode_rate_bits,
)
from .container import MAGIC, VERSION, BitstreamContainer, ContainerError
from .factorized import FactorizedDensity
from .gaussian import (
    LIKELIHOOD_FLOOR,
    SCALE_LEVELS,
    SCALE_MAX,
    SCALE_MIN,
    gaussian_likelihood,
    rate_bits,
    scale_table,
    snap_scale_indexes,
)
from .model import CompressionModel
from .quant import quantize, quantize_ste
from .rans import (
    PROB_BITS,
    PROB_SCALE,
    CdfTable,
    CoderError,
    StreamError,
    SupportError,
    build_gaussian_cdf,
    freqs_to_cdf,
    quantize_pmf,
    rans_decode,
    rans_encode,
)
