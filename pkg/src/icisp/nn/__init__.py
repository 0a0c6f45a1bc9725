from .haar import SubbandSet, haar_forward, haar_inverse, pad_to_even, pad_to_multiple
from .scan import SS2D, LinearScan, ScanParams, selective_scan
from .blocks import (
    BLOCK_VARIANTS,
    ChannelLayerNorm,
    FreqModulationBlock,
    PointwiseFFN,
    ResidualBlockDown,
    ResidualBlockUp,
    ResidualScanModule,
    VisualScanBlock,
    depth_to_space,
    resample_block,
)
