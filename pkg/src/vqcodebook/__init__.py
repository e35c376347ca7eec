"""Vector-quantization codebook design toolkit.

Codebook construction by LBG refinement, affinity message passing with
uniform or network-support preferences, and the hybrid pipeline that chains
the two, wrapped in a PGM image-compression workflow (blocks, encode/decode,
PSNR) and a CLI comparison harness.
"""

__version__ = "0.1.0"

from .core import (
    Assignment,
    Codebook,
    DistortionReport,
    TrainingSet,
    assign_nearest,
    centroid,
    distortion,
    sq_dist,
)
from .similarity import (
    NetworkSupportPreference,
    SimilarityMatrix,
    UniformPreference,
    apply_preference,
    build_similarity,
    median_off_diagonal,
    network_support,
)
from .ap_engine import (
    APConfig,
    APResult,
    MessageState,
    NoExemplarsError,
    identify_exemplars,
    net_similarity,
    run_ap,
    update_availabilities,
    update_responsibilities,
)
from .lbg import LBGConfig, LBGResult, init_random, lbg_refine
from .pipeline import (
    PipelineConfig,
    PipelineResult,
    SizeSearchError,
    adjust_codebook_size,
    run_iap_lbg,
    search_rs,
    search_uniform_scale,
)
from .imageio import (
    BlockGeometry,
    DigestMismatchError,
    FormatError,
    Image,
    IndexMap,
    PGMParseError,
    assemble_blocks,
    codebook_digest,
    decode,
    encode,
    extract_blocks,
    psnr,
    psnr_from_mse,
    read_codebook_file,
    read_index_file,
    read_pgm,
    write_codebook_file,
    write_index_file,
    write_pgm,
)
