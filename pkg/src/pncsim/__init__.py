"""pncsim: adaptive binary physical-layer network coding for N-MIMO uplinks.

Library layout:
  gf2        exact GF(2) linear algebra on bit-packed rows
  modem      Gray-labeled square QAM and joint-message indexing
  sfs        singular fade states, clash partitions, separation scores
  search     off-line candidate-table build and on-line mapping selection
  phy        fading, noise, bit-LLR demapping, LLR quantization
  coding     rate-2/3 punctured convolutional code (soft Viterbi)
  baselines  ideal / quantized CoMP receivers and backhaul accounting
  harness    Monte-Carlo outage experiments, CSV + manifest emission
  kernels    hot-kernel dispatch: compiled extension or NumPy fallback
"""

__version__ = "0.1.0"

from .gf2 import BinMatrix, BinVector  # noqa: F401
from .modem import build_qam, constellation_by_name  # noqa: F401
