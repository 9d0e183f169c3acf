"""Hard-instance laboratory for smoothed score oracles.

Core pieces: discrete supports and codebooks (`support`), exact mixture
score/likelihood evaluation (`mixtures`), the masked adversarial oracle and
its rate windows (`oracle`), information metrics (`info`), shell-occupancy
proxy sweeps (`shells`), the query protocol and samplers (`protocol`), and
batch experiments behind a FastAPI service (`experiments`, `service`, `cli`).
"""

__version__ = "0.1.0"

from .support import Codebook, RatePacking, SupportSpec, build_support, pack_rates, sample_codebook

__all__ = [
    "Codebook",
    "RatePacking",
    "SupportSpec",
    "build_support",
    "pack_rates",
    "sample_codebook",
    "__version__",
]
