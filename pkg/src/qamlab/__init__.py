"""QAM constellation toolkit: generation, metrics, bit mapping, detection,
closed-form error probabilities and reproducible AWGN Monte Carlo."""

__version__ = "0.1.0"

from .analytic import SnrSpec, bep_from_sep, q1, q_craig, sep_for  # noqa: E402
from .bitmap import BitMapping, gray_penalty, mapping_for  # noqa: E402
from .constellations import Constellation, Family, generate  # noqa: E402
from .metrics import compute_metrics  # noqa: E402

__all__ = [
    "BitMapping",
    "Constellation",
    "Family",
    "SnrSpec",
    "bep_from_sep",
    "compute_metrics",
    "generate",
    "gray_penalty",
    "mapping_for",
    "q1",
    "q_craig",
    "sep_for",
]
