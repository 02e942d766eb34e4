"""Quantifying distribution inference leakage.

Closed-form bounds and ``n_leaked`` (``leakage``), exact and Monte-Carlo
oracles (``oracle``), synthetic ratio distributions (``synthdata``), small
numpy networks (``nets``), the attack suite (``attacks``) and sweep
orchestration (``harness``).
"""

from . import leakage, nets, oracle, synthdata
from .errors import DistinfError
from .leakage import (
    LeakageReport,
    RatioPair,
    ZipfSpec,
    binary_accuracy_bound,
    n_leaked_binary,
    n_leaked_degree,
    n_leaked_regression,
    zipf_accuracy_bound,
)

__version__ = "0.1.0"

__all__ = [
    "DistinfError",
    "LeakageReport",
    "RatioPair",
    "ZipfSpec",
    "binary_accuracy_bound",
    "leakage",
    "n_leaked_binary",
    "n_leaked_degree",
    "n_leaked_regression",
    "nets",
    "oracle",
    "synthdata",
    "zipf_accuracy_bound",
]
