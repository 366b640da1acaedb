"""kappa-to-1 noisy trapdoor claw-free functions over LWE, with an exact
sparse-state oracle, a 2-round quantumness protocol, and DCP/EDCP
reduction pipelines."""

__version__ = "0.1.0"
