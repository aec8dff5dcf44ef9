"""Block-wise diffusion LLM decoding with suffix pruning, adaptive confidence
thresholds and EOS early exit, over pluggable denoisers."""

__version__ = "0.1.0"
