from .base import Denoiser, Entry, Predictions
from .local_markov import CONF_CEIL, CONF_FLOOR, LocalMarkovOracle, local_markov_oracle_new
from .scripted import (
    ScriptedOracle,
    load_script,
    random_script,
    script_from_json,
    script_to_json,
    scripted_oracle_new,
    uniform_script,
)
from .toy_transformer import ToyTransformer, rotary, toy_transformer_new

__all__ = [
    "Denoiser", "Entry", "Predictions",
    "LocalMarkovOracle", "local_markov_oracle_new", "CONF_FLOOR", "CONF_CEIL",
    "ScriptedOracle", "scripted_oracle_new", "load_script", "script_from_json",
    "script_to_json", "uniform_script", "random_script",
    "ToyTransformer", "toy_transformer_new", "rotary",
]
