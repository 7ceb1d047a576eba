"""genbridge: reference server for the generation wire contract, serving
deterministic rule stubs or a user-supplied seq2seq model."""

from .rules import delete_fillers, split_query
from .server import BridgeConfig, create_app, load_config

__version__ = "0.1.0"
