"""Deterministic CEC bus simulation for HDMI distribution trees.

The package models the single shared control wire of an HDMI tree: frame
codec, topology and addressing, per-device protocol behaviour, a covert
file channel riding on unused opcodes, attack orchestration, a two-slot
HTTP command relay, and a rule-based detector with mitigations.
"""

from cecsim.frames import CecFrame, FrameError, parse_frame, encode_frame

__version__ = "0.1.0"

__all__ = ["CecFrame", "FrameError", "parse_frame", "encode_frame", "__version__"]
