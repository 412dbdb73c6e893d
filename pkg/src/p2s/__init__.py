"""Verifier-guided prompt repair for code generation, with lowering of
verified programs to synthesizable HLS C and synthesis-report mining."""

__version__ = "0.1.0"
