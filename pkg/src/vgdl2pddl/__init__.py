"""VGDL-to-PDDL compiler toolchain with a planning agent and benchmark harness."""

__version__ = "0.1.0"
