"""Non-Markovian master-equation simulator for quantum-dot transport.

Library layout: reservoir kernels (envkit), memory-integral solvers
(volterra), the three transport models (singledot, spindeg, twodot), the
exact finite-environment reference (oracle), run orchestration (runs), and
the CLI (cli).
"""

__version__ = "0.1.0"
