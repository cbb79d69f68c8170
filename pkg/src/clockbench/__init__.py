"""clockbench: a deterministic simulated-cluster laboratory for MPI benchmarking.

Simulated drifting clocks and latency-sampled messaging make it possible to
run the classic MPI clock-synchronization algorithms (SKaMPI, Netgauge, JK,
HCA), the window- and barrier-based measurement schemes, and the statistical
comparison pipeline with full ground-truth visibility.
"""

__version__ = "0.1.0"
