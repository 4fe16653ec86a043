"""ditkit: SAT-based verification of data-independent timing for
synchronous netlists.

The toolkit proves or refutes that the control-visible behavior of a
design (handshakes, timing) is independent of the data it processes,
via single-cycle inductive 2-safety proofs, bounded unrolled proofs,
and counterexample-guided classification of state registers.
"""

__version__ = "0.1.0"
