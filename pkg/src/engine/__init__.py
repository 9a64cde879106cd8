"""Resource-state generation engine: sparse Fock states, spin gates, protocol."""
