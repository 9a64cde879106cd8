"""Target states, closed-form fidelities and parameter sweeps."""
