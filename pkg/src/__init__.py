"""Resource-state simulator: redundantly encoded photonic graph states from a single spin."""
