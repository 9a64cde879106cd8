"""Linear-optics type-II fusion between two resource states, plain and boosted."""
