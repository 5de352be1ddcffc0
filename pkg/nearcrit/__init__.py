"""nearcrit - near-critical percolation, impurities and forest fires on the triangular lattice"""
