# Checks of the non-degeneracy condition for minimizing controls
