# Shooting solver for the Hamiltonian boundary value problem
