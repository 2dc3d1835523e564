# Hamiltonian of the control problem and its flow
