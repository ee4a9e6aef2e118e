"""Circuit-QED modeling of kinetic-inductance-coupled flux qubits."""
