"""N qubits coupled to one lossy nanocavity mode: dark states, spectra, noise."""
__version__ = "0.1.0"
