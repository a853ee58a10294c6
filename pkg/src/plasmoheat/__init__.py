"""Heat generation by clusters of plasmonic nanoparticles."""

__version__ = "0.1.0"
