"""Bridge from external sentence-embedding models to the EMBF file format."""

__version__ = "0.1.0"
