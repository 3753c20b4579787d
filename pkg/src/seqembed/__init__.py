"""Numeric-sequence embedding evaluation and checkpoint merging toolkit."""

__version__ = "0.1.0"

FORMAT_VERSIONS = {"SEQCORPUS": 1, "EMBF": 1, "TMAP": 1}
