"""Mixture-of-experts opinion ranking for product question answering.

Reviews are split into sentences; each sentence acts as an expert that is
weighted by a learned relevance function and casts a learned vote.
"""

__version__ = "0.1.0"
