"""Anchor-guided compression and summarization of long meeting transcripts.

Pipeline: reconstruct responses from windowed contexts with a small
encoder-decoder, trace which context tokens drove each reconstruction
(attention weights scaled by their exact gradients), select the top tokens as
anchors, compress the full token-embedding sequence to a fixed bucket budget
around those anchors, and summarize from the compressed sequence.
"""

__version__ = "0.1.0"
