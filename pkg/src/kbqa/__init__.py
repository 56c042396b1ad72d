"""Question answering over a knowledge base via verbalized passages.

Pipeline: load/index a KB dump, link topic entities, extract an n-hop
subgraph with grouped events, verbalize it into sentences, assemble a
similarity-ranked passage with grounded candidate spans, and rank the
spans with a reader to produce the answer.
"""

__version__ = "0.1.0"

from .errors import PipelineError
from .kb import KbObject, KnowledgeBase, Relation, Triple

__all__ = [
    "PipelineError",
    "KnowledgeBase",
    "Triple",
    "Relation",
    "KbObject",
    "__version__",
]
