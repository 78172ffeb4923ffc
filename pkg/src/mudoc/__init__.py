"""Document-grounded conversational multimedia learning service."""

__version__ = "0.1.0"

from .blocks import Block, BlockKind, BoundingBox, Chunk, Condition, ImageRecord, IngestConfig
from .errors import MudocError
from .gateway import MockGateway, OpenAIGateway, ProviderConfig
from .generation import AgentMode
from .index import DocumentIndex
from .retrieval import HybridRetriever, RetrievalConfig
from .sessions import TimingConfig

__all__ = [
    "AgentMode",
    "Block",
    "BlockKind",
    "BoundingBox",
    "Chunk",
    "Condition",
    "DocumentIndex",
    "HybridRetriever",
    "ImageRecord",
    "IngestConfig",
    "MockGateway",
    "MudocError",
    "OpenAIGateway",
    "ProviderConfig",
    "RetrievalConfig",
    "TimingConfig",
    "__version__",
]
