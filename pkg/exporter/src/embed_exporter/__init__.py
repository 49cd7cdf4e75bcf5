"""Image-to-embedding export with a frozen pretrained backbone."""

from .backbone import available_backbones, load_backbone, parameter_checksum
from .binfmt import file_bytes, record_bytes, write_embedding_file
from .export import ExportResult, ExportSpec, export_embeddings

__version__ = "0.1.0"

__all__ = [
    "ExportResult",
    "ExportSpec",
    "available_backbones",
    "export_embeddings",
    "file_bytes",
    "load_backbone",
    "parameter_checksum",
    "record_bytes",
    "write_embedding_file",
]
