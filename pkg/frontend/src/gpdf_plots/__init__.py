"""Static figure renderer for gpdf scenario output directories."""
from .figures import (
    FIGURE_KINDS,
    FigureSpec,
    RenderResult,
    render_figure,
    specs_for_csv,
    write_index,
)
from .schemas import SCHEMAS, SchemaError, read_table

__version__ = "0.1.0"

__all__ = [
    "FIGURE_KINDS",
    "FigureSpec",
    "RenderResult",
    "SCHEMAS",
    "SchemaError",
    "read_table",
    "render_figure",
    "specs_for_csv",
    "write_index",
    "__version__",
]
