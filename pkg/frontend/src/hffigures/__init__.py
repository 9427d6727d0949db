from .render import (PlotSpec, RenderError, render_coherence_table,
                     render_sweep_figure)

__version__ = "0.1.0"
__all__ = ["PlotSpec", "RenderError", "render_coherence_table",
           "render_sweep_figure", "__version__"]
