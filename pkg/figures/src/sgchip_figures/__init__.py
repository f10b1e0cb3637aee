"""Figure rendering for the chip simulator's CSV outputs."""

from .render import FIGURES, RenderError, render, render_all

__all__ = ["FIGURES", "RenderError", "render", "render_all"]
