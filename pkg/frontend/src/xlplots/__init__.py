from .figures import KINDS, FigureSpec, RenderError, render

__all__ = ["KINDS", "FigureSpec", "RenderError", "render"]
