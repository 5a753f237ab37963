"""Nonlocal porous medium flow in one dimension.

``u_t = div(u^{m-1} grad K_s u)`` with ``K_s`` the Riesz potential of order
``2s``, together with its integrated (primitive) form, explicit barrier
functions and the numerical diagnostics used to check them.
"""
__version__ = "0.1.0"

from . import barriers, diagnostics, evolve, fracops, integrated, validate  # noqa: E402

__all__ = ["barriers", "diagnostics", "evolve", "fracops", "integrated", "validate", "__version__"]
