"""Figures for torusmv experiment artifacts.

A figure job points at a run manifest, names a figure kind and an output
path; rendering reads only the CSV/JSON files the run wrote, never
recomputes anything, and emits both PNG and SVG deterministically.
"""

from .render import FigureJob, SchemaError, render

__version__ = "0.1.0"
