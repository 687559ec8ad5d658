"""noetherlab: symbolic + lattice workbench for nonlocal conservation-flux
experiments with a complex scalar field."""

__version__ = "0.1.0"

from . import dynamics, gauge, lattice, noether, presets, symlang

__all__ = ["dynamics", "gauge", "lattice", "noether", "presets", "symlang", "__version__"]
