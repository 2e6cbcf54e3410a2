"""Figure pipeline for stablefield experiment outputs."""

from .figures import (
    FigureSpec,
    plot_convergence,
    plot_energy_scan,
    plot_fields,
    plot_modulus,
    plot_posterior,
)
from .io import SchemaError

__version__ = "0.1.0"
