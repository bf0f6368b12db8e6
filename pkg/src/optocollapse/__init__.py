"""Pulsed optomechanics as a test bench for wave-function collapse models.

Submodules
----------
phys_core
    Platform parameters, the pulsed optomechanical state, validity checks.
witness
    The photon-mirror separability witness (analytic and Fock-space oracle).
decoherence
    Spatial-decoherence models, the optical phase kernel and its moments.
protocol_sim
    Monte Carlo of the entangle / measure / feed back / homodyne protocol.
feasibility
    Experimental budget: pulse, drive, precision, cooling and verdicts.
cli
    ``optocollapse plan | witness | decohere | simulate``.
"""

from ._backend import BACKEND
from .phys_core import SystemParams, load_preset

__version__ = "0.1.0"

__all__ = ["BACKEND", "SystemParams", "load_preset", "__version__"]
