"""Smart-card anonymous authentication for vehicular networks.

Two schemes share one toolkit: the hash-chain pseudonym scheme
(:mod:`vanetauth.proposed`) and a Diffie-Hellman smart-card baseline
(:mod:`vanetauth.baseline`), driven by a deterministic discrete-event
simulator (:mod:`vanetauth.simnet`) and measured by :mod:`vanetauth.bench`.
"""

from .errors import ProtocolError, VanetError
from .primitives import OpCounter
from .simnet import SimConfig, Simulator, sim_new

__all__ = ["OpCounter", "ProtocolError", "SimConfig", "Simulator", "VanetError", "sim_new"]
__version__ = "0.1.0"
