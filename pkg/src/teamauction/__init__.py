"""False-name-proof auctions for hiring a team.

Set systems with owned elements, the MP and AP mechanisms, VCG with a
reserve cost, the nu(c) frugality benchmark, bounded deviation search and
random-graph experiments.
"""

from .mechanisms import AuctionOutcome, Mechanism, ap_run, mp_run, rvcg_run, threshold_oracle
from .setsystem import BidProfile, ExplicitFamily, OwnedSetSystem, StGraph, truthful_bids

__version__ = "0.1.0"

__all__ = [
    "AuctionOutcome",
    "BidProfile",
    "ExplicitFamily",
    "Mechanism",
    "OwnedSetSystem",
    "StGraph",
    "ap_run",
    "mp_run",
    "rvcg_run",
    "threshold_oracle",
    "truthful_bids",
]
