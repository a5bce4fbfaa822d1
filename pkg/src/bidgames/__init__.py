"""Mean-payoff bidding games on strongly connected graphs.

Modules: ``arena`` (graphs, mechanisms), ``solver`` (random-turn games),
``strategies``, ``engine`` (seeded play), ``certify`` (ledger checks),
``parity`` and ``cli``.
"""
from .errors import BidGameError

__version__ = "0.1.0"
__all__ = ["BidGameError", "__version__"]
