"""Rule-graph summarization and online anomaly detection for temporal KGs."""

from .store import Fact, DurationFact, TkgStore, ParseError

__all__ = ["Fact", "DurationFact", "TkgStore", "ParseError"]
__version__ = "0.1.0"
