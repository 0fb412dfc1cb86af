"""Rebuild trigger based on the model's negative description cost.

The build ledger fixes a baseline: the bits spent encoding the facts
the model left unexplained over the training horizon. The monitor
accumulates the same quantity over the online stream; once the stream's
unexplained bits exceed the baseline, the model is cheaper to rebuild
than to keep patching and a refresh is signalled. The signal latches
until reset so callers see it even when polling after more arrivals.
"""

from __future__ import annotations

from .mdl import log_binomial


class DriftLedger:
    def __init__(self, baseline_bits, universe):
        # incremental ledgers can carry float dust around zero
        if baseline_bits < -1e-6:
            raise ValueError("baseline must be non-negative")
        if universe <= 0:
            raise ValueError("universe must be positive")
        self.baseline_bits = max(0.0, float(baseline_bits))
        self.universe = universe
        self.online_bits = 0.0
        self._t_bits = {}        # t -> (bits, counts)
        self._flagged = False

    @classmethod
    def from_build(cls, result):
        """Baseline from a finished build over its training horizon."""
        return cls(result.ledger.bits_negative, result.ledger.ctx.universe())

    def observe(self, t, mapped, unmapped, assoc=0, scope_rest=0, universe=None):
        """Set one timestamp's counts; replaces any earlier observation.

        Both cost components are accepted: conceptual coverage (mapped
        against unmapped) and temporal coverage of in-scope facts
        (assoc against scope_rest). `universe` overrides the stored
        term so a growing entity table can be reflected.
        """
        for n in (mapped, unmapped, assoc, scope_rest):
            if n < 0:
                raise ValueError("counts must be non-negative")
        u = self.universe if universe is None else universe
        if u <= 0:
            raise ValueError("universe must be positive")
        bits = log_binomial(u - mapped, unmapped)
        bits += log_binomial(u - assoc, scope_rest)
        old = self._t_bits.get(t)
        if old is not None:
            self.online_bits -= old[0]
        self._t_bits[t] = (bits, (mapped, unmapped, assoc, scope_rest))
        self.online_bits += bits
        if self.online_bits > self.baseline_bits:
            self._flagged = True
        return bits

    def should_refresh(self):
        return self._flagged

    def reset(self, baseline_bits=None):
        """Start a fresh window, optionally under a new baseline."""
        if baseline_bits is not None:
            if baseline_bits < -1e-6:
                raise ValueError("baseline must be non-negative")
            self.baseline_bits = max(0.0, float(baseline_bits))
        self.online_bits = 0.0
        self._t_bits.clear()
        self._flagged = False

    def snapshot(self):
        return {
            "baseline_bits": self.baseline_bits,
            "online_bits": self.online_bits,
            "timestamps": len(self._t_bits),
            "flagged": self._flagged,
        }
