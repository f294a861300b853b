"""Per-episode training records."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class RunRecord:
    """One finished episode: its return and the rolling mean over the
    previous (up to) 100 episodes including this one."""

    seed: int
    episode: int
    steps: int          # cumulative environment steps at episode end
    episode_return: float
    rolling100: float
