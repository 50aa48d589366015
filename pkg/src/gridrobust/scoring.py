"""Competition-style episode score in [-100, 100].

Anchors: -100 for an initial blackout, 0 for the do-nothing return ``G_dn``,
80 for the completion return ``G_c`` and 100 for the best possible return
``G_max`` (every step rewarded 1). Between anchors the score is linear in the
episode return.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ScenarioAnchors:
    g_dn: float
    steps_dn: int
    n_steps: int

    @property
    def g_max(self) -> float:
        return float(self.n_steps)

    @property
    def g_c(self) -> float:
        # do-nothing per-step rate extrapolated to a full episode
        if self.steps_dn <= 0:
            return 0.0
        return self.g_dn * self.n_steps / self.steps_dn

    def to_dict(self) -> dict:
        return {"g_dn": self.g_dn, "steps_dn": self.steps_dn, "n_steps": self.n_steps,
                "g_c": self.g_c, "g_max": self.g_max}


def score_episode(episode_return: float, steps_survived: int, anchors: ScenarioAnchors | None) -> float:
    if anchors is None:
        raise ValueError("scenario anchors are required")
    if steps_survived <= 0:
        return -100.0
    g = episode_return
    g_dn, g_c, g_max = anchors.g_dn, anchors.g_c, anchors.g_max
    if g < g_dn:
        score = -100.0 + 100.0 * g / g_dn if g_dn > 0 else -100.0
    elif g_c - g_dn > 1e-12:
        if g <= g_c:
            score = 80.0 * (g - g_dn) / (g_c - g_dn)
        elif g_max > g_c:
            score = 80.0 + 20.0 * (g - g_c) / (g_max - g_c)
        else:
            score = 100.0
    else:
        # do-nothing completes: the completion band collapses onto G_dn
        score = 100.0 * (g - g_dn) / (g_max - g_dn) if g_max > g_dn else 0.0
    return float(min(100.0, max(-100.0, score)))
