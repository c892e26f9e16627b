"""Budget presets.

Desk scale keeps every run on a laptop; paper scale runs the full training
budget and dataset sizes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Tuple

from aembench.config import settings


@dataclass(frozen=True)
class Scale:
    """Immutable container for a training/evaluation budget."""

    name: str
    epochs: int
    batch_size: int
    t_max: int
    # (train, val, test) row counts, per task; "*" is the fallback.
    sizes: Dict[str, Tuple[int, int, int]] = field(default_factory=dict)

    def split_sizes(self, task: str) -> Tuple[int, int, int]:
        return self.sizes.get(task, self.sizes["*"])


DESK = Scale(
    name="desk",
    epochs=settings.EPOCHS,
    batch_size=settings.BATCH_SIZE,
    t_max=settings.T_MAX,
    sizes={"*": (settings.TRAIN_SIZE, settings.VAL_SIZE, settings.TEST_SIZE)},
)

PAPER = Scale(
    name="paper",
    epochs=300,
    batch_size=1024,
    t_max=200,
    sizes={
        "stack": (40_000, 10_000, 500),
        "shell": (40_000, 10_000, 500),
        "adm-surrogate": (8_000, 2_000, 500),
        "*": (40_000, 10_000, 500),
    },
)


def scale_for(paper_scale: bool) -> Scale:
    return PAPER if paper_scale else DESK
