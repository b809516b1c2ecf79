from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import numpy as np


@dataclass
class TrainConfig:
    """Optimization settings for both stages.

    ``iterations`` caps Stage 1 by iteration count instead of running all of
    ``epochs_stage1``; ``None`` means full epochs.
    """

    alpha: float = 0.001
    learning_rate: float = 1e-4
    epochs_stage1: int = 35
    epochs_stage2: int = 50
    batch_size: int = 8
    seed: int = 0
    betas: Tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    iterations: Optional[int] = None
    scale: str = "tiny"
    disc_window: int = 20

    def __post_init__(self):
        self.betas = tuple(self.betas)
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs_stage1 < 1 or self.epochs_stage2 < 1:
            raise ValueError("epoch counts must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.iterations is not None and self.iterations < 1:
            raise ValueError("iterations must be >= 1")

    def rng_streams(self):
        """Independent generators: segmenter init, discriminator init, data order, pair shuffling."""
        seqs = np.random.SeedSequence(self.seed & 0xFFFFFFFFFFFFFFFF).spawn(4)
        names = ("init_seg", "init_disc", "data", "shuffle")
        return {name: np.random.default_rng(s) for name, s in zip(names, seqs)}

    def init_seed(self, which: str) -> int:
        seqs = np.random.SeedSequence(self.seed & 0xFFFFFFFFFFFFFFFF).spawn(4)
        idx = {"init_seg": 0, "init_disc": 1, "init_clf": 0}[which]
        return int(seqs[idx].generate_state(1, dtype=np.uint64)[0])

    def to_dict(self):
        return asdict(self)
