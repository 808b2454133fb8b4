"""Training and decoding configuration for the adapter."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class AdapterConfig:
    model_id: str = "t5-base"
    batch_size: int = 32
    grad_accumulation: int = 2
    learning_rate: float = 3e-4
    weight_decay: float = 0.01
    epsilon: float = 1e-8
    patience: int = 3  # early stop on training-set micro F1
    beam_width: int = 1
    newline_token: str = "<nl>"  # newline as one atomic vocabulary symbol
    max_epochs: int = 30
    max_input_tokens: int = 512
    max_output_tokens: int = 8

    def __post_init__(self):
        if self.batch_size < 1 or self.grad_accumulation < 1:
            raise ValueError("batch size and gradient accumulation must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.beam_width < 1:
            raise ValueError("beam width must be >= 1")
