from sg3edit.generator.config import (
    GeneratorConfig,
    channel_schedule,
    reference_config,
    toy_config,
)
from sg3edit.generator.handle import GeneratorHandle
from sg3edit.latents import pseudo_align

__all__ = [
    "GeneratorConfig",
    "GeneratorHandle",
    "channel_schedule",
    "pseudo_align",
    "reference_config",
    "toy_config",
]
