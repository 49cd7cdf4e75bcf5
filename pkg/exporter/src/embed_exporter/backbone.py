"""Frozen convolutional backbones producing pooled feature vectors.

The classification head is replaced with identity, so the model's output is
the penultimate pooled activation.  Parameters are frozen; a checksum helper
lets callers prove no weight ever changed.
"""

from __future__ import annotations

import hashlib

import torch
from torch import nn
from torchvision import models

# backbone id -> (constructor, pooled output dimension)
_BACKBONES = {
    "resnet18": (models.resnet18, 512),
    "resnet34": (models.resnet34, 512),
    "resnet50": (models.resnet50, 2048),
}


def available_backbones() -> list[str]:
    return sorted(_BACKBONES)


def load_backbone(
    name: str, weights: str = "pretrained", seed: int = 0
) -> tuple[nn.Module, int]:
    """Build a frozen feature extractor.

    ``weights`` is ``"pretrained"`` (ImageNet weights, downloaded on first
    use) or ``"random"`` (seeded random initialization, for offline tests
    and plumbing checks; useless for real accuracy).
    Returns the eval-mode model and its embedding dimension.
    """
    if name not in _BACKBONES:
        raise ValueError(
            f"unknown backbone {name!r}, expected one of {available_backbones()}"
        )
    constructor, dim = _BACKBONES[name]
    if weights == "pretrained":
        model = constructor(weights="IMAGENET1K_V1")
    elif weights == "random":
        torch.manual_seed(seed)
        model = constructor(weights=None)
    else:
        raise ValueError(
            f"weights must be 'pretrained' or 'random', got {weights!r}"
        )
    model.fc = nn.Identity()
    model.eval()
    for parameter in model.parameters():
        parameter.requires_grad_(False)
    return model, dim


def parameter_checksum(model: nn.Module) -> str:
    """SHA-256 over all parameter and buffer bytes, in state-dict order."""
    digest = hashlib.sha256()
    for _, tensor in sorted(model.state_dict().items()):
        digest.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return digest.hexdigest()
