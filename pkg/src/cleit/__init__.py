"""Cross-level information transmission networks.

Trains a drug-sensitivity (or any multi-task regression) predictor for a
weak "low-level" feature domain by transferring the latent representation
learned on a stronger "high-level" domain: VAE pre-training on both sides,
a transmitter MLP aligned with a contrastive / MMD / WGAN discrepancy, and
supervised fine-tuning with gradual unfreezing.
"""

__version__ = "0.1.0"

from .tensor import Rng, Tensor, grad_check, no_grad

__all__ = ["Rng", "Tensor", "grad_check", "no_grad", "__version__"]
