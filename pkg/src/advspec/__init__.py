"""Reweighted-WGAN generation of natural adversarial examples.

Train a Wasserstein GAN (one-sided gradient penalty) over an empirical
data distribution whose sample weights come from a black-box classifier's
predictions, then evaluate the trained generator as an attack.
"""

from advspec.ndtensor import Tensor, Tape, backward, grad, no_grad

__version__ = "0.1.0"

__all__ = ["Tensor", "Tape", "backward", "grad", "no_grad", "__version__"]
