"""Meta-learned active-learning query policies trained with REINFORCE.

A meta network turns per-column histogram embeddings of a dataset into the
first-layer weights of a query policy, so one trained model can choose which
instances to label on datasets of any dimensionality.
"""
from .errors import ALPolicyError
from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["ALPolicyError", "BACKEND", "__version__"]
