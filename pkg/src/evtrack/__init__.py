"""RGB + event-camera single-object tracking, desk scale.

A small stack: a from-scratch autograd tensor engine, an event-camera
simulator with a synthetic scenario generator, a pooling-based event
feature backbone, cross-attention fusion between the RGB and event
branches, relation modelling over template/search tokens, a center-based
tracking head, and a training/evaluation harness.
"""

from .tensor import Tensor, backward
from .gradcheck import grad_check

__version__ = "0.1.0"

__all__ = ["Tensor", "backward", "grad_check", "__version__"]
