"""haznav: hazard-aware vision-based steering at desk scale.

Synthetic driving worlds, two threat-value models with segmentation-
weighted image fusion, a from-scratch convolutional steering controller,
and the three-case comparative evaluation protocol.
"""

__version__ = "0.1.0"

from .core import DrivingDirection, ImageTensor, SteeringAngle, steering_to_direction
from .rng import Rng, derive_seed

__all__ = [
    "DrivingDirection",
    "ImageTensor",
    "Rng",
    "SteeringAngle",
    "derive_seed",
    "steering_to_direction",
    "__version__",
]
