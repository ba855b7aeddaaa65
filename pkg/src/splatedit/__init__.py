"""splatedit: feed-forward native editing of 3D Gaussian Splatting scenes."""

__version__ = "0.1.0"

from .autodiff import Tensor  # noqa: F401
