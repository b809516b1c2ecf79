"""Two-stage lung segmentation and nodule classification on a small numpy autodiff engine."""

from .errors import DataError, FormatError, NumericalError, ShapeError
from .tensor import Tensor, backward, grad_check, no_grad

__version__ = "0.1.0"
__all__ = ["DataError", "FormatError", "NumericalError", "ShapeError", "Tensor", "backward", "grad_check", "no_grad"]
