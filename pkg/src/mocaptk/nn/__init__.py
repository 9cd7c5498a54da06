from .tensor import Tensor, no_grad  # noqa: F401
