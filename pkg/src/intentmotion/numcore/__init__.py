from .dct import DctBasis, apply_dct, apply_idct, dct_basis
from .gradcheck import finite_difference_check
from .tape import Tape, Var, layer_norm, matmul, norm, softmax_cross_entropy, tanh, transpose

__all__ = [
    "DctBasis", "apply_dct", "apply_idct", "dct_basis", "finite_difference_check",
    "Tape", "Var", "layer_norm", "matmul", "norm", "softmax_cross_entropy", "tanh",
    "transpose",
]
