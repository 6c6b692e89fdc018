"""4×4 orthonormal DCT between an image plane and its 16 frequency bands."""

from __future__ import annotations

import numpy as np
from scipy.fft import dctn, idctn

from ddvc.codec.errors import ParameterError


BLOCK = 4
BAND_COUNT = BLOCK * BLOCK


def dct4(values: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Forward: H×W plane -> 16×(H/4)×(W/4) bands (band 4u+v holds coefficient (u, v)).

    Inverse: bands -> plane.
    """
    values = np.asarray(values, dtype=np.float64)
    if inverse:
        if values.ndim != 3 or values.shape[0] != BAND_COUNT:
            raise ParameterError(f"expected 16×h×w bands, got {values.shape}")
        _, rows, cols = values.shape
        coefficients = values.reshape(BLOCK, BLOCK, rows, cols).transpose(2, 3, 0, 1)
        blocks = idctn(coefficients, axes=(2, 3), norm="ortho")
        return blocks.transpose(0, 2, 1, 3).reshape(rows * BLOCK, cols * BLOCK)

    if values.ndim != 2:
        raise ParameterError(f"expected an H×W plane, got {values.shape}")
    height, width = values.shape
    if height % BLOCK or width % BLOCK:
        raise ParameterError(f"plane {height}×{width} is not divisible by {BLOCK}")
    rows, cols = height // BLOCK, width // BLOCK
    blocks = values.reshape(rows, BLOCK, cols, BLOCK).transpose(0, 2, 1, 3)
    coefficients = dctn(blocks, axes=(2, 3), norm="ortho")
    return coefficients.transpose(2, 3, 0, 1).reshape(BAND_COUNT, rows, cols)
