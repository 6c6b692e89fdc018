from ddvc.codec.classic.correlation import LaplacianModel, laplacian_fit, soft_input
from ddvc.codec.classic.dct import dct4
from ddvc.codec.classic.ldpca import LdpcaCode, ldpca_decode, ldpca_encode
from ddvc.codec.classic.quantizer import QuantizedBands, quantize_bands
from ddvc.codec.classic.sw_check import SWRateReport, sw_rate_check

__all__ = [
    "LaplacianModel",
    "LdpcaCode",
    "QuantizedBands",
    "SWRateReport",
    "dct4",
    "laplacian_fit",
    "ldpca_decode",
    "ldpca_encode",
    "quantize_bands",
    "soft_input",
    "sw_rate_check",
]
