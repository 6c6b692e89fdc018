from ddvc.codec.bitstream.container import (
    BitAccounting,
    Container,
    ContainerHeader,
    bit_accounting,
    pack_container,
    parse_container,
)
from ddvc.codec.bitstream.rans import rans_decode, rans_encode
from ddvc.codec.bitstream.tables import CdfTable, factorized_tables, gaussian_tables

__all__ = [
    "BitAccounting",
    "CdfTable",
    "Container",
    "ContainerHeader",
    "bit_accounting",
    "factorized_tables",
    "gaussian_tables",
    "pack_container",
    "parse_container",
    "rans_decode",
    "rans_encode",
]
