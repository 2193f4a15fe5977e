from .grid import FieldSeries, Grid, GridError, ScalarField, VectorField, make_grid
from .calculus import (
    curl_array,
    derivative,
    gradient_tensor,
    partial,
    solenoidal_projection,
    velocity_from_vorticity,
)
from .generators import GENERATORS, GeneratorError, demo1d_function, sample_analytic, sample_series
from .io import FieldFileError, decode_field, encode_field, read_field, write_field

__all__ = [
    "FieldSeries", "Grid", "GridError", "ScalarField", "VectorField", "make_grid",
    "curl_array", "derivative", "gradient_tensor", "partial", "solenoidal_projection",
    "velocity_from_vorticity", "GENERATORS", "GeneratorError", "demo1d_function",
    "sample_analytic", "sample_series", "FieldFileError", "decode_field", "encode_field",
    "read_field", "write_field",
]
