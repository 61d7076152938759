"""Elliptical Radon transform toolkit.

Forward projector and weighted adjoint for integrals over the family of
ellipses whose foci rotate on the unit circle a fixed angular distance
apart, plus an edge-emphasizing local reconstruction, analytic phantoms,
and numerical certification of the geometry's imaging conditions.
"""

from . import microlocal
from .errors import (BracketingError, ConfigurationError, DomainError,
                     EllradError, FocalPointError, FocalSegmentError,
                     SinogramParseError, SupportViolationError)
from .geometry import (EllipseParam, EllipticCoord, PhiWindow, ScanGeometry,
                       arc_length_element, cartesian_to_elliptic,
                       ellipse_point, ellipse_point_reference,
                       elliptic_to_cartesian, emitter, emitter_deriv,
                       gradient_weight, is_on_focal_segment, level,
                       make_geometry, phi_window, phi_window_arrays,
                       receiver, receiver_deriv, reduce_angle, rotate)
from .kernels import available_backends, default_backend, get_backend
from .phantom import (Disk, Ellipse, GaussianBump, ImageGrid, Phantom, Rect,
                      canonical_phantoms, evaluate, evaluate_xy, load_phantom,
                      rasterize, read_grid_csv, save_phantom, shape_table,
                      validate_support, write_grid_csv, write_grid_pgm)
from .transform import (QuadratureSpec, Sinogram, SinogramSpec, adjoint,
                        forward, forward_nodes, image_inner,
                        lambda_reconstruct, normal_operator, parameter_inner,
                        read_sinogram, write_sinogram)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
