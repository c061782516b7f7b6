"""Matrix-free linear operators with adjoints.

Every operator is an :class:`OperatorHandle` carrying pure ``apply`` /
``apply_adjoint`` closures plus input/output shapes.  Shipped kinds:

* ``identity``
* ``gaussian_blur`` -- truncated convolution with the atmospheric-turbulence
  kernel (kappa/pi)*exp(-kappa*r^2), renormalized to unit sum, reflective
  boundary (self-adjoint);
* ``gradient`` -- forward differences, zero at the far edge, 2-channel output,
  adjoint the matching negative divergence;
* ``structural`` -- anisotropic gradient A(x)*grad f with
  A = I - (1 + c*|grad gamma|^2)^(-1) * (grad gamma)(grad gamma)^T;
* ``dense`` -- an explicit matrix, used for oracles and perturbations.

``assemble_dense`` reconstructs any operator column by column for use as a
verification oracle at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage

from .errors import DimensionError, ParameterError, SizeCapError
from .grid import GridFunction

DENSE_CAP = 4096

Shape = tuple  # (width, height, channels)


def _dim(shape):
    return shape[0] * shape[1] * shape[2]


@dataclass(frozen=True)
class OperatorHandle:
    input_shape: Shape
    output_shape: Shape
    kind: str
    _apply: Callable = field(repr=False)
    _adjoint: Callable = field(repr=False)

    def apply(self, x: GridFunction) -> GridFunction:
        if x.shape != self.input_shape:
            raise DimensionError(self.input_shape, x.shape,
                                 f"{self.kind}.apply")
        return self._apply(x)

    def apply_adjoint(self, y: GridFunction) -> GridFunction:
        if y.shape != self.output_shape:
            raise DimensionError(self.output_shape, y.shape,
                                 f"{self.kind}.apply_adjoint")
        return self._adjoint(y)


def apply(op: OperatorHandle, x: GridFunction) -> GridFunction:
    return op.apply(x)


def apply_adjoint(op: OperatorHandle, y: GridFunction) -> GridFunction:
    return op.apply_adjoint(y)


# ---------------------------------------------------------------------------

def make_identity(width: int, height: int, channels: int = 1) -> OperatorHandle:
    shape = (width, height, channels)
    return OperatorHandle(shape, shape, "identity", lambda x: x, lambda y: y)


def gaussian_stencil(kappa: float, radius: int,
                     pixel_scale: float = 1.0) -> np.ndarray:
    """Unit-sum (2*radius+1)^2 stencil of (kappa/pi)*exp(-kappa*r^2).

    `pixel_scale` is the physical size of one pixel: offsets enter the kernel
    as pixel_scale*(dx, dy), so scales below 1 widen the blur in pixels.
    """
    offs = np.arange(-radius, radius + 1) * pixel_scale
    dx2 = offs[None, :] ** 2 + offs[:, None] ** 2
    w = (kappa / np.pi) * np.exp(-kappa * dx2)
    return w / w.sum()


def make_gaussian_blur(width: int, height: int, kappa: float,
                       radius: int = 3,
                       pixel_scale: float = 1.0) -> OperatorHandle:
    if kappa <= 0:
        raise ParameterError(f"kappa must be positive, got {kappa}")
    if radius < 1:
        raise ParameterError(f"radius must be >= 1, got {radius}")
    if pixel_scale <= 0:
        raise ParameterError(f"pixel_scale must be positive, got {pixel_scale}")
    stencil = gaussian_stencil(kappa, radius, pixel_scale)
    shape = (width, height, 1)

    def blur(x: GridFunction) -> GridFunction:
        img = x.as_array()[:, :, 0]
        out = ndimage.convolve(img, stencil, mode="reflect")
        return GridFunction.from_array(out)

    # symmetric stencil + reflective boundary make the matrix symmetric
    return OperatorHandle(shape, shape, "gaussian_blur", blur, blur)


def make_gradient(width: int, height: int) -> OperatorHandle:
    if width < 2 or height < 2:
        raise ParameterError(
            f"gradient needs at least a 2x2 grid, got {width}x{height}")
    in_shape = (width, height, 1)
    out_shape = (width, height, 2)

    def grad(x: GridFunction) -> GridFunction:
        img = x.as_array()[:, :, 0]
        out = np.zeros((height, width, 2))
        out[:, :-1, 0] = img[:, 1:] - img[:, :-1]
        out[:-1, :, 1] = img[1:, :] - img[:-1, :]
        return GridFunction.from_array(out)

    def neg_div(u: GridFunction) -> GridFunction:
        arr = u.as_array()
        ux, uy = arr[:, :, 0], arr[:, :, 1]
        out = np.zeros((height, width))
        out[:, :-1] -= ux[:, :-1]
        out[:, 1:] += ux[:, :-1]
        out[:-1, :] -= uy[:-1, :]
        out[1:, :] += uy[:-1, :]
        return GridFunction.from_array(out)

    return OperatorHandle(in_shape, out_shape, "gradient", grad, neg_div)


@dataclass(frozen=True)
class StructuralField:
    """Level-set image gamma and sharpness constant c for the structural operator."""
    gamma: GridFunction
    c: float

    def __post_init__(self):
        if self.gamma.channels != 1:
            raise DimensionError(1, self.gamma.channels, "structural gamma")
        if self.c <= 0:
            raise ParameterError(f"c must be positive, got {self.c}")


def structural_matrix_field(field: StructuralField) -> np.ndarray:
    """Per-pixel symmetric 2x2 matrices A, shaped (height, width, 2, 2)."""
    gamma = field.gamma
    grad_op = make_gradient(gamma.width, gamma.height)
    g = grad_op.apply(gamma).as_array()
    gx, gy = g[:, :, 0], g[:, :, 1]
    scale = 1.0 / (1.0 + field.c * (gx ** 2 + gy ** 2))
    a = np.empty((gamma.height, gamma.width, 2, 2))
    a[:, :, 0, 0] = 1.0 - scale * gx * gx
    a[:, :, 0, 1] = -scale * gx * gy
    a[:, :, 1, 0] = a[:, :, 0, 1]
    a[:, :, 1, 1] = 1.0 - scale * gy * gy
    return a


def make_structural(field: StructuralField) -> OperatorHandle:
    gamma = field.gamma
    width, height = gamma.width, gamma.height
    grad_op = make_gradient(width, height)
    a = structural_matrix_field(field)
    in_shape = (width, height, 1)
    out_shape = (width, height, 2)

    def _a_times(u: GridFunction) -> GridFunction:
        v = u.as_array()
        out = np.einsum("hwij,hwj->hwi", a, v)
        return GridFunction.from_array(out)

    def lop(x: GridFunction) -> GridFunction:
        return _a_times(grad_op.apply(x))

    def lop_adjoint(u: GridFunction) -> GridFunction:
        # A is symmetric per pixel, so L* = grad* . A
        return grad_op.apply_adjoint(_a_times(u))

    return OperatorHandle(in_shape, out_shape, "structural", lop, lop_adjoint)


def make_dense(matrix: np.ndarray, input_shape: Shape,
               output_shape: Shape) -> OperatorHandle:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape != (_dim(output_shape), _dim(input_shape)):
        raise DimensionError((_dim(output_shape), _dim(input_shape)),
                             matrix.shape, "dense matrix")
    matrix = matrix.copy()
    matrix.setflags(write=False)

    def fwd(x: GridFunction) -> GridFunction:
        return GridFunction(*output_shape, values=matrix @ x.values)

    def adj(y: GridFunction) -> GridFunction:
        return GridFunction(*input_shape, values=matrix.T @ y.values)

    op = OperatorHandle(input_shape, output_shape, "dense", fwd, adj)
    object.__setattr__(op, "matrix", matrix)
    return op


def add_dense_perturbation(op: OperatorHandle, delta: np.ndarray,
                           cap: int = DENSE_CAP) -> OperatorHandle:
    """Dense operator equal to op + delta (delta given as a matrix)."""
    base = assemble_dense(op, cap=cap)
    return make_dense(base + delta, op.input_shape, op.output_shape)


def assemble_dense(op: OperatorHandle, cap: int = DENSE_CAP) -> np.ndarray:
    """Reconstruct the operator's matrix column by column (oracle use only)."""
    n = _dim(op.input_shape)
    if n > cap:
        raise SizeCapError(n, cap)
    if op.kind == "dense":
        return np.array(getattr(op, "matrix"))
    m = _dim(op.output_shape)
    out = np.empty((m, n))
    basis = np.zeros(n)
    for j in range(n):
        basis[j] = 1.0
        out[:, j] = op.apply(GridFunction(*op.input_shape, values=basis)).values
        basis[j] = 0.0
    return out
