"""Penalty functionals W(x): values, gradients, and convexity metadata.

Shipped families:

* ``squared_norm``        W(x) = a*|Lx|^2
* ``seminorm_power``      W(x) = a*|Lx|^q, q >= 1
* ``weighted_sum``        W(x) = sum_i a_i*|L_i x|^{q_i}
* ``total_variation``     smoothed isotropic TV,
                          sum_p sqrt(|grad x|^2 + eps^2) - eps*#pixels
* ``bv_norm``             smoothed |x|_1 plus the smoothed TV above

All shipped penalizers are convex, nonnegative (lower bound 0), and expose a
gradient wherever smooth; the nonsmooth kinds require a positive smoothing
eps for gradient evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError, ParameterError, UnsupportedConfigError
from .grid import GridFunction
from .operators import OperatorHandle, make_gradient, make_identity

DEFAULT_TV_EPS = 1e-3


@dataclass(frozen=True)
class PenaltyTerm:
    weight: float
    operator: OperatorHandle
    exponent: float

    def __post_init__(self):
        if self.weight <= 0:
            raise ParameterError(f"term weight must be positive, got {self.weight}")
        if self.exponent < 1:
            raise ParameterError(
                f"exponent must be >= 1 for convexity, got {self.exponent}")


@dataclass(frozen=True)
class Penalizer:
    kind: str
    terms: tuple = ()
    grad_op: Optional[OperatorHandle] = None
    smoothing_eps: float = 0.0
    weight: float = 1.0
    lower_bound: float = 0.0
    strictly_convex: bool = False

    @property
    def input_shape(self):
        if self.kind in ("total_variation", "bv_norm"):
            return self.grad_op.input_shape
        return self.terms[0].operator.input_shape


def squared_norm(op: OperatorHandle, weight: float = 1.0,
                 strictly_convex: Optional[bool] = None) -> Penalizer:
    if strictly_convex is None:
        strictly_convex = op.kind == "identity"
    return Penalizer("squared_norm", terms=(PenaltyTerm(weight, op, 2.0),),
                     strictly_convex=strictly_convex)


def seminorm_power(op: OperatorHandle, q: float, weight: float = 1.0,
                   strictly_convex: Optional[bool] = None) -> Penalizer:
    if strictly_convex is None:
        strictly_convex = op.kind == "identity" and q > 1
    return Penalizer("seminorm_power", terms=(PenaltyTerm(weight, op, q),),
                     strictly_convex=strictly_convex)


def make_weighted_sum(terms, strictly_convex: bool = False) -> Penalizer:
    terms = tuple(terms)
    if not terms:
        raise ParameterError("weighted sum needs at least one term")
    shape = terms[0].operator.input_shape
    for t in terms:
        if t.operator.input_shape != shape:
            raise DimensionError(shape, t.operator.input_shape,
                                 "weighted-sum term")
    if not strictly_convex:
        # identity term with q>1 forces a trivial combined null space
        strictly_convex = all(t.exponent > 1 for t in terms) and any(
            t.operator.kind == "identity" for t in terms)
    return Penalizer("weighted_sum", terms=terms, strictly_convex=strictly_convex)


def total_variation(width: int, height: int,
                    eps: float = DEFAULT_TV_EPS) -> Penalizer:
    if eps < 0:
        raise ParameterError(f"smoothing eps must be >= 0, got {eps}")
    return Penalizer("total_variation", grad_op=make_gradient(width, height),
                     smoothing_eps=eps)


def bv_norm(width: int, height: int, eps: float = DEFAULT_TV_EPS) -> Penalizer:
    if eps < 0:
        raise ParameterError(f"smoothing eps must be >= 0, got {eps}")
    return Penalizer("bv_norm", grad_op=make_gradient(width, height),
                     smoothing_eps=eps)


def scale(w: Penalizer, factor: float) -> Penalizer:
    """Penalizer equal to factor * W."""
    if factor <= 0:
        raise ParameterError(f"scale factor must be positive, got {factor}")
    if w.kind in ("total_variation", "bv_norm"):
        return Penalizer(w.kind, grad_op=w.grad_op,
                         smoothing_eps=w.smoothing_eps,
                         weight=w.weight * factor,
                         strictly_convex=w.strictly_convex)
    terms = tuple(PenaltyTerm(t.weight * factor, t.operator, t.exponent)
                  for t in w.terms)
    return Penalizer(w.kind, terms=terms, strictly_convex=w.strictly_convex)


def quadratic_terms(w: Penalizer):
    """The (weight, operator) list if W is a sum of q=2 terms, else None."""
    if w.kind in ("total_variation", "bv_norm"):
        return None
    if any(t.exponent != 2.0 for t in w.terms):
        return None
    return [(t.weight, t.operator) for t in w.terms]


# ---------------------------------------------------------------------------
# evaluation

def _check_shape(w: Penalizer, x: GridFunction):
    if x.shape != w.input_shape:
        raise DimensionError(w.input_shape, x.shape, f"{w.kind}.value")


def _tv_parts(w: Penalizer, x: GridFunction):
    g = w.grad_op.apply(x).as_array()
    mag2 = g[:, :, 0] ** 2 + g[:, :, 1] ** 2
    return g, np.sqrt(mag2 + w.smoothing_eps ** 2)


def value(w: Penalizer, x: GridFunction) -> float:
    _check_shape(w, x)
    if w.kind in ("total_variation", "bv_norm"):
        eps = w.smoothing_eps
        _, root = _tv_parts(w, x)
        total = float(np.sum(root) - eps * root.size)
        if w.kind == "bv_norm":
            total += float(np.sum(np.sqrt(x.values ** 2 + eps ** 2))
                           - eps * x.values.size)
        return w.weight * total
    total = 0.0
    for t in w.terms:
        total += t.weight * np.linalg.norm(t.operator.apply(x).values) ** t.exponent
    return float(total)


def gradient(w: Penalizer, x: GridFunction) -> GridFunction:
    _check_shape(w, x)
    if w.kind in ("total_variation", "bv_norm"):
        if w.smoothing_eps <= 0:
            raise UnsupportedConfigError(
                f"{w.kind} gradient requires smoothing eps > 0")
        g, root = _tv_parts(w, x)
        flux = g / root[:, :, None]
        out = w.grad_op.apply_adjoint(GridFunction.from_array(flux)).values
        if w.kind == "bv_norm":
            out = out + x.values / np.sqrt(x.values ** 2 + w.smoothing_eps ** 2)
        return GridFunction(*x.shape, values=w.weight * out)
    out = np.zeros_like(x.values)
    for t in w.terms:
        lx = t.operator.apply(x)
        if t.exponent == 2.0:
            out += 2.0 * t.weight * t.operator.apply_adjoint(lx).values
            continue
        norm = np.linalg.norm(lx.values)
        if norm == 0.0:
            continue  # minimal-norm subgradient is 0 at Lx = 0
        coeff = t.weight * t.exponent * norm ** (t.exponent - 2.0)
        out += coeff * t.operator.apply_adjoint(lx).values
    return GridFunction(*x.shape, values=out)


# ---------------------------------------------------------------------------
# CLI spec strings: "l2", "grad2", "seminorm:<op>:<q>", "tv:<eps>", "bv:<eps>",
# "sum:<a>*<op>^<q>(+<a>*<op>^<q>)*" with op in {id, grad, struct}

def _named_operator(name: str, width: int, height: int, structural):
    if name == "id":
        return make_identity(width, height)
    if name == "grad":
        return make_gradient(width, height)
    if name == "struct":
        if structural is None:
            raise ParameterError(
                "penalizer spec uses 'struct' but no structural operator given")
        return structural
    raise ParameterError(f"unknown operator name {name!r}")


def parse_penalizer(spec: str, width: int, height: int,
                    structural: Optional[OperatorHandle] = None) -> Penalizer:
    spec = spec.strip()
    if spec == "l2":
        return squared_norm(make_identity(width, height))
    if spec == "grad2":
        return squared_norm(make_gradient(width, height))
    if spec.startswith("seminorm:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise ParameterError(f"bad seminorm spec {spec!r}")
        op = _named_operator(parts[1], width, height, structural)
        return seminorm_power(op, float(parts[2]))
    if spec.startswith("tv:") or spec == "tv":
        eps = float(spec.split(":", 1)[1]) if ":" in spec else DEFAULT_TV_EPS
        return total_variation(width, height, eps)
    if spec.startswith("bv:") or spec == "bv":
        eps = float(spec.split(":", 1)[1]) if ":" in spec else DEFAULT_TV_EPS
        return bv_norm(width, height, eps)
    if spec.startswith("sum:"):
        terms = []
        for chunk in spec[4:].split("+"):
            try:
                weight_str, rest = chunk.split("*", 1)
                op_name, q_str = rest.split("^", 1)
                term = PenaltyTerm(float(weight_str),
                                   _named_operator(op_name.strip(), width,
                                                   height, structural),
                                   float(q_str))
            except ValueError as exc:
                raise ParameterError(f"bad sum term {chunk!r}") from exc
            terms.append(term)
        return make_weighted_sum(terms)
    raise ParameterError(f"unknown penalizer spec {spec!r}")
