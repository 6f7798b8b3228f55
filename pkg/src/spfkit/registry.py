"""Named real-valued leaf functions that SPF leaves can refer to.

A registered leaf stores only a function name and a flat parameter vector, so
graphs stay serializable. Each entry provides a value, optionally an analytic
gradient, and optionally a closed-form definite integral over a box.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class LeafFunction:
    name: str
    value: Callable[[np.ndarray, np.ndarray], float]
    gradient: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    # integral(params, lo, hi) over the box prod_i [lo_i, hi_i]
    integral: Optional[Callable[[np.ndarray, np.ndarray, np.ndarray], float]] = None
    # number of arguments implied by the parameters (None: any)
    arity: Optional[Callable[[np.ndarray], int]] = None


_REGISTRY: Dict[str, LeafFunction] = {}


def register(fn: LeafFunction) -> LeafFunction:
    _REGISTRY[fn.name] = fn
    return fn


def get_function(name: str) -> LeafFunction:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KeyError(f"no registered leaf function named {name!r}") from None


def registered_names():
    return sorted(_REGISTRY)


# --- polynomials -----------------------------------------------------------

def _poly_value(p, y):
    return float(np.polynomial.polynomial.polyval(y[0], p))


def _poly_grad(p, y):
    return np.array([np.polynomial.polynomial.polyval(y[0], np.polynomial.polynomial.polyder(p))])


def _poly_integral(p, lo, hi):
    anti = np.polynomial.polynomial.polyint(p)
    P = np.polynomial.polynomial.polyval
    return float(P(hi[0], anti) - P(lo[0], anti))


register(LeafFunction("poly", _poly_value, _poly_grad, _poly_integral, arity=lambda p: 1))


def piecewise_params(breaks: Sequence[float], coefs: Sequence[Sequence[float]]) -> tuple:
    """Pack a piecewise polynomial: piece j is ``coefs[j]`` (ascending powers of
    the raw argument) on ``[breaks[j], breaks[j+1])``; zero outside."""
    k = len(coefs)
    if len(breaks) != k + 1:
        raise ValueError("need one more breakpoint than pieces")
    deg = max(len(c) for c in coefs) - 1
    flat = [float(k), float(deg), *map(float, breaks)]
    for c in coefs:
        flat.extend(list(map(float, c)) + [0.0] * (deg + 1 - len(c)))
    return tuple(flat)


def _unpack_piecewise(p):
    k, deg = int(p[0]), int(p[1])
    breaks = p[2:3 + k]
    coefs = np.asarray(p[3 + k:3 + k + k * (deg + 1)]).reshape(k, deg + 1)
    return breaks, coefs


def _piece_index(breaks, y):
    if y < breaks[0] or y > breaks[-1]:
        return None
    j = int(np.searchsorted(breaks, y, side="right")) - 1
    return min(j, len(breaks) - 2)


def _pw_value(p, y):
    breaks, coefs = _unpack_piecewise(p)
    j = _piece_index(breaks, y[0])
    if j is None:
        return 0.0
    return float(np.polynomial.polynomial.polyval(y[0], coefs[j]))


def _pw_grad(p, y):
    breaks, coefs = _unpack_piecewise(p)
    j = _piece_index(breaks, y[0])
    if j is None:
        return np.zeros(1)
    d = np.polynomial.polynomial.polyder(coefs[j])
    return np.array([np.polynomial.polynomial.polyval(y[0], d)])


def _pw_integral(p, lo, hi):
    breaks, coefs = _unpack_piecewise(p)
    P = np.polynomial.polynomial.polyval
    total = 0.0
    for j in range(len(coefs)):
        a, b = max(lo[0], breaks[j]), min(hi[0], breaks[j + 1])
        if a < b:
            anti = np.polynomial.polynomial.polyint(coefs[j])
            total += P(b, anti) - P(a, anti)
    return float(total)


register(LeafFunction("piecewise-poly", _pw_value, _pw_grad, _pw_integral, arity=lambda p: 1))


# --- quadratic bowl --------------------------------------------------------
# params: [offset, weight, c_1, ..., c_k]; value offset + weight * |y - c|^2

def _quad_value(p, y):
    c = np.asarray(p[2:])
    return float(p[0] + p[1] * np.sum((y - c) ** 2))


def _quad_grad(p, y):
    return 2.0 * p[1] * (y - np.asarray(p[2:]))


register(LeafFunction("quadratic", _quad_value, _quad_grad, arity=lambda p: len(p) - 2))


# --- Rastrigin-type pair term ---------------------------------------------
# The squared terms are added: with a minus sign between them the function is
# unbounded below and has no global minimum at (xi, xj).

def rastrigin_pair(yi, yj, xi, xj, c0=0.1, c1=20.0):
    a, b = yi - xi, yj - xj
    return c0 * (a * a + b * b) + c1 - c1 * np.cos(a) * np.cos(b)


def rastrigin_pair_grad(yi, yj, xi, xj, c0=0.1, c1=20.0):
    a, b = yi - xi, yj - xj
    return (2 * c0 * a + c1 * np.sin(a) * np.cos(b), 2 * c0 * b + c1 * np.cos(a) * np.sin(b))


def _pair_value(p, y):
    return float(rastrigin_pair(y[0], y[1], p[0], p[1], p[2], p[3]))


def _pair_grad(p, y):
    return np.array(rastrigin_pair_grad(y[0], y[1], p[0], p[1], p[2], p[3]))


register(LeafFunction("rastrigin-pair", _pair_value, _pair_grad, arity=lambda p: 2))


# --- restriction of a full Rastrigin test function to a subset of variables --
# params: [c0, c1, n, x_0..x_{n-1}, partner_0..partner_{n-1}, m, idx_1..idx_m]
# Pair terms touching the leaf's variables are kept; every variable outside the
# leaf is held at 0.

def restriction_params(c0, c1, x, partner, idx) -> tuple:
    n = len(x)
    return (float(c0), float(c1), float(n), *map(float, x), *map(float, partner),
            float(len(idx)), *map(float, idx))


def _unpack_restriction(p):
    c0, c1, n = p[0], p[1], int(p[2])
    x = np.asarray(p[3:3 + n])
    partner = np.asarray(p[3 + n:3 + 2 * n]).astype(int)
    m = int(p[3 + 2 * n])
    idx = np.asarray(p[4 + 2 * n:4 + 2 * n + m]).astype(int)
    return c0, c1, x, partner, idx


def _restriction_terms(p):
    c0, c1, x, partner, idx = _unpack_restriction(p)
    inside = set(idx.tolist())
    pairs = sorted({(min(i, int(partner[i])), max(i, int(partner[i]))) for i in inside})
    return c0, c1, x, idx, pairs


def _restriction_value(p, y):
    c0, c1, x, idx, pairs = _restriction_terms(p)
    full = np.zeros(len(x))
    full[idx] = y
    return float(sum(rastrigin_pair(full[i], full[j], x[i], x[j], c0, c1) for i, j in pairs))


def _restriction_grad(p, y):
    c0, c1, x, idx, pairs = _restriction_terms(p)
    full = np.zeros(len(x))
    full[idx] = y
    g = np.zeros(len(x))
    for i, j in pairs:
        gi, gj = rastrigin_pair_grad(full[i], full[j], x[i], x[j], c0, c1)
        g[i] += gi
        g[j] += gj
    return g[idx]


register(LeafFunction("rastrigin-restriction", _restriction_value, _restriction_grad,
                      arity=lambda p: int(p[3 + 2 * int(p[2])])))
