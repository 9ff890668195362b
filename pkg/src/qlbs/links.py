"""Link functions for the two regression sub-models (quantile scale and shape)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Link:
    """Monotone link g with inverse and first two derivatives.

    ``deriv``/``deriv2`` are g' and g'' on the parameter scale; the chain-rule
    factors used by the score and Hessian are 1/g'(mu) and -g''(mu)/g'(mu)^2.
    """

    name: str
    fwd: Callable[[np.ndarray], np.ndarray]
    inv: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    deriv2: Callable[[np.ndarray], np.ndarray]


LINKS: dict[str, Link] = {
    "log": Link(
        name="log",
        fwd=np.log,
        inv=np.exp,
        deriv=lambda mu: 1.0 / mu,
        deriv2=lambda mu: -1.0 / (mu * mu),
    ),
    "sqrt": Link(
        name="sqrt",
        fwd=np.sqrt,
        inv=lambda eta: np.square(eta),
        deriv=lambda mu: 0.5 / np.sqrt(mu),
        deriv2=lambda mu: -0.25 * mu**-1.5,
    ),
    "identity": Link(
        name="identity",
        fwd=lambda mu: np.asarray(mu, dtype=float),
        inv=lambda eta: np.asarray(eta, dtype=float),
        deriv=lambda mu: np.ones_like(np.asarray(mu, dtype=float)),
        deriv2=lambda mu: np.zeros_like(np.asarray(mu, dtype=float)),
    ),
}


def get_link(name: str) -> Link:
    """Look up a link by name ('log', 'sqrt', 'identity')."""
    try:
        return LINKS[name]
    except KeyError:
        raise ValueError(
            f"unknown link {name!r}; available: {', '.join(sorted(LINKS))}"
        ) from None
