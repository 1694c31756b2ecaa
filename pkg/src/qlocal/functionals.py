"""States as positive linear functionals on the operator algebra."""

from __future__ import annotations

from dataclasses import dataclass

from .algebra import QuasiLocalOperator
from .states import LocalVector, apply, inner_product, norm


@dataclass(frozen=True)
class PureStateFunctional:
    """Functional A -> <v, A v> induced by a nonzero local vector."""

    vector: LocalVector

    def __post_init__(self):
        if norm(self.vector) == 0.0:
            raise ValueError("state functional needs a vector with positive norm")


@dataclass(frozen=True)
class MixedState:
    """Positive combination of pure-state functionals (weights need not sum to 1)."""

    components: tuple

    def __post_init__(self):
        if not self.components:
            raise ValueError("mixed state needs at least one component")
        for w, _ in self.components:
            if w <= 0:
                raise ValueError("mixed-state weights must be strictly positive")


def evaluate(xi: PureStateFunctional, A: QuasiLocalOperator) -> complex:
    v = xi.vector
    return inner_product(v, apply(A, v))


def expectation(xi: PureStateFunctional, A: QuasiLocalOperator) -> complex:
    v = xi.vector
    return evaluate(xi, A) / inner_product(v, v)


def evaluate_mixed(xi_mix: MixedState, A: QuasiLocalOperator) -> complex:
    # each component is evaluated inside its own sector
    return sum(w * evaluate(xi, A) for w, xi in xi_mix.components)


def expectation_mixed(xi_mix: MixedState, A: QuasiLocalOperator) -> complex:
    weight = sum(
        w * inner_product(xi.vector, xi.vector) for w, xi in xi_mix.components
    )
    return evaluate_mixed(xi_mix, A) / weight
