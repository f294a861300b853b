"""Environment registry: construction by string id as used by the CLI."""

from .base import Jacobians, MixedMdp, UnsupportedCapability, analytic_jacobians, numeric_jacobians
from .complex_point import ComplexPointEnv
from .linear_example1 import LinearExample1Env
from .pendulum import PendulumEnv
from .quadratic_convex import QuadraticConvexEnv

ENV_IDS = ("complex_point", "linear_example1", "pendulum", "quadratic_convex")


def make_env(env_id: str, **kwargs) -> MixedMdp:
    if env_id == "complex_point":
        return ComplexPointEnv(**kwargs)
    if env_id == "linear_example1":
        return LinearExample1Env(**kwargs)
    if env_id == "pendulum":
        return PendulumEnv(**kwargs)
    if env_id == "quadratic_convex":
        return QuadraticConvexEnv(**kwargs)
    raise ValueError(f"unknown environment id {env_id!r}; known: {', '.join(ENV_IDS)}")


__all__ = [
    "ENV_IDS",
    "ComplexPointEnv",
    "Jacobians",
    "LinearExample1Env",
    "MixedMdp",
    "PendulumEnv",
    "QuadraticConvexEnv",
    "UnsupportedCapability",
    "analytic_jacobians",
    "make_env",
    "numeric_jacobians",
]
