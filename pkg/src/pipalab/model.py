"""MPCC problem definitions.

A problem has the form::

    min  f(x, y, w, z)
    s.t. x_lower <= x <= x_upper
         F(x, y, w, z) = 0
         0 <= y  _|_  w >= 0

with ``len(y) == len(w) == m`` and ``F`` returning ``m + n_z`` values.
Derivatives are ordered ``(x, y, w, z)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionError

Evaluator = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], object]


@dataclass(frozen=True)
class Point:
    x: np.ndarray
    y: np.ndarray
    w: np.ndarray
    z: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        for name in ("x", "y", "w", "z"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))

    @classmethod
    def from_vector(cls, v, n_x: int, m: int, n_z: int) -> "Point":
        v = np.asarray(v, dtype=float)
        return cls(v[:n_x], v[n_x:n_x + m], v[n_x + m:n_x + 2 * m], v[n_x + 2 * m:n_x + 2 * m + n_z])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.y, self.w, self.z])

    def step(self, d, tau: float) -> "Point":
        """Return ``self + tau * d`` for a stacked displacement ``d``."""
        return Point.from_vector(self.as_vector() + tau * np.asarray(d, dtype=float),
                                 self.x.size, self.y.size, self.z.size)

    @property
    def comp(self) -> float:
        return float(self.y @ self.w)


@dataclass(frozen=True)
class MpccProblem:
    n_x: int
    m: int
    n_z: int
    x_lower: np.ndarray
    x_upper: np.ndarray
    objective: Evaluator
    gradient: Evaluator
    equality_map: Evaluator
    jacobian: Evaluator
    name: str = "mpcc"

    def __post_init__(self):
        lo = np.asarray(self.x_lower, dtype=float).reshape(-1)
        hi = np.asarray(self.x_upper, dtype=float).reshape(-1)
        if lo.size != self.n_x or hi.size != self.n_x:
            raise DimensionError("x bounds must have length n_x")
        if np.any(lo > hi):
            raise ValueError("x_lower must not exceed x_upper")
        object.__setattr__(self, "x_lower", lo)
        object.__setattr__(self, "x_upper", hi)

    @property
    def n(self) -> int:
        """Total number of variables."""
        return self.n_x + 2 * self.m + self.n_z

    @property
    def n_eq(self) -> int:
        return self.m + self.n_z

    def check_point(self, p: Point) -> None:
        sizes = (p.x.size, p.y.size, p.w.size, p.z.size)
        if sizes != (self.n_x, self.m, self.m, self.n_z):
            raise DimensionError(f"point blocks {sizes} do not match problem "
                                 f"{(self.n_x, self.m, self.m, self.n_z)}")


def eval_all(problem: MpccProblem, p: Point):
    """Evaluate ``f``, its gradient, ``F`` and its Jacobian at ``p``."""
    problem.check_point(p)
    args = (p.x, p.y, p.w, p.z)
    f = float(problem.objective(*args))
    g = np.asarray(problem.gradient(*args), dtype=float).reshape(-1)
    F = np.atleast_1d(np.asarray(problem.equality_map(*args), dtype=float)).reshape(-1)
    J = np.atleast_2d(np.asarray(problem.jacobian(*args), dtype=float))
    n = problem.n
    if g.size != n:
        raise DimensionError(f"gradient has length {g.size}, expected {n}")
    if F.size != problem.n_eq:
        raise DimensionError(f"F has {F.size} rows, expected {problem.n_eq}")
    if J.shape != (problem.n_eq, n):
        raise DimensionError(f"Jacobian has shape {J.shape}, expected {(problem.n_eq, n)}")
    return f, g, F, J


def check_derivatives(problem: MpccProblem, p: Point, h: float = 1e-6) -> float:
    """Worst relative error between analytic and central-difference derivatives.

    Each entry is compared as ``|a - fd| / max(1, |a|)``.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    _, g, _, J = eval_all(problem, p)
    v = p.as_vector()
    dims = (problem.n_x, problem.m, problem.n_z)

    def at(u):
        q = Point.from_vector(u, *dims)
        args = (q.x, q.y, q.w, q.z)
        return float(problem.objective(*args)), np.atleast_1d(np.asarray(problem.equality_map(*args), dtype=float))

    g_fd = np.empty_like(g)
    J_fd = np.empty_like(J)
    for j in range(v.size):
        e = np.zeros_like(v)
        e[j] = h
        fp, Fp = at(v + e)
        fm, Fm = at(v - e)
        g_fd[j] = (fp - fm) / (2 * h)
        J_fd[:, j] = (Fp - Fm) / (2 * h)

    worst = 0.0
    for exact, approx in ((g, g_fd), (J, J_fd)):
        if exact.size:
            err = np.abs(exact - approx) / np.maximum(1.0, np.abs(exact))
            worst = max(worst, float(np.max(err)))
    return worst


def counterexample_problem() -> MpccProblem:
    """``min x + w`` s.t. ``-1 <= x <= 1``, ``-1 + x + y = 0``, ``0 <= y _|_ w >= 0``.

    The solution is ``(x, y, w) = (-1, 2, 0)``.
    """
    return MpccProblem(
        n_x=1, m=1, n_z=0,
        x_lower=np.array([-1.0]), x_upper=np.array([1.0]),
        objective=lambda x, y, w, z: x[0] + w[0],
        gradient=lambda x, y, w, z: np.array([1.0, 0.0, 1.0]),
        equality_map=lambda x, y, w, z: np.array([-1.0 + x[0] + y[0]]),
        jacobian=lambda x, y, w, z: np.array([[1.0, 1.0, 0.0]]),
        name="counterexample",
    )


# The objective is kept linear: the penalty exponent rule needs grad_f'd < 0,
# which QP directions on a curved objective do not always deliver.
def _toy_objective(x, y, w, z):
    return x[0] + 0.5 * x[1] + w[0]


def _toy_gradient(x, y, w, z):
    return np.array([1.0, 0.5, 0.0, 1.0, 0.0])


def _toy_F(x, y, w, z):
    return np.array([
        y[0] - x[0] ** 2 - 0.5 * x[1] + z[0] - 0.25,
        z[0] - 0.5 * x[0] * x[1] + 0.1 * w[0],
    ])


def _toy_jacobian(x, y, w, z):
    return np.array([
        [-2.0 * x[0], -0.5, 1.0, 0.0, 1.0],
        [-0.5 * x[1], -0.5 * x[0], 0.0, 0.1, 1.0],
    ])


def toy_nonlinear_problem() -> MpccProblem:
    """A small nonlinear instance with an auxiliary variable, used as a smoke test."""
    return MpccProblem(
        n_x=2, m=1, n_z=1,
        x_lower=np.array([-2.0, -2.0]), x_upper=np.array([2.0, 2.0]),
        objective=_toy_objective, gradient=_toy_gradient,
        equality_map=_toy_F, jacobian=_toy_jacobian,
        name="toy-nonlinear",
    )


PROBLEMS: dict[str, Callable[[], MpccProblem]] = {
    "counterexample": counterexample_problem,
    "toy-nonlinear": toy_nonlinear_problem,
}

# Interior starting points used by the command line front end.
DEFAULT_STARTS = {
    "counterexample": lambda: Point([0.0], [1.0], [0.02]),
    "toy-nonlinear": lambda: Point([0.0, 0.0], [0.5], [0.5], [0.0]),
}


def get_problem(name: str) -> MpccProblem:
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None


def random_interior_point(problem: MpccProblem, rng: np.random.Generator) -> Point:
    lo = np.where(np.isfinite(problem.x_lower), problem.x_lower, -1.0)
    hi = np.where(np.isfinite(problem.x_upper), problem.x_upper, 1.0)
    x = lo + (hi - lo) * rng.uniform(0.05, 0.95, problem.n_x)
    return Point(x, rng.uniform(0.1, 2.0, problem.m), rng.uniform(0.1, 2.0, problem.m),
                 rng.uniform(-1.0, 1.0, problem.n_z))
