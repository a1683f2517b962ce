"""Synthetic objective suite: classic test functions, axis-aligned embedding
into a high-dimensional unit cube, a randomly projected (rotated) Hartmann
construction, and exact problem-spec serialization so replications share one
problem instance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

BRANIN_OPTIMUM = 0.39788735772973816
BRANIN_MINIMIZERS_RAW = ((-np.pi, 12.275), (np.pi, 2.275), (9.42478, 2.475))

HARTMANN6_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
HARTMANN6_A = np.array(
    [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ]
)
HARTMANN6_P = 1e-4 * np.array(
    [
        [1312.0, 1696.0, 5569.0, 124.0, 8283.0, 5886.0],
        [2329.0, 4135.0, 8307.0, 3736.0, 1004.0, 9991.0],
        [2348.0, 1451.0, 3522.0, 2883.0, 3047.0, 6650.0],
        [4047.0, 8828.0, 8732.0, 5743.0, 1091.0, 381.0],
    ]
)
HARTMANN6_MINIMIZER = np.array([0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573])
HARTMANN6_OPTIMUM = -3.322368011391339


def branin(x: np.ndarray) -> np.ndarray:
    """Branin on its raw domain [-5, 10] x [0, 15]; vectorized over leading axes."""
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    b = 5.1 / (4.0 * np.pi**2)
    c = 5.0 / np.pi
    t = 1.0 / (8.0 * np.pi)
    return (x2 - b * x1**2 + c * x1 - 6.0) ** 2 + 10.0 * (1.0 - t) * np.cos(x1) + 10.0


def hartmann6(x: np.ndarray) -> np.ndarray:
    """Four-term Hartmann function of six variables; vectorized over leading axes."""
    x = np.asarray(x, dtype=float)
    sq = (x[..., None, :] - HARTMANN6_P) ** 2
    return -np.einsum("k,...k->...", HARTMANN6_ALPHA, np.exp(-np.sum(HARTMANN6_A * sq, axis=-1)))


def rosenbrock3_log1p(x: np.ndarray) -> np.ndarray:
    """log(1 + Rosenbrock) in three variables on the raw domain [-2, 2]^3."""
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape[:-1])
    for i in range(2):
        total = total + 100.0 * (x[..., i + 1] - x[..., i] ** 2) ** 2 + (1.0 - x[..., i]) ** 2
    return np.log1p(total)


_BASES = {
    # name -> (function, active dim, raw lower, raw upper, optimum, raw minimizer, transform)
    "branin": (
        branin,
        2,
        np.array([-5.0, 0.0]),
        np.array([10.0, 15.0]),
        BRANIN_OPTIMUM,
        np.array([np.pi, 2.275]),
        None,
    ),
    "hartmann6": (
        hartmann6,
        6,
        np.zeros(6),
        np.ones(6),
        HARTMANN6_OPTIMUM,
        HARTMANN6_MINIMIZER.copy(),
        None,
    ),
    "rosenbrock3_log1p": (
        rosenbrock3_log1p,
        3,
        np.full(3, -2.0),
        np.full(3, 2.0),
        0.0,
        np.ones(3),
        "log1p",
    ),
}


@dataclass(frozen=True)
class BenchmarkProblem:
    """A test objective on the unit hypercube plus its construction metadata.

    Axis-aligned problems evaluate ``base(lower + (upper - lower) * x[relevant])``
    and are exactly constant in every non-relevant coordinate.  Projected
    problems evaluate ``hartmann6(projection @ x[:d_p] - translation)``.
    """

    name: str
    dim: int
    base: str
    relevant: tuple[int, ...] | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    projection: np.ndarray | None = None
    translation: np.ndarray | None = None
    anchor: np.ndarray | None = None
    seed: int | None = None
    optimum_value: float | None = None
    minimizer: np.ndarray | None = None
    transform: str | None = None

    @property
    def active_dim(self) -> int:
        return 6 if self.projection is not None else len(self.relevant)

    @property
    def projection_dim(self) -> int | None:
        return None if self.projection is None else self.projection.shape[1]

    def evaluate(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.dim:
            raise ValueError(f"{self.name} expects {self.dim} coordinates, got {x.size}")
        if self.projection is not None:
            return float(hartmann6(self.projection @ x[: self.projection.shape[1]] - self.translation))
        raw = self.lower + (self.upper - self.lower) * x[list(self.relevant)]
        return float(_BASES[self.base][0](raw))

    def to_spec(self) -> dict:
        """JSON-serializable construction record; round-trips exactly."""

        def arr(a):
            return None if a is None else np.asarray(a).tolist()

        return {
            "name": self.name,
            "dim": self.dim,
            "base": self.base,
            "relevant": None if self.relevant is None else list(self.relevant),
            "lower": arr(self.lower),
            "upper": arr(self.upper),
            "projection": arr(self.projection),
            "translation": arr(self.translation),
            "anchor": arr(self.anchor),
            "seed": self.seed,
            "optimum_value": self.optimum_value,
            "minimizer": arr(self.minimizer),
            "transform": self.transform,
        }

    @classmethod
    def from_spec(cls, spec: dict) -> "BenchmarkProblem":
        def arr(v):
            return None if v is None else np.asarray(v, dtype=float)

        return cls(
            name=spec["name"],
            dim=int(spec["dim"]),
            base=spec["base"],
            relevant=None if spec["relevant"] is None else tuple(spec["relevant"]),
            lower=arr(spec["lower"]),
            upper=arr(spec["upper"]),
            projection=arr(spec["projection"]),
            translation=arr(spec["translation"]),
            anchor=arr(spec["anchor"]),
            seed=spec["seed"],
            optimum_value=spec["optimum_value"],
            minimizer=arr(spec["minimizer"]),
            transform=spec["transform"],
        )


def save_problem_spec(problem: BenchmarkProblem, path) -> None:
    Path(path).write_text(json.dumps(problem.to_spec(), indent=1) + "\n")


def load_problem_spec(path) -> BenchmarkProblem:
    return BenchmarkProblem.from_spec(json.loads(Path(path).read_text()))


def embed(
    base: str,
    dim: int,
    relevant,
    lower=None,
    upper=None,
    name: str | None = None,
    seed: int | None = None,
) -> BenchmarkProblem:
    """Axis-aligned embedding of a base function into a dim-dimensional cube.

    ``relevant`` gives the coordinates carrying the base function's variables,
    in order; each active unit interval is affinely mapped onto the base
    function's raw domain (overridable via ``lower``/``upper``).
    """
    if base not in _BASES:
        raise ValueError(f"unknown base function {base!r}; expected one of {sorted(_BASES)}")
    fn, d, lo_default, hi_default, optimum, raw_min, transform = _BASES[base]
    relevant = tuple(int(i) for i in relevant)
    if len(set(relevant)) != len(relevant):
        raise ValueError(f"relevant indices contain duplicates: {relevant}")
    if len(relevant) != d:
        raise ValueError(f"{base} has {d} variables but {len(relevant)} indices were given")
    if any(i < 0 or i >= dim for i in relevant):
        raise ValueError(f"relevant indices {relevant} outside range(0, {dim})")
    lo = lo_default if lower is None else np.asarray(lower, dtype=float)
    hi = hi_default if upper is None else np.asarray(upper, dtype=float)
    if lo.shape != (d,) or hi.shape != (d,) or np.any(hi <= lo):
        raise ValueError("lower/upper must be length-d with upper > lower")
    minimizer = np.full(dim, 0.5)
    minimizer[list(relevant)] = (raw_min - lo) / (hi - lo)
    return BenchmarkProblem(
        name=name or f"{base}{dim}",
        dim=dim,
        base=base,
        relevant=relevant,
        lower=lo,
        upper=hi,
        seed=seed,
        optimum_value=optimum,
        minimizer=minimizer,
        transform=transform,
    )


def rotated_hartmann(
    dim: int, projection_dim: int, seed: int, max_anchor_retries: int = 100
) -> BenchmarkProblem:
    """Hartmann-6 composed with a random linear projection of the first d_p inputs.

    The projection has i.i.d. N(0, 1/d_p) entries.  The translation is chosen
    so that a known anchor point inside the cube maps exactly onto the Hartmann
    minimizer, guaranteeing the optimum value is attainable.
    """
    if not 6 <= projection_dim <= dim:
        raise ValueError(f"need 6 <= projection_dim <= dim, got {projection_dim} vs {dim}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 977]))
    projection = rng.normal(0.0, 1.0 / np.sqrt(projection_dim), size=(6, projection_dim))

    anchor = np.full(projection_dim, 0.5)
    anchor[:6] = HARTMANN6_MINIMIZER
    for attempt in range(max_anchor_retries):
        translation = projection @ anchor - HARTMANN6_MINIMIZER
        minimizer = np.full(dim, 0.5)
        minimizer[:projection_dim] = anchor
        if np.all(minimizer >= 0.0) and np.all(minimizer <= 1.0):
            break
        anchor = rng.random(projection_dim)
    else:
        raise RuntimeError(
            f"no anchor produced an in-cube optimum after {max_anchor_retries} retries"
        )
    return BenchmarkProblem(
        name=f"rotated-hartmann{dim}-dp{projection_dim}",
        dim=dim,
        base="rotated_hartmann6",
        projection=projection,
        translation=translation,
        anchor=anchor,
        seed=seed,
        optimum_value=HARTMANN6_OPTIMUM,
        minimizer=minimizer,
    )


def _pick_relevant(dim: int, d: int, seed: int) -> tuple[int, ...]:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 331]))
    return tuple(sorted(rng.choice(dim, size=d, replace=False).tolist()))


def make_problem(
    name: str, dim: int = 100, projection_dim: int | None = None, seed: int = 0
) -> BenchmarkProblem:
    """Factory for the named suite problems.

    Axis-aligned problems place their active coordinates at indices drawn from
    the problem seed (recorded in the spec), so runs are reproducible while the
    embedding layout stays arbitrary.
    """
    key = name.lower()
    if key == "branin100":
        key, dim = "branin", 100
    if key in ("branin", "hartmann6", "rosenbrock", "rosenbrock3"):
        base = {"rosenbrock": "rosenbrock3_log1p", "rosenbrock3": "rosenbrock3_log1p"}.get(
            key, key
        )
        d = _BASES[base][1]
        if dim < d:
            raise ValueError(f"{base} needs at least {d} dimensions, got {dim}")
        relevant = tuple(range(d)) if dim == d else _pick_relevant(dim, d, seed)
        return embed(base, dim, relevant, name=f"{key}{dim}", seed=seed)
    if key in ("rotated-hartmann", "rotated_hartmann"):
        return rotated_hartmann(dim, projection_dim or 6, seed)
    raise ValueError(
        f"unknown problem {name!r}; expected branin, hartmann6, rosenbrock, or rotated-hartmann"
    )
