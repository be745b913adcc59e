"""The variational energy for the nonlocal Kirchhoff problem on a box.

The equation under study is

    -(a + b sum |grad u|^2) (lap u) + V(x) u = (R_alpha * F(u)) f(u)

with a > 0, b >= 0, a positive potential V bounded below by V0 > 0, and a
power nonlinearity f(t) = coeff |t|^(p-2) t whose primitive is
F(t) = coeff |t|^p / p.  Solutions are critical points of

    J(u) = 1/2 ||u||^2 + b/4 (sum |grad u|^2)^2
           - 1/2 sum (R_alpha * F(u)) F(u),

where ||u||^2 = a sum |grad u|^2 + sum V u^2 is the energy-space norm.
The first variation is

    <J'(u), phi> = (u, phi) + b (sum |grad u|^2) (sum grad u . grad phi)
                   - sum (R_alpha * F(u)) f(u) phi,

whose pointwise representer is the gradient field

    g = -(a + b sum |grad u|^2) (lap u) + V u - (R_alpha * F(u)) f(u).

``pairing`` evaluates the variation through the bilinear expansion and
``energy_gradient`` through the representer; the two routes agree to
roundoff and are cross-checked in the tests.

Admissibility of the power: p > 2 makes the interaction superquadratic
along rays (the mechanism behind uniqueness of the projection scale), and
p > (3 + alpha)/3 keeps the interaction controlled by the convolution
inequality on l^p spaces.  The quotient bound theta F(t) <= 2 t f(t) holds
for any theta <= 2p; theta defaults to 2p and must exceed 4.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .kernel import GreenKernel, convolve
from .lattice import Field, LatticeBox, gradient_energy, gradient_inner, h_inner

CONSTANT = "constant"
COERCIVE = "coercive"
PERIODIC_POTENTIAL = "periodic"


@dataclass(frozen=True)
class PotentialSpec:
    """A potential V on Z^3, bounded below by a positive floor v0.

    Three shapes are supported: ``constant`` V = v0; ``coercive``
    V(x) = v0 + rate |x - center|^power with Euclidean distance, which
    grows without bound; and ``periodic`` V(x) = table[x mod tau], a
    tau-periodic tiling whose table values must all be >= v0.
    """

    kind: str
    v0: float
    rate: float = 0.0
    power: float = 0.0
    center: tuple = (0, 0, 0)
    tau: int = 0
    table: tuple = ()

    def __post_init__(self):
        if self.v0 <= 0.0:
            raise ValueError(f"potential floor must be positive, got {self.v0}")
        if self.kind == CONSTANT:
            return
        if self.kind == COERCIVE:
            if self.rate <= 0.0 or self.power <= 0.0:
                raise ValueError("coercive potential needs rate > 0 and power > 0")
            if len(self.center) != 3:
                raise ValueError("potential center must have three coordinates")
            return
        if self.kind == PERIODIC_POTENTIAL:
            if self.tau < 1:
                raise ValueError(f"period must be a positive integer, got {self.tau}")
            if len(self.table) != self.tau ** 3:
                raise ValueError(
                    f"periodic table needs tau^3 = {self.tau ** 3} values, got {len(self.table)}"
                )
            if min(self.table) < self.v0:
                raise ValueError("periodic table values must not drop below the floor v0")
            return
        raise ValueError(f"unknown potential kind {self.kind!r}")

    @classmethod
    def constant(cls, v0: float) -> "PotentialSpec":
        return cls(CONSTANT, v0)

    @classmethod
    def coercive(cls, v0: float, rate: float, power: float, center=(0, 0, 0)) -> "PotentialSpec":
        return cls(COERCIVE, v0, rate=rate, power=power, center=tuple(center))

    @classmethod
    def periodic(cls, tau: int, table, v0=None) -> "PotentialSpec":
        table = tuple(float(t) for t in np.asarray(table, dtype=float).reshape(-1))
        floor = min(table) if v0 is None else float(v0)
        return cls(PERIODIC_POTENTIAL, floor, tau=int(tau), table=table)

    def value(self, x) -> float:
        """Evaluate V at a single site."""
        if self.kind == CONSTANT:
            return self.v0
        if self.kind == COERCIVE:
            d2 = sum((float(c) - float(c0)) ** 2 for c, c0 in zip(x, self.center))
            return self.v0 + self.rate * d2 ** (self.power / 2.0)
        cube = np.asarray(self.table).reshape(self.tau, self.tau, self.tau)
        return float(cube[x[0] % self.tau, x[1] % self.tau, x[2] % self.tau])

    def table_on(self, box: LatticeBox) -> np.ndarray:
        """Potential values at every site of a box, shaped like a field."""
        if self.kind == CONSTANT:
            return np.full((box.side,) * 3, self.v0)
        if self.kind == COERCIVE:
            d2 = box.squared_distance_grid(self.center)
            return self.v0 + self.rate * d2 ** (self.power / 2.0)
        cube = np.asarray(self.table).reshape(self.tau, self.tau, self.tau)
        x1, x2, x3 = box.coordinate_grids()
        return cube[x1 % self.tau, x2 % self.tau, x3 % self.tau]

    def minimum_site(self, box: LatticeBox):
        """A site where V is smallest over the box.

        Ties go to the site nearest the box center (then lexicographic):
        for periodic potentials every low cell is a minimum and starting
        a localized guess at the boundary of a truncated box biases the
        solve toward boundary artifacts.
        """
        table = self.table_on(box)
        n = box.radius
        sites = np.argwhere(table == table.min()) - n
        d2 = np.sum(sites * sites, axis=1)
        best = sites[d2 == d2.min()]
        i, j, k = min(map(tuple, best))
        return (int(i), int(j), int(k))


class Nonlinearity:
    """Interface for the local nonlinearity: f, its primitive F, and theta."""

    theta: float

    def f(self, t):
        raise NotImplementedError

    def F(self, t):
        raise NotImplementedError

    def f_prime(self, t):
        raise NotImplementedError


@dataclass(frozen=True)
class PowerNonlinearity(Nonlinearity):
    """f(t) = coeff |t|^(p-2) t with primitive F(t) = coeff |t|^p / p."""

    coefficient: float
    exponent: float
    theta: float = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.coefficient <= 0.0:
            raise ValueError(f"nonlinearity coefficient must be positive, got {self.coefficient}")
        if self.exponent <= 2.0:
            raise ValueError(f"power exponent must exceed 2, got {self.exponent}")
        if self.theta is None:
            object.__setattr__(self, "theta", 2.0 * self.exponent)
        if not 4.0 < self.theta <= 2.0 * self.exponent:
            raise ValueError(
                f"theta must lie in (4, 2p] = (4, {2 * self.exponent}], got {self.theta}"
            )

    def f(self, t):
        t = np.asarray(t, dtype=float)
        return self.coefficient * np.abs(t) ** (self.exponent - 2.0) * t

    def F(self, t):
        t = np.asarray(t, dtype=float)
        return self.coefficient / self.exponent * np.abs(t) ** self.exponent

    def f_prime(self, t):
        t = np.asarray(t, dtype=float)
        return self.coefficient * (self.exponent - 1.0) * np.abs(t) ** (self.exponent - 2.0)


@dataclass(frozen=True)
class ProblemSpec:
    """Everything that defines one variational problem on one box."""

    box: LatticeBox
    potential: PotentialSpec
    nonlinearity: PowerNonlinearity
    alpha: float
    a: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        if self.a <= 0.0:
            raise ValueError(f"diffusion weight a must be positive, got {self.a}")
        if self.b < 0.0:
            raise ValueError(f"Kirchhoff weight b must be nonnegative, got {self.b}")
        if not 0.0 < self.alpha < 3.0:
            raise ValueError(f"fractional order alpha must lie in (0, 3), got {self.alpha}")
        p = self.nonlinearity.exponent
        if p <= (3.0 + self.alpha) / 3.0:
            raise ValueError(
                f"power exponent {p} too small for alpha={self.alpha}: "
                f"needs p > (3+alpha)/3 = {(3.0 + self.alpha) / 3.0:.4f}"
            )

    @cached_property
    def potential_table(self) -> np.ndarray:
        table = self.potential.table_on(self.box)
        table.setflags(write=False)
        return table

    def with_box(self, box: LatticeBox) -> "ProblemSpec":
        return ProblemSpec(box, self.potential, self.nonlinearity, self.alpha, self.a, self.b)

    def h_inner(self, u: Field, v: Field) -> float:
        return h_inner(u, v, self.a, self.potential_table)

    def h_norm(self, u: Field) -> float:
        return float(np.sqrt(self.h_inner(u, u)))


def _check_kernel(spec: ProblemSpec, kernel: GreenKernel) -> None:
    if abs(kernel.alpha - spec.alpha) > 1.0e-12:
        raise ValueError(
            f"kernel order {kernel.alpha} does not match problem order {spec.alpha}"
        )


def energy(spec: ProblemSpec, kernel: GreenKernel, u: Field) -> float:
    """Total energy J(u)."""
    _check_kernel(spec, kernel)
    grad2 = gradient_energy(u)
    quad = 0.5 * (spec.a * grad2 + float(np.sum(spec.potential_table * u.values ** 2)))
    big_f = spec.nonlinearity.F(u.values)
    conv = convolve(kernel, Field(u.box, big_f)).values
    return quad + 0.25 * spec.b * grad2 ** 2 - 0.5 * float(np.sum(conv * big_f))


def energy_gradient(spec: ProblemSpec, kernel: GreenKernel, u: Field) -> Field:
    """Representer field g with <J'(u), phi> = sum g phi for every phi."""
    from .lattice import laplacian

    _check_kernel(spec, kernel)
    grad2 = gradient_energy(u)
    big_f = spec.nonlinearity.F(u.values)
    conv = convolve(kernel, Field(u.box, big_f)).values
    lap = laplacian(u).values
    g = (
        -(spec.a + spec.b * grad2) * lap
        + spec.potential_table * u.values
        - conv * spec.nonlinearity.f(u.values)
    )
    return Field(u.box, g)


def pairing(spec: ProblemSpec, kernel: GreenKernel, u: Field, phi: Field) -> float:
    """First variation <J'(u), phi> through the bilinear-form expansion."""
    _check_kernel(spec, kernel)
    grad2 = gradient_energy(u)
    cross = gradient_inner(u, phi)
    linear = spec.h_inner(u, phi)
    big_f = spec.nonlinearity.F(u.values)
    conv = convolve(kernel, Field(u.box, big_f)).values
    drive = float(np.sum(conv * spec.nonlinearity.f(u.values) * phi.values))
    return linear + spec.b * grad2 * cross - drive


def interaction_energy(spec: ProblemSpec, kernel: GreenKernel, u: Field) -> float:
    """Nonlocal interaction I(u) = 1/2 sum (R * F(u)) F(u); scales like s^(2p)."""
    _check_kernel(spec, kernel)
    big_f = spec.nonlinearity.F(u.values)
    conv = convolve(kernel, Field(u.box, big_f)).values
    return 0.5 * float(np.sum(conv * big_f))


def interaction_pairing(spec: ProblemSpec, kernel: GreenKernel, u: Field, phi: Field) -> float:
    """First variation <I'(u), phi> = sum (R * F(u)) f(u) phi."""
    _check_kernel(spec, kernel)
    big_f = spec.nonlinearity.F(u.values)
    conv = convolve(kernel, Field(u.box, big_f)).values
    return float(np.sum(conv * spec.nonlinearity.f(u.values) * phi.values))
