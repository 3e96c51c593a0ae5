"""The perturbation substrate: grids of exactly representable points.

Perturbed inputs are drawn from G_{L,K,emax}, the multiples of the grid unit
tau = 2^(emax-L-1) inside [-2^emax, 2^emax].  Every grid point is a member of
F_{L,K}, so perturbed inputs enter the arithmetic exactly and the error
analysis may treat them as error-free.

Sampling uses SplitMix64 keyed by (seed, counter): for word index i the
output is mix(seed + (i+1)*GAMMA) with the standard SplitMix64 finalizer.
Uniform integers are drawn by rejection from the enclosing power of two, so
there is no modulo bias.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .reals import ceil_log2, floor_log2
from .softfloat import SoftFloat, _round_scaled, fl_round, is_representable, zero

Exact = Fraction


class EmptyGrid(ValueError):
    """An interval contains no grid point (tau too coarse)."""


class MeasurementNotRepresentable(ValueError):
    """anchor + measurement left F_{L,K}."""


_GAMMA = 0x9E3779B97F4A7C15
_M64 = (1 << 64) - 1


def _mix64(z: int) -> int:
    z &= _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


class SplitMix64:
    """Counter-based SplitMix64 stream; word i depends only on (seed, i)."""

    def __init__(self, seed: int):
        self.seed = seed & _M64
        self.counter = 0

    def next_u64(self) -> int:
        self.counter += 1
        return _mix64(self.seed + self.counter * _GAMMA)

    def uniform_int(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection from 2^ceil(log2 n)."""
        if n <= 0:
            raise ValueError("need n >= 1")
        if n == 1:
            return 0
        bits = (n - 1).bit_length()
        while True:
            word = self.next_u64()
            for _ in range(64 // bits if bits <= 32 else 1):
                v = word & ((1 << bits) - 1)
                word >>= bits
                if v < n:
                    return v


def compute_emax(centers: Sequence[Exact], deltas: Sequence[Exact]) -> int:
    """Least integer e' >= 0 with |y_i| + delta_i <= 2^e' for all i."""
    bound = max(abs(Fraction(c)) + Fraction(d) for c, d in zip(centers, deltas))
    if bound <= 0:
        return 0
    return max(0, ceil_log2(bound))


def grid_unit(emax: int, L: int) -> Fraction:
    """tau = 2^(emax-L-1)."""
    return Fraction(2) ** (emax - L - 1)


@dataclass(frozen=True)
class GridSpec:
    """G_{L,K,emax}: multiples of tau inside [-2^emax, 2^emax]."""

    L: int
    K: int
    emax: int

    def __post_init__(self):
        # the grid construction needs emax << 2^(K-1); enforce emax + 1 < 2^(K-1)
        if not self.emax + 1 < (1 << (self.K - 1)):
            raise ValueError(f"emax={self.emax} too large for K={self.K}")

    @property
    def tau(self) -> Fraction:
        return grid_unit(self.emax, self.L)

    def index_range(self, a: Exact, b: Exact) -> tuple[int, int]:
        """Integers lo..hi (inclusive) with lo*tau >= a, hi*tau <= b, clipped
        to [-2^emax, 2^emax]."""
        tau = self.tau
        a = max(Fraction(a), -(Fraction(2) ** self.emax))
        b = min(Fraction(b), Fraction(2) ** self.emax)
        lo = -((-Fraction(a) / tau).__floor__())  # ceil(a / tau)
        hi = (Fraction(b) / tau).__floor__()
        return lo, hi


def enumerate_grid(a: Exact, b: Exact, spec: GridSpec) -> list[Fraction]:
    """All grid points in [a, b], ascending."""
    lo, hi = spec.index_range(a, b)
    tau = spec.tau
    return [lam * tau for lam in range(lo, hi + 1)]


def count_grid(a: Exact, b: Exact, spec: GridSpec) -> int:
    lo, hi = spec.index_range(a, b)
    return max(0, hi - lo + 1)


@dataclass(frozen=True)
class PerturbationBox:
    """Axis-parallel box prod_i [c_i - d_i, c_i + d_i]."""

    center: tuple[Fraction, ...]
    radius: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(Fraction(c) for c in self.center))
        object.__setattr__(self, "radius", tuple(Fraction(r) for r in self.radius))
        if len(self.center) != len(self.radius):
            raise ValueError("center/radius length mismatch")
        # zero radius = degenerate box (identity perturbation); negatives are bugs
        if any(r < 0 for r in self.radius):
            raise ValueError("radii must be nonnegative")

    @property
    def dimension(self) -> int:
        return len(self.center)

    def interval(self, i: int) -> tuple[Fraction, Fraction]:
        return self.center[i] - self.radius[i], self.center[i] + self.radius[i]


def sample_grid_values(box: PerturbationBox, spec: GridSpec, rng: SplitMix64) -> list[Fraction]:
    """One uniform grid point per coordinate interval, as exact rationals."""
    tau = spec.tau
    out = []
    for i in range(box.dimension):
        a, b = box.interval(i)
        lo, hi = spec.index_range(a, b)
        if hi < lo:
            raise EmptyGrid(f"no grid point in coordinate {i} interval [{a}, {b}]")
        lam = lo + rng.uniform_int(hi - lo + 1)
        out.append(lam * tau)
    return out


def sample_grid_point(box: PerturbationBox, spec: GridSpec, seed: int) -> tuple[SoftFloat, ...]:
    """Independent uniform grid coordinates; deterministic in the seed."""
    rng = SplitMix64(seed)
    values = sample_grid_values(box, spec, rng)
    floats = tuple(fl_round(v, spec.L, spec.K) for v in values)
    assert all(f.to_fraction() == v for f, v in zip(floats, values))
    return floats


class GridSampler:
    """Repeated sampling from one box at one grid: index ranges precomputed,
    coordinates built directly from their integer grid index."""

    def __init__(self, box: PerturbationBox, spec: GridSpec, rng: SplitMix64):
        self.spec = spec
        self.rng = rng
        self.ranges = []
        for i in range(box.dimension):
            a, b = box.interval(i)
            lo, hi = spec.index_range(a, b)
            if hi < lo:
                raise EmptyGrid(f"no grid point in coordinate {i} interval [{a}, {b}]")
            self.ranges.append((lo, hi - lo + 1))
        self.q = spec.emax - spec.L - 1  # grid values are lambda * 2^q

    def draw_floats(self) -> tuple[SoftFloat, ...]:
        out = []
        for lo, span in self.ranges:
            lam = lo + self.rng.uniform_int(span)
            if lam == 0:
                out.append(zero(self.spec.L, self.spec.K))
            else:
                sign = 1 if lam > 0 else -1
                out.append(
                    _round_scaled(sign, abs(lam), self.q, self.spec.L, self.spec.K, "grid")
                )
        return tuple(out)


@dataclass(frozen=True)
class ObjectInput:
    """Anchor coordinates plus fixed measurement offsets for dependent points.

    ``anchor`` holds the anchor coordinates; ``measurements`` holds, per
    dependent point, one offset per anchor coordinate.  The perturbed object
    is the perturbed anchor plus each offset, computed exactly.
    """

    anchor: tuple[Fraction, ...]
    measurements: tuple[tuple[Fraction, ...], ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "anchor", tuple(Fraction(a) for a in self.anchor))
        object.__setattr__(
            self,
            "measurements",
            tuple(tuple(Fraction(m) for m in row) for row in self.measurements),
        )
        for row in self.measurements:
            if len(row) != len(self.anchor):
                raise ValueError("measurement dimension mismatch")


def perturb_object_preserving(
    obj: ObjectInput, box: PerturbationBox, spec: GridSpec, seed: int
) -> list[tuple[Fraction, ...]]:
    """Perturb the anchor on the grid, then translate every measurement.

    Returns the full coordinate rows (anchor first).  Dependent coordinates
    are anchor + measurement with no rounding; a result outside F_{L,K}
    raises MeasurementNotRepresentable.
    """
    if box.dimension != len(obj.anchor):
        raise ValueError("box does not match anchor dimension")
    rng = SplitMix64(seed)
    anchor = tuple(sample_grid_values(box, spec, rng))
    rows = [anchor]
    for row in obj.measurements:
        shifted = tuple(a + m for a, m in zip(anchor, row))
        for v in shifted:
            if not is_representable(v, spec.L, spec.K):
                raise MeasurementNotRepresentable(f"{v} is outside F_{{{spec.L},{spec.K}}}")
        rows.append(shifted)
    return rows
