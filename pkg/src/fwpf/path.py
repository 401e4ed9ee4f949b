"""Planar desired paths and Frenet-frame tracking errors.

Conventions:
  * the frame F rides on the virtual target, x-axis along the path tangent;
  * ``e_d`` is positive to the left of the tangent;
  * curvature is ``d psi_f / ds``, positive for counterclockwise turning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GeometryError, PathDomainError

TWO_PI = 2.0 * math.pi


def wrap_angle(angle: float) -> float:
    """Wrap to (-pi, pi]."""
    wrapped = angle - TWO_PI * math.floor(angle / TWO_PI + 0.5)
    if wrapped <= -math.pi:
        wrapped += TWO_PI
    return wrapped


def unwrap_to(angle: float, reference: float) -> float:
    """Shift ``angle`` by a multiple of 2 pi to lie within pi of ``reference``."""
    return reference + math.remainder(angle - reference, TWO_PI)


@dataclass(frozen=True)
class VirtualTarget:
    s: float
    position: tuple[float, float]
    psi_f: float
    curvature: float


@dataclass(frozen=True)
class TrackingErrors:
    e_s: float
    e_d: float
    psi_tilde: float


class PathDefinition:
    """Base for arc-length parameterised planar paths."""

    kind = "abstract"

    def point(self, s: float) -> tuple[float, float]:
        raise NotImplementedError

    def heading(self, s: float) -> float:
        raise NotImplementedError

    def curvature(self, s: float) -> float:
        raise NotImplementedError

    def target(self, s: float) -> VirtualTarget:
        return VirtualTarget(s, self.point(s), self.heading(s), self.curvature(s))

    def frame(self, s: float) -> tuple[float, float, float, float]:
        """``(x, y, psi_f, curvature)`` in one call; the simulator's hot path."""
        x, y = self.point(s)
        return x, y, self.heading(s), self.curvature(s)


@dataclass(frozen=True)
class Circle(PathDefinition):
    """Circle traversed from polar angle ``phase`` about ``center``."""

    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 20.0
    direction: str = "ccw"
    phase: float = 0.0
    kind = "circle"

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError("circle radius must be positive")
        if self.direction not in ("ccw", "cw"):
            raise GeometryError("circle direction must be 'ccw' or 'cw'")
        object.__setattr__(self, "_sign", 1.0 if self.direction == "ccw" else -1.0)

    def _polar(self, s):
        return self.phase + self._sign * s / self.radius

    def point(self, s):
        phi = self._polar(s)
        return (
            self.center[0] + self.radius * math.cos(phi),
            self.center[1] + self.radius * math.sin(phi),
        )

    def heading(self, s):
        return self._polar(s) + self._sign * 0.5 * math.pi

    def curvature(self, s):
        return self._sign / self.radius

    def frame(self, s):
        phi = self.phase + self._sign * s / self.radius
        return (
            self.center[0] + self.radius * math.cos(phi),
            self.center[1] + self.radius * math.sin(phi),
            phi + self._sign * 0.5 * math.pi,
            self._sign / self.radius,
        )


@dataclass(frozen=True)
class Line(PathDefinition):
    point0: tuple[float, float] = (0.0, 0.0)
    psi: float = 0.0
    kind = "line"

    def point(self, s):
        return (self.point0[0] + s * math.cos(self.psi), self.point0[1] + s * math.sin(self.psi))

    def heading(self, s):
        return self.psi

    def curvature(self, s):
        return 0.0


@dataclass(frozen=True, eq=False)
class SampledPath(PathDefinition):
    """Polyline with an arc-length table.

    Node headings come from centred differences (one-sided at the ends) and
    are unwrapped along the table; node curvature is the centred difference
    of the unwrapped heading. Values between nodes are linearly interpolated.
    """

    s_table: np.ndarray
    x_table: np.ndarray
    y_table: np.ndarray
    max_turn: float = 0.5
    kind = "sampled"
    psi_table: np.ndarray = field(init=False, repr=False)
    kappa_table: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        s = np.asarray(self.s_table, dtype=float)
        x = np.asarray(self.x_table, dtype=float)
        y = np.asarray(self.y_table, dtype=float)
        if s.ndim != 1 or s.shape != x.shape or s.shape != y.shape or s.size < 3:
            raise GeometryError("sampled path needs at least 3 (s, x, y) rows")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise GeometryError("sampled path contains non-finite values")
        if np.any(np.diff(s) <= 0):
            raise GeometryError("arc length must be strictly increasing")
        dx = np.gradient(x, s)
        dy = np.gradient(y, s)
        if np.any(np.hypot(dx, dy) < 1e-9):
            raise GeometryError("degenerate (zero-length) tangent in sampled path")
        psi = np.unwrap(np.arctan2(dy, dx))
        turn = np.abs(np.diff(psi))
        if np.any(turn > self.max_turn):
            i = int(np.argmax(turn))
            raise GeometryError(
                f"heading jumps {turn[i]:.3g} rad between s={s[i]:.6g} and s={s[i + 1]:.6g}"
            )
        kappa = np.gradient(psi, s)
        object.__setattr__(self, "s_table", s)
        object.__setattr__(self, "x_table", x)
        object.__setattr__(self, "y_table", y)
        object.__setattr__(self, "psi_table", psi)
        object.__setattr__(self, "kappa_table", kappa)

    @classmethod
    def from_file(cls, path, **kwargs) -> "SampledPath":
        """Read whitespace-separated ``s x y`` rows; a non-numeric first line is a header."""
        rows = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                parts = text.replace(",", " ").split()
                try:
                    values = [float(p) for p in parts]
                except ValueError:
                    if not rows:
                        continue
                    raise GeometryError(f"{path}:{lineno}: expected 's x y', got {line!r}")
                if len(values) != 3:
                    raise GeometryError(f"{path}:{lineno}: expected 3 columns, got {len(values)}")
                rows.append(values)
        if not rows:
            raise GeometryError(f"{path}: no samples")
        table = np.array(rows)
        return cls(table[:, 0], table[:, 1], table[:, 2], **kwargs)

    @property
    def s_min(self) -> float:
        return float(self.s_table[0])

    @property
    def s_max(self) -> float:
        return float(self.s_table[-1])

    def _interp(self, table, s):
        if not self.s_min <= s <= self.s_max:
            raise PathDomainError(f"s={s!r} outside [{self.s_min}, {self.s_max}]")
        return float(np.interp(s, self.s_table, table))

    def point(self, s):
        return self._interp(self.x_table, s), self._interp(self.y_table, s)

    def heading(self, s):
        return self._interp(self.psi_table, s)

    def curvature(self, s):
        return self._interp(self.kappa_table, s)


def path_point(path: PathDefinition, s: float) -> tuple[float, float]:
    return path.point(s)


def path_heading(path: PathDefinition, s: float, previous: float | None = None) -> float:
    """Tangent direction at ``s``; unwrapped against ``previous`` when given."""
    psi_f = path.heading(s)
    if previous is not None:
        psi_f = unwrap_to(psi_f, previous)
    return psi_f


def path_curvature(path: PathDefinition, s: float) -> float:
    return path.curvature(s)


def tracking_errors(state, target: VirtualTarget) -> TrackingErrors:
    """Position error rotated into the target frame, plus wrapped heading error."""
    e_s, e_d, psi_tilde = frenet_errors(
        state.x, state.y, state.psi, target.position[0], target.position[1], target.psi_f
    )
    return TrackingErrors(e_s, e_d, psi_tilde)


def frenet_errors(x, y, psi, px, py, psi_f):
    c = math.cos(psi_f)
    s = math.sin(psi_f)
    dx = x - px
    dy = y - py
    return c * dx + s * dy, -s * dx + c * dy, wrap_angle(psi - psi_f)


def sample_path(path: PathDefinition, s_values) -> np.ndarray:
    """Tabulate ``(s, x, y)`` rows, e.g. to write a sampled-path file."""
    rows = [(s, *path.point(s)) for s in s_values]
    return np.array(rows)


def write_path_table(path: str | Path, table: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("s x y\n")
        for s, x, y in table:
            fh.write(f"{s:.12g} {x:.12g} {y:.12g}\n")
