"""Backward Euler in time with Picard iteration on the cubic term.

Each step solves the coupled real/imaginary system

    [ M/dt + A - M + N     -(a A + b N) ] [u1]   [M u1_old/dt + L1]
    [ a A + b N          M/dt + A - M + N ] [u2] = [M u2_old/dt + L2]

where ``N = N(w)`` is the reaction matrix with the modulus frozen at the
current Picard iterate ``w``, warm-started from the previous time level.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import linalg
from .assembly import IPVariant, assemble_load, assemble_mass, assemble_stiffness, reaction_blocks
from .mesh import build_unit_square
from .mms import DEFAULT, ExactSolution, initial_fields
from .space import DGSpace

log = logging.getLogger(__name__)

_STEP_EPS = 1e-9


class ConfigError(ValueError):
    """Invalid run configuration; ``key`` names the offending field."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class RunConfig:
    a: float = 1e-4
    b: float = 1e-4
    sigma: float = 1e8
    variant: IPVariant = IPVariant.NIPG
    n: int = 6
    dt_factor: float = 2.0
    T: float = 1.0
    picard_tol: float = 1e-8
    picard_max: int = 50
    degree: int = 1
    solver: str = "direct"
    blowup_norm: float = 1e12

    def __post_init__(self):
        object.__setattr__(self, "variant", IPVariant.parse(self.variant))
        checks = {
            "a": self.a >= 0,
            "b": self.b >= 0,
            "sigma": self.sigma > 0,
            "n": int(self.n) == self.n and self.n >= 1,
            "dt_factor": self.dt_factor > 0,
            "T": self.T >= 0,
            "picard_tol": self.picard_tol > 0,
            "picard_max": int(self.picard_max) == self.picard_max and self.picard_max >= 1,
            "degree": int(self.degree) == self.degree and self.degree >= 0,
            "solver": self.solver in ("direct", "iterative"),
            "blowup_norm": self.blowup_norm > 0,
        }
        for key, ok in checks.items():
            value = getattr(self, key)
            if not ok or (isinstance(value, float) and not math.isfinite(value)):
                raise ConfigError(key, f"invalid value {value!r}")
        if self.T > 0 and self.dt > self.T + _STEP_EPS:
            raise ConfigError("dt_factor", f"time step {self.dt} exceeds final time {self.T}")

    @property
    def h(self) -> float:
        return math.sqrt(2.0) / self.n

    @property
    def dt(self) -> float:
        return self.dt_factor * self.h**2

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in data.items():
            if key not in known:
                raise ConfigError(key, "unknown key")
            try:
                if key == "variant":
                    kwargs[key] = IPVariant.parse(raw)
                elif key == "solver":
                    kwargs[key] = str(raw).strip()
                elif key in ("n", "picard_max", "degree"):
                    value = float(raw)
                    if value != int(value):
                        raise ValueError
                    kwargs[key] = int(value)
                else:
                    kwargs[key] = float(raw)
            except ValueError:
                raise ConfigError(key, f"cannot parse {raw!r}") from None
        return cls(**kwargs)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["variant"] = self.variant.name
        return d


def time_levels(T: float, dt: float) -> np.ndarray:
    """0, dt, 2 dt, ..., with the last step shortened to land on T."""
    if T <= 0:
        return np.zeros(1)
    nsteps = max(1, math.ceil(T / dt - _STEP_EPS))
    t = np.arange(nsteps + 1) * dt
    t[-1] = T
    return t


@dataclass
class Operators:
    """Matrices and data shared by every step of one run."""

    space: DGSpace
    M: sp.csr_matrix
    A: sp.csr_matrix
    solution: ExactSolution = DEFAULT
    forcing: bool = True

    @classmethod
    def build(cls, config: RunConfig, solution: ExactSolution = DEFAULT, forcing: bool = True) -> "Operators":
        space = DGSpace(build_unit_square(config.n), config.degree)
        return cls(space, assemble_mass(space), assemble_stiffness(space, config.variant, config.sigma),
                   solution, forcing)

    def loads(self, config: RunConfig, t: float):
        if not self.forcing:
            z = np.zeros(self.space.total_dofs)
            return z, z.copy()
        s = self.solution
        L1 = assemble_load(self.space, lambda x, y, tt: s.forcing_real(config.a, config.b, x, y, tt), t)
        L2 = assemble_load(self.space, lambda x, y, tt: s.forcing_imag(config.a, config.b, x, y, tt), t)
        return L1, L2

    def l2_sq(self, u: np.ndarray) -> float:
        return float(u @ (self.M @ u))


@dataclass
class StepResult:
    u1: np.ndarray
    u2: np.ndarray
    t: float
    picard_iters: int
    converged: bool
    residual: float
    blown_up: bool = False


def _block_diag_csr(ops: Operators, blocks: np.ndarray) -> sp.csr_matrix:
    space = ops.space
    K, nb, _ = blocks.shape
    indptr = np.arange(0, K * nb * nb + 1, nb)
    indices = np.repeat(space.element_dofs(np.arange(K)), nb, axis=0).ravel()
    n = space.total_dofs
    return sp.csr_matrix((blocks.ravel(), indices, indptr), shape=(n, n))


def step(u1_old, u2_old, t_new: float, dt: float, config: RunConfig, ops: Operators,
         w_init=None, loads=None) -> StepResult:
    """Advance one backward-Euler step to ``t_new`` by Picard iteration."""
    M, A = ops.M, ops.A
    a, b = config.a, config.b
    base = (M * (1.0 / dt) + A - M).tocsr()
    L1, L2 = ops.loads(config, t_new) if loads is None else loads
    r1 = M @ u1_old / dt + L1
    r2 = M @ u2_old / dt + L2
    w1, w2 = (u1_old, u2_old) if w_init is None else w_init
    w1 = np.array(w1, dtype=float)
    w2 = np.array(w2, dtype=float)

    change = float("inf")
    for it in range(1, config.picard_max + 1):
        N = _block_diag_csr(ops, reaction_blocks(ops.space, w1, w2))
        D = base + N
        C = a * A + b * N
        u1, u2 = linalg.solve_coupled(D, C, r1, r2, config.solver)
        if not (np.all(np.isfinite(u1)) and np.all(np.isfinite(u2))):
            return StepResult(u1, u2, t_new, it, False, float("nan"), blown_up=True)
        d1, d2 = u1 - w1, u2 - w2
        diff = math.sqrt(max(ops.l2_sq(d1) + ops.l2_sq(d2), 0.0))
        size = math.sqrt(max(ops.l2_sq(u1) + ops.l2_sq(u2), 0.0))
        change = diff / max(size, 1.0)
        w1, w2 = u1, u2
        if size > config.blowup_norm:
            return StepResult(u1, u2, t_new, it, False, change, blown_up=True)
        if change < config.picard_tol:
            return StepResult(u1, u2, t_new, it, True, change)
    log.debug("Picard did not converge at t=%g (change %.3e)", t_new, change)
    return StepResult(w1, w2, t_new, config.picard_max, False, change)


@dataclass
class StepRecord:
    step: int
    t: float
    norm_u1: float
    norm_u2: float
    energy: float
    picard_iters: int
    converged: bool = True


@dataclass
class Trajectory:
    config: RunConfig
    records: list = field(default_factory=list)
    blown_up: bool = False
    final: tuple | None = None
    snapshots: list | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    @property
    def norms_u1(self) -> np.ndarray:
        return np.array([r.norm_u1 for r in self.records])

    @property
    def norms_u2(self) -> np.ndarray:
        return np.array([r.norm_u2 for r in self.records])

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])

    @property
    def picard_warnings(self) -> int:
        return sum(not r.converged for r in self.records)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "t", "norm_u1", "norm_u2", "energy", "picard_iters"])
            for r in self.records:
                w.writerow([r.step, repr(r.t), repr(r.norm_u1), repr(r.norm_u2), repr(r.energy), r.picard_iters])


def _record(k, t, ops, u1, u2, iters, converged=True) -> StepRecord:
    n1 = ops.l2_sq(u1)
    n2 = ops.l2_sq(u2)
    return StepRecord(k, float(t), math.sqrt(max(n1, 0.0)), math.sqrt(max(n2, 0.0)), 0.5 * (n1 + n2), iters, converged)


def run(config: RunConfig, *, solution: ExactSolution = DEFAULT, initial=None, forcing: bool = True,
        keep_snapshots: bool = False, ops: Operators | None = None) -> Trajectory:
    """Integrate from t = 0 to ``config.T``.

    ``initial`` overrides the projected exact data; ``forcing=False`` drops
    the manufactured source.
    """
    if ops is None:
        ops = Operators.build(config, solution, forcing)
    u1, u2 = initial_fields(ops.space, solution) if initial is None else (np.array(initial[0], float),
                                                                        np.array(initial[1], float))
    traj = Trajectory(config, snapshots=[] if keep_snapshots else None)
    traj.records.append(_record(0, 0.0, ops, u1, u2, 0))
    if keep_snapshots:
        traj.snapshots.append((u1.copy(), u2.copy()))
    times = time_levels(config.T, config.dt)
    for k in range(1, times.size):
        res = step(u1, u2, times[k], times[k] - times[k - 1], config, ops)
        u1, u2 = res.u1, res.u2
        if res.blown_up:
            traj.blown_up = True
            if np.all(np.isfinite(u1)) and np.all(np.isfinite(u2)):
                traj.records.append(_record(k, times[k], ops, u1, u2, res.picard_iters, False))
            log.info("blow-up at step %d (t=%g)", k, times[k])
            break
        traj.records.append(_record(k, times[k], ops, u1, u2, res.picard_iters, res.converged))
        if keep_snapshots:
            traj.snapshots.append((u1.copy(), u2.copy()))
    traj.final = (u1, u2)
    return traj


def energy_monitor(trajectory: Trajectory):
    """Energies ``a^n`` and step ratios ``a^n / a^(n-1)`` (nan where undefined)."""
    e = trajectory.energies
    if e.size < 2:
        raise ValueError("energy monitor needs at least two records")
    prev = e[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(prev > 0, e[1:] / np.where(prev > 0, prev, 1.0), np.nan)
    return e, ratios


def energy_bound_holds(trajectory: Trajectory, growth: float = 10.0, source: float = 10.0) -> np.ndarray:
    """Per-step check of ``a^n <= (1 + growth dt) a^(n-1) + source dt``."""
    t = trajectory.times
    e = trajectory.energies
    dt = np.diff(t)
    return e[1:] <= (1.0 + growth * dt) * e[:-1] + source * dt
