"""Norms, space-time integration, convergence studies and stability probes."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy.integrate import newton_cotes

from .assembly import IPVariant, assemble_mass, assemble_stiffness
from .mesh import BOUNDARY
from .mms import DEFAULT, ExactSolution
from .space import DATA_QUAD_DEGREE, DGSpace

NC_POINTS = 8

UNSTABLE_NORM = 1e2
UNSTABLE_GROWTH = 10.0
TRANSITIONAL_GROWTH = 3.0


def _check_size(space: DGSpace, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (space.total_dofs,):
        raise ValueError(f"expected {space.total_dofs} coefficients, got shape {u.shape}")
    return u


def l2_norm(space: DGSpace, u, mass=None) -> float:
    u = _check_size(space, u)
    M = assemble_mass(space) if mass is None else mass
    return math.sqrt(max(float(u @ (M @ u)), 0.0))


def l2_error(space: DGSpace, u, exact, degree: int = DATA_QUAD_DEGREE) -> float:
    """``||u_h - exact||`` over the domain; ``exact(x, y)`` is vectorised."""
    u = _check_size(space, u)
    q = space.element_quadrature(degree)
    K, nb = space.mesh.num_elements, space.dofs_per_element
    uh = u.reshape(K, nb) @ q.phi.T
    diff = uh - exact(q.points[..., 0], q.points[..., 1])
    return math.sqrt(float(np.sum(q.wdet * diff * diff)))


def dg_norm_parts(space: DGSpace, u, degree: int | None = None):
    """``(sum_K |grad u|^2, sum_e |[u]|^2_e / h_e)`` on interior and boundary edges."""
    u = _check_size(space, u)
    r = space.degree
    K, nb = space.mesh.num_elements, space.dofs_per_element
    ul = u.reshape(K, nb)
    q = space.element_quadrature(max(2 * r, 2) if degree is None else degree)
    g = np.einsum("ki,kqic->kqc", ul, q.grads)
    grad_sq = float(np.sum(q.wdet[..., None] * g * g))

    m = space.mesh
    tr = space.edge_traces(max(2 * r, 2) if degree is None else degree)
    left, right = m.edge_elements[:, 0], m.edge_elements[:, 1]
    trace_l = np.einsum("eqi,ei->eq", tr.values[0], ul[left])
    trace_r = np.where(right[:, None] == BOUNDARY, 0.0,
                       np.einsum("eqi,ei->eq", tr.values[1], ul[np.where(right == BOUNDARY, 0, right)]))
    jump = trace_l - trace_r
    jump_sq = float(np.sum(tr.wlen * jump * jump / m.lengths[:, None]))
    return grad_sq, jump_sq


def dg_norm(space: DGSpace, u, sigma: float) -> float:
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    grad_sq, jump_sq = dg_norm_parts(space, u)
    return math.sqrt(grad_sq + sigma * jump_sq)


def newton_cotes_integral(values, dt: float) -> float:
    """Composite closed Newton-Cotes integral of uniformly spaced samples.

    Full blocks use the 8-point rule (7 subintervals); a leftover tail of
    ``m < 7`` subintervals uses the closed rule on ``m + 1`` points.
    """
    f = np.asarray(values, dtype=float)
    if f.size < 2:
        raise ValueError("need at least two samples")
    intervals = f.size - 1
    block = NC_POINTS - 1
    w_full, _ = newton_cotes(block, 1)
    total = 0.0
    start = 0
    while intervals - start >= block:
        total += dt * float(w_full @ f[start:start + block + 1])
        start += block
    m = intervals - start
    if m:
        w_tail, _ = newton_cotes(m, 1)
        total += dt * float(w_tail @ f[start:])
    return total


def spacetime_norm(norms, dt: float, last_dt: float | None = None) -> float:
    """Space-time L2 norm from per-level L2(domain) norms.

    ``norms`` are sampled at ``0, dt, 2 dt, ...``; if ``last_dt`` is given
    the final sample sits ``last_dt`` after the previous one and that
    interval is integrated with the trapezoidal rule.
    """
    g = np.asarray(norms, dtype=float) ** 2
    if g.size < 2:
        raise ValueError("need at least two samples")
    if last_dt is None or abs(last_dt - dt) <= 1e-12 * dt:
        return math.sqrt(newton_cotes_integral(g, dt))
    head = newton_cotes_integral(g[:-1], dt) if g.size > 2 else 0.0
    return math.sqrt(head + 0.5 * last_dt * (g[-2] + g[-1]))


def trajectory_spacetime_norms(traj):
    t = traj.times
    if t.size < 2:
        raise ValueError("trajectory has fewer than two records")
    dt = t[1] - t[0]
    last = t[-1] - t[-2]
    n1 = spacetime_norm(traj.norms_u1, dt, last)
    n2 = spacetime_norm(traj.norms_u2, dt, last)
    return n1, n2


def exact_spacetime_norms(T: float = 1.0, solution: ExactSolution = DEFAULT, samples: int = 4097):
    """Reference space-time norms of the exact pair by Simpson's rule in time."""
    from scipy.integrate import simpson

    t = np.linspace(0.0, T, samples)
    n1, n2 = solution.l2_norm_sq(t)
    return math.sqrt(simpson(n1, x=t)), math.sqrt(simpson(n2, x=t))


# --- convergence and classification -----------------------------------------------


@dataclass
class LevelRecord:
    n: int
    h: float
    dt: float
    norm_u1: float
    norm_u2: float
    err_l2_final: float = float("nan")
    dg_norm_final: float = float("nan")
    rate: float = float("nan")
    status: str = "ok"


@dataclass
class NormReport:
    method: str
    a: float
    b: float
    sigma: float
    levels: list = field(default_factory=list)
    classification: str = ""

    def norms(self):
        return (np.array([lv.norm_u1 for lv in self.levels]), np.array([lv.norm_u2 for lv in self.levels]))

    def rates(self) -> np.ndarray:
        return np.array([lv.rate for lv in self.levels[1:]])

    def rows(self):
        for lv in self.levels:
            yield {
                "method": self.method, "a": repr(self.a), "b": repr(self.b), "sigma": repr(self.sigma),
                "n": lv.n, "h": repr(lv.h), "dt": repr(lv.dt), "norm_u1": repr(lv.norm_u1),
                "norm_u2": repr(lv.norm_u2), "err_l2_final": repr(lv.err_l2_final), "rate": repr(lv.rate),
                "classification": self.classification,
            }

    def to_csv(self, path) -> None:
        write_rows(path, list(self.rows()), REPORT_COLUMNS)


REPORT_COLUMNS = ["method", "a", "b", "sigma", "n", "h", "dt", "norm_u1", "norm_u2", "err_l2_final", "rate",
                  "classification"]


def write_rows(path, rows, columns) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow(row)


def final_errors(traj, space: DGSpace, solution: ExactSolution = DEFAULT):
    u1, u2 = traj.final
    T = traj.records[-1].t
    e1 = l2_error(space, u1, lambda x, y: solution.real(x, y, T))
    e2 = l2_error(space, u2, lambda x, y: solution.imag(x, y, T))
    return e1, e2


def convergence_study(configs, solution: ExactSolution = DEFAULT, forcing: bool = True) -> NormReport:
    """Run each level and fill norms, final-time errors and observed rates."""
    from .evolve import Operators, run

    configs = list(configs)
    if not configs:
        raise ValueError("no levels given")
    c0 = configs[0]
    report = NormReport(c0.variant.name, c0.a, c0.b, c0.sigma)
    for cfg in configs:
        ops = Operators.build(cfg, solution, forcing)
        traj = run(cfg, solution=solution, forcing=forcing, ops=ops)
        status = "blowup" if traj.blown_up else ("picard_warn" if traj.picard_warnings else "ok")
        if len(traj.records) >= 2:
            n1, n2 = trajectory_spacetime_norms(traj)
        else:
            n1, n2 = traj.records[0].norm_u1, traj.records[0].norm_u2
        if traj.blown_up:
            err, dgn = float("nan"), float("nan")
        else:
            e1, e2 = final_errors(traj, ops.space, solution)
            err = math.hypot(e1, e2)
            dgn = math.hypot(dg_norm(ops.space, traj.final[0], cfg.sigma), dg_norm(ops.space, traj.final[1], cfg.sigma))
        report.levels.append(LevelRecord(cfg.n, cfg.h, cfg.dt, n1, n2, err, dgn, status=status))
    for prev, cur in zip(report.levels, report.levels[1:]):
        if prev.err_l2_final > 0 and cur.err_l2_final > 0:
            cur.rate = math.log(prev.err_l2_final / cur.err_l2_final) / math.log(prev.h / cur.h)
    if len(report.levels) >= 2:
        report.classification = classify_stability(report)
    return report


def classify_stability(report) -> str:
    """Rule-based regime label from norms across mesh levels.

    ``report`` is a ``NormReport`` or a sequence of ``(norm_u1, norm_u2)``
    pairs ordered coarse to fine. A norm above ``UNSTABLE_NORM`` (checked
    first) or a finest/coarsest growth above ``UNSTABLE_GROWTH`` is
    unstable; growth above ``TRANSITIONAL_GROWTH`` is transitional.
    """
    if isinstance(report, NormReport):
        n1, n2 = report.norms()
        if any(lv.status == "blowup" for lv in report.levels):
            return "unstable"
    else:
        arr = np.asarray(report, dtype=float)
        n1, n2 = arr[:, 0], arr[:, 1]
    if n1.size < 2:
        raise ValueError("need at least two levels")
    if not (np.all(np.isfinite(n1)) and np.all(np.isfinite(n2))):
        return "unstable"
    if max(n1.max(), n2.max()) > UNSTABLE_NORM:
        return "unstable"
    growth = max(n1[-1] / n1[0] if n1[0] > 0 else np.inf if n1[-1] > 0 else 1.0,
                 n2[-1] / n2[0] if n2[0] > 0 else np.inf if n2[-1] > 0 else 1.0)
    if growth > UNSTABLE_GROWTH:
        return "unstable"
    if growth > TRANSITIONAL_GROWTH:
        return "transitional"
    return "stable"


# --- coercivity / continuity --------------------------------------------------------


def dg_norm_matrix(space: DGSpace, sigma: float):
    """Symmetric matrix ``D`` with ``u @ D @ u == dg_norm(u)**2``."""
    # the NIPG consistency terms cancel in the symmetric part, leaving exactly D
    A = assemble_stiffness(space, IPVariant.NIPG, sigma)
    return 0.5 * (A + A.T)


@dataclass
class ProbeResult:
    variant: str
    sigma: float
    n: int
    min_quotient: float
    max_continuity: float
    symmetry_defect: float
    min_eigen_quotient: float = float("nan")


def coercivity_probe(space: DGSpace, variant, sigma: float, trials: int = 100, seed: int = 0,
                     exact: bool | None = None) -> ProbeResult:
    """Random-vector coercivity and continuity ratios of the stiffness form.

    Returns the smallest ``a(u, u) / |u|_DG^2`` and the largest
    ``|a(u, v)| / (|u|_DG |v|_DG)`` seen. With ``exact`` (default for
    spaces up to 1500 dofs) the smallest generalised Rayleigh quotient over
    the whole space is also computed.
    """
    variant = IPVariant.parse(variant)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    A = assemble_stiffness(space, variant, sigma)
    rng = np.random.default_rng(seed)
    n = space.total_dofs
    U = rng.standard_normal((trials, n))
    V = rng.standard_normal((trials, n))
    nu = np.array([dg_norm(space, u, sigma) for u in U])
    nv = np.array([dg_norm(space, v, sigma) for v in V])
    auu = np.einsum("ti,ti->t", U, (A @ U.T).T)
    auv = np.einsum("ti,ti->t", V, (A @ U.T).T)
    Ad = np.abs(A).max()
    defect = float(np.abs(A - A.T).max() / Ad) if Ad > 0 else 0.0
    res = ProbeResult(variant.name, float(sigma), space.mesh.n, float(np.min(auu / nu**2)),
                      float(np.max(np.abs(auv) / (nu * nv))), defect)
    if exact is None:
        exact = n <= 1500
    if exact:
        S = (0.5 * (A + A.T)).toarray()
        D = dg_norm_matrix(space, sigma).toarray()
        res.min_eigen_quotient = float(scipy.linalg.eigh(S, D, eigvals_only=True, subset_by_index=[0, 0])[0])
    return res
