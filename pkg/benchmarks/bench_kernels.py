"""Compare the numba and numpy assembly kernels.

Times each kernel on the quadrature data of an ``n x n`` mesh (the
Picard reaction kernel is the one called every iteration) and one full
time step in each backend. The numpy timings of a whole step come from a
subprocess with ``CGL_DG_DISABLE_JIT=1`` so the flag takes effect at
import.

    python benchmarks/bench_kernels.py --n 24 --repeat 20
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from cgl_dg import _kernels
from cgl_dg.assembly import _edge_stencils, edge_quad_degree, volume_quad_degree
from cgl_dg.mesh import build_unit_square
from cgl_dg.space import DGSpace

STEP_SCRIPT = """
import json, time
from cgl_dg import _kernels
from cgl_dg.evolve import Operators, RunConfig, step
from cgl_dg.mms import initial_fields
cfg = RunConfig(n={n})
ops = Operators.build(cfg)
u1, u2 = initial_fields(ops.space)
step(u1, u2, cfg.dt, cfg.dt, cfg, ops)  # warm-up / compile
t0 = time.perf_counter()
for _ in range({repeat}):
    step(u1, u2, cfg.dt, cfg.dt, cfg, ops)
print(json.dumps(dict(backend=_kernels.BACKEND, seconds=(time.perf_counter() - t0) / {repeat})))
"""


def best_of(fn, args, repeat):
    fn(*args)  # compile on first call
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def step_timing(n, repeat, disable_jit):
    env = dict(os.environ, CGL_DG_DISABLE_JIT="1" if disable_jit else "0")
    out = subprocess.run([sys.executable, "-c", STEP_SCRIPT.format(n=n, repeat=repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=24)
    p.add_argument("--repeat", type=int, default=20)
    p.add_argument("--steps", type=int, default=5, help="time steps per backend in the step benchmark")
    args = p.parse_args(argv)

    if not _kernels.HAVE_NUMBA:
        print("numba unavailable or disabled; only the numpy path can be timed", file=sys.stderr)
        return 1

    space = DGSpace(build_unit_square(args.n), 1)
    q = space.element_quadrature(volume_quad_degree(space))
    K, nb = space.mesh.num_elements, space.dofs_per_element
    rng = np.random.default_rng(0)
    w1, w2 = rng.standard_normal((2, K, nb))
    _, jump, avg_dn, wlen = _edge_stencils(space, edge_quad_degree(space))
    pen = 1e3 / space.mesh.lengths

    cases = {
        "weighted_mass": (q.phi, q.wdet, np.ones_like(q.wdet)),
        "reaction": (q.phi, q.wdet, w1, w2),
        "load": (q.phi, q.wdet, rng.standard_normal(q.wdet.shape)),
        "edge": (jump, avg_dn, wlen, pen, 1.0),
    }
    print(f"n={args.n}: {K} elements, {space.mesh.num_edges} edges")
    print(f"{'kernel':<14}{'numba [ms]':>12}{'numpy [ms]':>12}{'speed-up':>10}")
    for name, call_args in cases.items():
        fast = getattr(_kernels, name + "_blocks")
        ref = getattr(_kernels, name + "_blocks_numpy")
        np.testing.assert_allclose(fast(*call_args), ref(*call_args), rtol=1e-10, atol=1e-10)
        tf = best_of(fast, call_args, args.repeat)
        tr = best_of(ref, call_args, args.repeat)
        print(f"{name:<14}{tf * 1e3:>12.3f}{tr * 1e3:>12.3f}{tr / tf:>10.2f}")

    jit = step_timing(args.n, args.steps, False)
    nojit = step_timing(args.n, args.steps, True)
    print(f"full step     {jit['seconds'] * 1e3:>12.1f}{nojit['seconds'] * 1e3:>12.1f}"
          f"{nojit['seconds'] / jit['seconds']:>10.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
