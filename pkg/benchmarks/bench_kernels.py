"""Time the numba kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--T 2000] [--repeat 20]

Also times one full fit under each backend (the backend is chosen at import,
so fits run in subprocesses with BEKKVOL_DISABLE_NUMBA set or unset).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from bekkvol import kernels
from bekkvol._jit import HAVE_NUMBA

FIT_SNIPPET = """
import time
from bekkvol.estimation import fit_bekk
from bekkvol.garch import BekkParameters
from bekkvol.mean import VarMeanParams
from bekkvol.simulate import SimSpec, simulate_bekk
p = BekkParameters.diagonal([0.01, 0.01], [0.3, 0.3], [0.9, 0.9])
panel = simulate_bekk(SimSpec(VarMeanParams.zero(), p, T={T}, seed=1)).panel
fit_bekk(panel.values[:200])  # warm-up, includes compilation
t = time.perf_counter()
fit_bekk(panel)
print(time.perf_counter() - t)
"""


def _inputs(T):
    rng = np.random.default_rng(0)
    eps = rng.standard_normal((T, 2))
    C = np.array([[0.4, 0.1], [0.0, 0.3]])
    A = np.array([[0.3, 0.05], [0.02, 0.25]])
    B = np.array([[0.9, 0.02], [-0.03, 0.92]])
    H0 = eps.T @ eps / T
    return eps, C.T @ C, A, B, H0


def _time(fn, repeat):
    fn()  # compile / warm caches
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def _fit_seconds(T, disable):
    env = dict(os.environ)
    env.pop("BEKKVOL_DISABLE_NUMBA", None)
    if disable:
        env["BEKKVOL_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", FIT_SNIPPET.format(T=T)], env=env,
                         capture_output=True, text=True, check=True)
    return float(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--no-fit", action="store_true", help="skip the full-fit timing")
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        sys.exit("numba is not installed; nothing to compare")

    eps, CC, A, B, H0 = _inputs(args.T)
    x = eps[:, 0]
    cases = {
        "bekk_recursion": lambda k: k.bekk_recursion(eps, CC, A, B, H0, H0),
        "bekk_loglik_obs (gaussian)": lambda k: k.bekk_loglik_obs(eps, CC, A, B, H0, H0, 0.0, 1e-10),
        "bekk_loglik_obs (t, nu=6)": lambda k: k.bekk_loglik_obs(eps, CC, A, B, H0, H0, 6.0, 1e-10),
        "garch11_recursion": lambda k: k.garch11_recursion(x, 0.1, 0.1, 0.8, 1.0, 1.0),
        "ma1_residuals": lambda k: k.ma1_residuals(x, 0.0, 0.2),
    }
    print(f"T={args.T}, best of {args.repeat}")
    print(f"{'kernel':30s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for name, call in cases.items():
        t_nb = _time(lambda: call(kernels.numba_kernels), args.repeat)
        t_np = _time(lambda: call(kernels.numpy_kernels), args.repeat)
        print(f"{name:30s} {1e3 * t_nb:10.3f} {1e3 * t_np:10.3f} {t_np / t_nb:8.1f}")

    if not args.no_fit:
        nb = _fit_seconds(args.T, disable=False)
        npy = _fit_seconds(args.T, disable=True)
        print(f"{'fit_bekk':30s} {1e3 * nb:10.0f} {1e3 * npy:10.0f} {npy / nb:8.1f}")


if __name__ == "__main__":
    main()
