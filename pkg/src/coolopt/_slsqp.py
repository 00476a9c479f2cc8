"""Thin SLSQP driver.

``scipy.optimize.minimize(method="SLSQP")`` spends most of its time in argument
normalisation when the problem has only a handful of variables.  Where the
installed SciPy still ships the reverse-communication Fortran routine, this
module drives it directly with the same loop SciPy uses; otherwise it falls
back to the public API.  Both paths run the same algorithm.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

Array = np.ndarray


@dataclass
class SlsqpOutcome:
    x: Array
    fun: float
    nit: int
    status: int  # 0 = converged, 9 = iteration limit, other = failure mode

    @property
    def success(self) -> bool:
        return self.status == 0


def _work_sizes(n: int, m: int, meq: int) -> tuple[int, int]:
    n1 = n + 1
    mineq = m - meq + n1 + n1
    len_w = ((3 * n1 + m) * (n1 + 1) + (n1 - meq + 1) * (mineq + 2) + 2 * mineq
             + (n1 + mineq) * (n1 - meq) + 2 * meq + n1 + ((n + 1) * n) // 2
             + 2 * m + 3 * n + 3 * n1 + 1)
    return len_w, mineq


def _lean(fun, grad, con, jac, x0, xl, xu, meq, ftol, maxiter, slsqp) -> SlsqpOutcome:
    n = x0.size
    c0 = con(x0)
    m = c0.size
    la = max(1, m)
    len_w, len_jw = _work_sizes(n, m, meq)
    w = np.zeros(len_w)
    jw = np.zeros(len_jw)
    x = np.clip(x0, xl, xu).astype(float)
    mode = np.array(0, int)
    acc = np.array(ftol, float)
    majiter = np.array(maxiter - 1, int)
    floats = [np.array(0, float) for _ in range(10)]
    ints = [np.array(0, int) for _ in range(8)]

    def normals(xc):
        a = np.zeros((la, n + 1))
        if m:
            a[:m, :n] = jac(xc)
        return a

    fx = fun(x)
    g = np.append(grad(x), 0.0)
    c = con(x)
    a = normals(x)
    while True:
        slsqp(m, meq, x, xl, xu, fx, c, g, a, acc, majiter, mode, w, jw,
              *floats, *ints)
        if mode == 1:
            xc = np.clip(x, xl, xu)
            fx = fun(xc)
            c = con(xc)
        if mode == -1:
            xc = np.clip(x, xl, xu)
            g = np.append(grad(xc), 0.0)
            a = normals(xc)
        if abs(int(mode)) != 1:
            break
    return SlsqpOutcome(np.clip(x, xl, xu), float(fx), int(majiter), int(mode))


def _public(fun, grad, con, jac, x0, xl, xu, meq, ftol, maxiter) -> SlsqpOutcome:
    from scipy.optimize import minimize

    m = con(x0).size
    constraints = []
    if meq:
        constraints.append({"type": "eq", "fun": lambda x: con(x)[:meq],
                            "jac": lambda x: jac(x)[:meq]})
    if m > meq:
        constraints.append({"type": "ineq", "fun": lambda x: con(x)[meq:],
                            "jac": lambda x: jac(x)[meq:]})
    res = minimize(fun, x0, jac=grad, bounds=list(zip(xl, xu)), method="SLSQP",
                   constraints=constraints, options={"ftol": ftol, "maxiter": maxiter})
    return SlsqpOutcome(np.asarray(res.x, float), float(res.fun), int(res.nit), int(res.status))


def _load_fortran():
    try:
        from scipy.optimize._slsqp import slsqp
    except ImportError:
        return None
    # smoke-test the calling convention on min (x - 1)^2, 0 <= x <= 2
    try:
        out = _lean(lambda x: float((x[0] - 1.0) ** 2), lambda x: 2.0 * (x - 1.0),
                    lambda x: np.zeros(0), lambda x: np.zeros((0, 1)),
                    np.array([0.0]), np.array([0.0]), np.array([2.0]), 0,
                    1e-10, 50, slsqp)
    except Exception:
        return None
    if out.status != 0 or abs(out.x[0] - 1.0) > 1e-6:
        return None
    return slsqp


_FORTRAN = _load_fortran()


def minimize_slsqp(fun: Callable[[Array], float], grad: Callable[[Array], Array],
                   con: Callable[[Array], Array], jac: Callable[[Array], Array],
                   x0: Array, xl: Array, xu: Array, meq: int, *,
                   ftol: float = 1e-8, maxiter: int = 200) -> SlsqpOutcome:
    """Minimise *fun* subject to ``con(x)[:meq] == 0``, ``con(x)[meq:] >= 0``, bounds."""
    x0 = np.asarray(x0, float)
    xl = np.asarray(xl, float)
    xu = np.asarray(xu, float)
    if _FORTRAN is not None:
        return _lean(fun, grad, con, jac, x0, xl, xu, meq, ftol, maxiter, _FORTRAN)
    return _public(fun, grad, con, jac, x0, xl, xu, meq, ftol, maxiter)


def backend() -> str:
    return "fortran-direct" if _FORTRAN is not None else "scipy.optimize.minimize"
