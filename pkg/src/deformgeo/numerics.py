"""Newton iteration that works on plain floats and on jets alike."""

from __future__ import annotations

import numpy as np

from .errors import NoConvergence
from .jets import Jet, jeinsum


def _values(xs):
    return np.array([x.value if isinstance(x, Jet) else float(x) for x in xs])


def _max_abs(xs):
    m = 0.0
    for x in xs:
        c = x.coeffs if isinstance(x, Jet) else x
        m = max(m, float(np.max(np.abs(c))))
    return m


def fd_jacobian(fun, y0, rel_step: float = 1e-7) -> np.ndarray:
    """Central-difference Jacobian of ``fun`` (evaluated on floats) at ``y0``."""
    y0 = np.asarray(y0, dtype=float)
    cols = []
    for k in range(y0.size):
        h = rel_step * max(1.0, abs(y0[k]))
        yp, ym = y0.copy(), y0.copy()
        yp[k] += h
        ym[k] -= h
        cols.append((_values(fun(list(yp))) - _values(fun(list(ym)))) / (2 * h))
    return np.array(cols).T


def newton_solve(fun, target, start, *, tol: float = 1e-13, max_iter: int = 50,
                 exc=NoConvergence):
    """Solve ``fun(y) = target`` by damped Newton.

    ``fun`` maps a list to a list; ``target`` and ``start`` may hold jets, in
    which case the Jacobian of the value part preconditions a fixed-point
    iteration that also converges every higher Taylor coefficient.
    """
    y = list(start)
    target = list(target)
    space = next((t.space for t in list(target) + y if isinstance(t, Jet)), None)
    jac = None
    last_res = np.inf
    polish = False
    for _ in range(max_iter):
        out = fun(y)
        if space is None:
            space = next((o.space for o in out if isinstance(o, Jet)), None)
        r = [o - t for o, t in zip(out, target)]
        res = _max_abs(r)
        scale = 1.0 + _max_abs(y)
        if polish or res == 0.0:
            return y
        # one more step after convergence takes the float part to rounding
        # level, which finite differences of K downstream rely on
        polish = res <= tol * scale
        yv = _values(y)
        if jac is None or _max_abs(_values(r)) > 1e-8:
            jac = fd_jacobian(fun, yv)
        try:
            jinv = np.linalg.inv(jac)
        except np.linalg.LinAlgError as err:
            raise exc("singular Jacobian in Newton iteration") from err
        if space is not None:
            rj = Jet.stack([x if isinstance(x, Jet) else Jet.constant(space, x) for x in r])
            step = jeinsum("ij,j->i", jinv, rj)
            step = [step[k] for k in range(len(y))]
        else:
            step = list(jinv @ np.asarray(r, dtype=float))
        # damp on the value part only
        rv = float(np.max(np.abs(_values(r))))
        alpha = 1.0
        for _ in range(12):
            trial = [yi - alpha * si for yi, si in zip(y, step)]
            if rv < 1e-8:
                break
            tv = float(np.max(np.abs(_values(fun([*_values(trial)])) - _values(target))))
            if np.isfinite(tv) and tv < rv:
                break
            alpha *= 0.5
        y = trial
        if res < 1e-11 and res >= last_res:
            # stalled at rounding level
            return y
        last_res = res
    raise exc(f"Newton iteration did not converge in {max_iter} iterations (residual {res:.3e})")
