"""Central finite-difference oracle for analytic gradients."""
import math

import numpy as np

from ..errors import EvaluationError


def _eval(f, params):
    val = float(f(params))
    if not math.isfinite(val):
        raise EvaluationError(f"objective returned non-finite value {val}")
    return val


def finite_difference_check(f, params, analytic, step=1e-5, max_entries=None, seed=0,
                            report=None):
    """Compare ``analytic`` gradients against central differences of ``f``.

    ``params`` maps names to float64 arrays; ``f`` takes such a mapping and
    returns a scalar. Returns ``max |analytic - fd| / max(1, |analytic|)`` over
    the checked entries. With ``max_entries`` set, at most that many entries
    per tensor are drawn at random (seeded); otherwise every entry is checked.
    When ``report`` is a dict it receives the worst error per tensor.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    rng = np.random.default_rng(seed)
    work = {k: np.array(v, dtype=np.float64, copy=True) for k, v in params.items()}
    _eval(f, work)
    worst = 0.0
    for name, arr in work.items():
        flat = arr.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
        g = np.asarray(analytic[name], dtype=np.float64).reshape(-1)
        tensor_worst = 0.0
        for i in idx:
            orig = flat[i]
            flat[i] = orig + step
            up = _eval(f, work)
            flat[i] = orig - step
            down = _eval(f, work)
            flat[i] = orig
            fd = (up - down) / (2.0 * step)
            err = abs(g[i] - fd) / max(1.0, abs(g[i]))
            tensor_worst = max(tensor_worst, err)
        if report is not None:
            report[name] = tensor_worst
        worst = max(worst, tensor_worst)
    return worst
