"""Pure-Python SGD kernel, the fallback when the compiled extension is absent.

Mirrors ``_sgd.pyx`` operation for operation (same update order, same
accumulation order) so both backends produce the same trajectories up to
floating-point identity.
"""

from __future__ import annotations

import numpy as np


def run_epoch(user_idx: np.ndarray, item_idx: np.ndarray, values: np.ndarray,
              order: np.ndarray, mu: float, bu: np.ndarray, bq: np.ndarray,
              uf: np.ndarray, vf: np.ndarray, lr: float, reg: float) -> None:
    """One SGD pass over the observed cells in ``order``; updates in place.

    Per-sample objective is (a - clamp(mu + b_u + b_q + u.v, 0, 1))^2 plus the
    L2 penalty on every parameter the sample touches; the clamp contributes a
    zero subgradient outside the open unit interval.
    """
    n_factors = uf.shape[1]
    ui = user_idx.tolist()
    qi = item_idx.tolist()
    vals = values.tolist()
    bu_ = bu.tolist()
    bq_ = bq.tolist()
    uf_ = uf.tolist()
    vf_ = vf.tolist()
    step = 2.0 * lr
    for i in order.tolist():
        n = ui[i]
        m = qi[i]
        dot = 0.0
        un = uf_[n]
        vm = vf_[m]
        for f in range(n_factors):
            dot += un[f] * vm[f]
        z = mu + bu_[n] + bq_[m] + dot
        p = 0.0 if z < 0.0 else (1.0 if z > 1.0 else z)
        gate = 1.0 if 0.0 < z < 1.0 else 0.0
        eg = (vals[i] - p) * gate
        bu_[n] += step * (eg - reg * bu_[n])
        bq_[m] += step * (eg - reg * bq_[m])
        for f in range(n_factors):
            u_old = un[f]
            v_old = vm[f]
            un[f] = u_old + step * (eg * v_old - reg * u_old)
            vm[f] = v_old + step * (eg * u_old - reg * v_old)
    bu[:] = bu_
    bq[:] = bq_
    if n_factors:
        uf[:] = uf_
        vf[:] = vf_


def batch_loss(user_idx: np.ndarray, item_idx: np.ndarray, values: np.ndarray,
               mu: float, bu: np.ndarray, bq: np.ndarray,
               uf: np.ndarray, vf: np.ndarray, reg: float) -> float:
    """Full objective: sum of squared clamped-prediction errors + L2 penalty."""
    n_obs = len(values)
    n_factors = uf.shape[1]
    ui = user_idx.tolist()
    qi = item_idx.tolist()
    vals = values.tolist()
    bu_ = bu.tolist()
    bq_ = bq.tolist()
    uf_ = uf.tolist()
    vf_ = vf.tolist()
    sse = 0.0
    for i in range(n_obs):
        n = ui[i]
        m = qi[i]
        dot = 0.0
        un = uf_[n]
        vm = vf_[m]
        for f in range(n_factors):
            dot += un[f] * vm[f]
        z = mu + bu_[n] + bq_[m] + dot
        p = 0.0 if z < 0.0 else (1.0 if z > 1.0 else z)
        e = vals[i] - p
        sse += e * e
    pen = 0.0
    for n in range(len(bu_)):
        pen += bu_[n] * bu_[n]
    for m in range(len(bq_)):
        pen += bq_[m] * bq_[m]
    for n in range(len(uf_)):
        un = uf_[n]
        for f in range(n_factors):
            pen += un[f] * un[f]
    for m in range(len(vf_)):
        vm = vf_[m]
        for f in range(n_factors):
            pen += vm[f] * vm[f]
    return sse + reg * pen
