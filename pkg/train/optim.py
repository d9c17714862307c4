"""Adam with a piecewise-constant decay schedule over a ParamStore."""
from dataclasses import dataclass, field

import numpy as np

from adcore.exceptions import NonFiniteError
from adcore.params import ParamStore


@dataclass(frozen=True, eq=False)
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def zeros(cls, params):
        return cls(0, {n: np.zeros_like(params[n]) for n in params},
                   {n: np.zeros_like(params[n]) for n in params})

    def as_dict(self):
        def arrays(moments):
            return {name: {"shape": list(a.shape),
                           "data": [float(x) for x in np.ravel(a)]}
                    for name, a in moments.items()}
        return {"step": self.step, "m": arrays(self.m), "v": arrays(self.v)}

    @classmethod
    def from_dict(cls, data):
        def arrays(moments):
            return {name: np.asarray(entry["data"], dtype=np.float64)
                    .reshape(entry["shape"])
                    for name, entry in moments.items()}
        return cls(int(data["step"]), arrays(data["m"]), arrays(data["v"]))


def adam_step(state, params, grads, step_index, cfg):
    """
    One bias-corrected Adam update at learning rate
    cfg.learning_rate_at(step_index). `grads` maps names to arrays.
    """
    missing = set(params) ^ set(grads)
    if missing:
        raise KeyError(f"gradients and parameters disagree on "
                       f"{sorted(missing)}")
    for name in params:
        if not np.all(np.isfinite(grads[name])):
            raise NonFiniteError(f"gradient of parameter {name!r}",
                                 step=step_index)

    t = state.step + 1
    lr = cfg.learning_rate_at(step_index)
    correction1 = 1.0 - cfg.beta1 ** t
    correction2 = 1.0 - cfg.beta2 ** t
    updated, m_new, v_new = {}, {}, {}
    for name in params:
        g = np.asarray(grads[name], dtype=np.float64)
        m = cfg.beta1 * state.m[name] + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * state.v[name] + (1.0 - cfg.beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        updated[name] = params[name] - lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
        m_new[name], v_new[name] = m, v
    return ParamStore(updated), AdamState(t, m_new, v_new)
