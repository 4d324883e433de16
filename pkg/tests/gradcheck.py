"""Central finite-difference check of the network's hand-written gradients."""

import numpy as np

from sparse_mcts.gnn import param_group

STEP = 1e-4
TOL = 1e-4
# Some exact gradients are identically zero (the final bias, for one: the
# softmax ignores a constant shift), where the difference quotient is pure
# rounding noise of order 1e-10. The floor keeps those from dividing by ~0.
FLOOR = 1e-5
# A ReLU input within STEP of zero puts a kink inside the stencil and the
# difference quotient averages two one-sided slopes. Those entries are
# re-checked with the step shrunk until no unit changes sign.
MIN_STEP = 1e-8


def relative_error(analytic, numeric):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), FLOOR)


def loss_and_pattern(model, batch):
    s, tape = model.logits(batch, keep_tape=True)
    probs = batch.masked_softmax(s)
    loss = float(-np.log(np.maximum(probs[batch.targets], 1e-300)).mean())
    return loss, np.concatenate([(t > 0).ravel() for t in tape])


def numeric_derivative(model, batch, arr, ix, base_pattern, stats=None):
    old = arr[ix]
    h = STEP
    while True:
        arr[ix] = old + h
        up, p_up = loss_and_pattern(model, batch)
        arr[ix] = old - h
        down, p_down = loss_and_pattern(model, batch)
        arr[ix] = old
        smooth = np.array_equal(p_up, base_pattern) and np.array_equal(p_down, base_pattern)
        if smooth or h <= MIN_STEP:
            break
        h /= 10
    if stats is not None and h < STEP:
        stats["shrunk"] = stats.get("shrunk", 0) + 1
    return (up - down) / (2 * h)


def check_gradients(model, batch, entries_per_array=None, rng=None, stats=None):
    """Worst relative error per parameter group.

    ``entries_per_array=None`` checks every entry; otherwise that many random
    entries of each array are checked. ``stats`` (a dict) receives the number
    of entries checked and of those that needed a smaller step.
    """
    _, grads, _ = model.loss_and_grad(batch)
    _, base = loss_and_pattern(model, batch)
    worst: dict[str, float] = {}
    for name, arr in model.params.items():
        if entries_per_array is None:
            idx = list(np.ndindex(arr.shape))
        else:
            idx = [tuple(int(rng.integers(0, s)) for s in arr.shape) for _ in range(entries_per_array)]
        for ix in idx:
            err = relative_error(grads[name][ix], numeric_derivative(model, batch, arr, ix, base, stats))
            group = param_group(name)
            worst[group] = max(worst.get(group, 0.0), err)
        if stats is not None:
            stats["checked"] = stats.get("checked", 0) + len(idx)
    return worst
