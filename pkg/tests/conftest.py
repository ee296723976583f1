"""Shared test helpers: finite-difference gradients and trace builders."""

import numpy as np

from gaplab.autodiff import ParamVector, backward
from gaplab.instrument import TraceRecord, TrainTrace


def fd_gradient(spec, params, batch, labels, h=1e-5):
    """Central-difference gradient of the mean cross-entropy loss."""
    base = params.values
    grad = np.zeros_like(base)
    for i in range(len(base)):
        bumped = base.copy()
        bumped[i] = base[i] + h
        up, _, _ = backward(spec, ParamVector(bumped, params.spec_digest), batch, labels)
        bumped[i] = base[i] - h
        down, _, _ = backward(spec, ParamVector(bumped, params.spec_digest), batch, labels)
        grad[i] = (up - down) / (2.0 * h)
    return grad


def max_rel_error(analytic, numeric, floor=1e-2):
    """Worst per-coordinate relative error; the floor keeps tiny-gradient
    coordinates from inflating the ratio with pure roundoff."""
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    denom = np.maximum(floor, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float((np.abs(analytic - numeric) / denom).max())


def eval_trace(pre_accs, post_accs, boundary=100, spacing=10, task_len=None):
    """Trace whose eval ticks carry the given accuracies.

    Pre-boundary evals end exactly at the boundary iteration and march
    backwards with `spacing`; post-boundary evals start at boundary+spacing.
    """
    records = []
    start = boundary - spacing * (len(pre_accs) - 1)
    for k, acc in enumerate(pre_accs):
        it = start + spacing * k
        records.append(TraceRecord(it, 0, 1.0, acc, 1.0, acc,
                                   test_loss=1.0, test_acc=acc))
    for k, acc in enumerate(post_accs):
        it = boundary + spacing * (k + 1)
        records.append(TraceRecord(it, 1, 1.0, acc, 1.0, acc,
                                   test_loss=1.0, test_acc=acc))
    end = task_len if task_len is not None else records[-1].iteration
    return TrainTrace(records=records, boundaries=[boundary, end])
