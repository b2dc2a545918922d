"""Factor contraction for batched discrete models.

A factor is a pair ``(vars, array)`` where ``array`` has a leading batch
axis followed by one axis per variable. Contraction sums out every variable
not kept, using ``numpy.einsum`` with a greedy path (variable elimination).
"""

from __future__ import annotations

import string

import numpy as np

_LETTERS = string.ascii_letters


def contract(factors, keep):
    """Multiply ``factors`` and sum out all variables except ``keep``.

    Returns an array of shape ``(batch, *cards of keep)``.
    """
    names = []
    for vs, _ in factors:
        for v in vs:
            if v not in names:
                names.append(v)
    for v in keep:
        if v not in names:
            raise KeyError(f"variable {v!r} not in any factor")
    if len(names) + 1 > len(_LETTERS):
        raise ValueError("too many variables for a single contraction")
    letter = {v: _LETTERS[i + 1] for i, v in enumerate(names)}
    batch = _LETTERS[0]
    operands = []
    subs = []
    for vs, arr in factors:
        subs.append(batch + "".join(letter[v] for v in vs))
        operands.append(arr)
    expr = ",".join(subs) + "->" + batch + "".join(letter[v] for v in keep)
    return np.einsum(expr, *operands, optimize="greedy")
