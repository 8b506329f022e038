"""Reference values used by the reproduction checks.

``TABLE1`` holds, per dof row, the published contiguous-dof divergences for
dimensions 1, 2 and 3 as ``(prev, next)`` pairs; ``TABLE2`` holds the
published rho=0 copula dof prior.  The checks in :mod:`tdofprior.pipelines`
recompute both and report per-cell deltas.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["TABLE1", "TABLE2", "TABLE1_TOLERANCE", "table1_cells", "CellCheck"]

# dof -> (d1_prev, d1_next, d2_prev, d2_next, d3_prev, d3_next); None where
# the table prints no value (dof 1 has no lower neighbor).
TABLE1 = {
    1: (None, 1.131e-01, None, 1.416e-01, None, 1.552e-01),
    2: (6.210e-02, 1.917e-02, 7.944e-02, 2.733e-02, 8.851e-02, 3.208e-02),
    3: (1.364e-02, 5.897e-03, 1.956e-02, 9.139e-03, 2.313e-02, 1.129e-02),
    4: (4.700e-03, 2.412e-03, 7.283e-03, 3.961e-03, 9.021e-03, 5.087e-03),
    5: (2.047e-03, 1.170e-03, 3.353e-03, 2.005e-03, 4.307e-03, 2.654e-03),
    6: (1.033e-03, 6.364e-04, 1.764e-03, 1.127e-03, 2.332e-03, 1.529e-03),
    7: (5.768e-04, 3.761e-04, 1.018e-03, 6.838e-04, 1.378e-03, 9.459e-04),
    8: (3.473e-04, 2.366e-04, 6.289e-04, 4.394e-04, 8.680e-04, 6.179e-04),
    9: (2.215e-04, 1.563e-04, 4.097e-04, 2.955e-04, 5.749e-04, 4.213e-04),
    10: (1.479e-04, 1.075e-04, 2.785e-04, 2.061e-04, 3.962e-04, 2.975e-04),
    11: (1.025e-04, 7.632e-05, 1.959e-04, 1.483e-04, 2.821e-04, 2.162e-04),
    12: (7.326e-05, 5.570e-05, 1.419e-04, 1.094e-04, 2.064e-04, 1.610e-04),
    13: (5.375e-05, 4.161e-05, 1.052e-04, 8.252e-05, 1.546e-04, 1.224e-04),
    14: (4.033e-05, 3.172e-05, 7.973e-05, 6.342e-05, 1.180e-04, 9.475e-05),
    15: (3.084e-05, 2.460e-05, 6.151e-05, 4.956e-05, 9.173e-05, 7.451e-05),
    16: (2.399e-05, 1.937e-05, 4.821e-05, 3.929e-05, 7.237e-05, 5.941e-05),
    17: (1.894e-05, 1.546e-05, 3.833e-05, 3.155e-05, 5.786e-05, 4.796e-05),
    18: (1.515e-05, 1.250e-05, 3.085e-05, 2.563e-05, 4.682e-05, 3.915e-05),
    19: (1.227e-05, 1.021e-05, 2.511e-05, 2.104e-05, 3.830e-05, 3.227e-05),
    20: (1.004e-05, 8.420e-06, 2.065e-05, 1.743e-05, 3.163e-05, 2.685e-05),
    21: (8.291e-06, 7.007e-06, 1.714e-05, 1.457e-05, 2.636e-05, 2.252e-05),
    22: (6.909e-06, 5.879e-06, 1.434e-05, 1.227e-05, 2.214e-05, 1.903e-05),
    23: (5.803e-06, 4.969e-06, 1.209e-05, 1.041e-05, 1.873e-05, 1.619e-05),
    24: (4.910e-06, 4.229e-06, 1.027e-05, 8.886e-06, 1.595e-05, 1.386e-05),
    25: (4.182e-06, 3.622e-06, 8.775e-06, 7.633e-06, 1.367e-05, 1.194e-05),
    26: (3.584e-06, 3.120e-06, 7.544e-06, 6.593e-06, 1.179e-05, 1.034e-05),
    27: (3.089e-06, 2.702e-06, 6.521e-06, 5.725e-06, 1.022e-05, 8.999e-06),
    28: (2.677e-06, 2.352e-06, 5.666e-06, 4.995e-06, 8.899e-06, 7.869e-06),
    29: (2.332e-06, 2.056e-06, 4.947e-06, 4.378e-06, 7.786e-06, 6.911e-06),
    30: (2.040e-06, 1.806e-06, 4.338e-06, 3.853e-06, 6.843e-06, 6.095e-06),
}

# rho=0 copula dof prior, indices 1..30.
TABLE2 = [
    0.804, 0.129, 0.0368, 0.014, 0.007, 0.004, 0.002, 1.28e-3, 8.05e-4, 5.33e-4,
    3.58e-4, 3.05e-4, 2.06e-4, 1.60e-4, 1.30e-4, 9.52e-5, 6.79e-5, 6.04e-5,
    4.55e-5, 3.44e-5, 2.19e-5, 2.39e-5, 2.06e-5, 2.31e-5, 1.81e-5, 1.91e-5,
    1.28e-5, 2.05e-5, 7.85e-6, 2.78e-6,
]


def table1_tolerance(expected: float) -> float:
    return max(0.005 * abs(expected), 1e-7)


TABLE1_TOLERANCE = table1_tolerance


@dataclass(frozen=True)
class CellCheck:
    d: int
    nu: int
    column: str
    expected: float
    actual: float
    passed: bool

    @property
    def delta(self) -> float:
        return self.actual - self.expected


def table1_cells(d: int) -> list[tuple[int, str, float]]:
    """The checkable (nu, column, expected) cells of one dimension block."""
    col_prev, col_next = {1: (0, 1), 2: (2, 3), 3: (4, 5)}[d]
    cells = []
    for nu in range(1, 31):
        prev_val = TABLE1[nu][col_prev]
        next_val = TABLE1[nu][col_next]
        if prev_val is not None and nu <= 30:
            cells.append((nu, "prev", prev_val))
        if next_val is not None and nu <= 29:
            cells.append((nu, "next", next_val))
    return cells
