"""Oracle for the 4-node toy example: partial variances from first principles.

Builds the toy graph (edges 1-2, 1-3, 2-3, 1-4, unit weights), forms the
covariance-like matrix A + D and its correlation counterpart, and evaluates
sigma^2_{i|rest} = S_ii - S_{i,rest} S_rest^{-1} S_{rest,i} directly.
Printed values are frozen into tests/test_select_linear.py and the
acceptance gate.
"""

import numpy as np

A = np.array([
    [0, 1, 1, 1],
    [1, 0, 1, 0],
    [1, 1, 0, 0],
    [1, 0, 0, 0],
], dtype=float)
D = np.diag(A.sum(axis=1))


def partial_variance(S, i):
    rest = [j for j in range(S.shape[0]) if j != i]
    sub = S[np.ix_(rest, rest)]
    v = S[i, rest]
    return S[i, i] - v @ np.linalg.solve(sub, v)


def report(name, S):
    pv = np.array([partial_variance(S, i) for i in range(4)])
    print(name)
    print("  matrix:")
    for row in S:
        print("   ", " ".join(f"{x: .10f}" for x in row))
    print("  partial variances:", " ".join(f"{x:.10f}" for x in pv))
    print("  rounded (2 d.p.):", np.round(pv, 2))
    print("  argmin (0-based):", int(np.argmin(pv)), " 1-based:", int(np.argmin(pv)) + 1)
    print()


report("covariance form A + D", A + D)

d = np.diag(D)
corr = A / np.sqrt(np.outer(d, d)) + np.eye(4)
report("correlation form D^-1/2 A D^-1/2 + Id", corr)

print("exact fractions: 4/3 =", 4 / 3, " 4/7 =", 4 / 7, " 4/9 =", 4 / 9)
