"""Oracle for the trace-criterion / training-MSE identity at H > 0.

The lag-stacked Gram matrices assembled from sample autocovariances
(alpha block (r,c) = Gamma(c-r), Gamma(-l) = Gamma(l)^T) are exactly the
Gram matrices of a least-squares regression run on the series zero-padded
on both ends, with normalization 1/T0 and the sum over t = 1 .. T0+H.
This script checks that correspondence numerically, plus the resulting
identity  tr(Sigma_I - beta alpha^-1 beta^T) == padded training MSE,
before the convention is frozen into the package.
"""

import numpy as np


def gamma_hat(X, l):
    n, T = X.shape
    return X[:, l:] @ X[:, : T - l].T / T


def assemble(X, I, H):
    n, T = X.shape
    Ic = [j for j in range(n) if j not in I]
    gammas = [gamma_hat(X, l) for l in range(H + 1)]
    q = len(Ic)
    alpha = np.zeros(((H + 1) * q, (H + 1) * q))
    beta = np.zeros((len(I), (H + 1) * q))
    for r in range(H + 1):
        for c in range(H + 1):
            l = c - r
            blk = gammas[l] if l >= 0 else gammas[-l].T
            alpha[r * q:(r + 1) * q, c * q:(c + 1) * q] = blk[np.ix_(Ic, Ic)]
    for c in range(H + 1):
        beta[:, c * q:(c + 1) * q] = gammas[c][np.ix_(I, Ic)]
    return alpha, beta, gammas


def padded_design(X, rows, H):
    # lag-l row block: series shifted right by l, zeros filling both ends,
    # length T0 + H so every sample with any data survives
    n, T = X.shape
    q = len(rows)
    D = np.zeros(((H + 1) * q, T + H))
    for l in range(H + 1):
        D[l * q:(l + 1) * q, l:l + T] = X[rows, :]
    return D


rng = np.random.default_rng(7)
worst_gram = 0.0
worst_id = 0.0
for trial in range(30):
    n = int(rng.integers(3, 9))
    H = int(rng.integers(1, 4))
    T = 400
    # mildly correlated VAR(1) so lags carry signal
    C = rng.normal(size=(n, n)) * 0.3 / np.sqrt(n)
    X = np.zeros((n, T + 200))
    for t in range(1, T + 200):
        X[:, t] = C @ X[:, t - 1] + rng.normal(size=n)
    X = X[:, 200:]

    p = int(rng.integers(1, max(2, n // 2)))
    I = sorted(rng.choice(n, size=p, replace=False).tolist())
    Ic = [j for j in range(n) if j not in I]

    alpha, beta, gammas = assemble(X, I, H)
    Dm = padded_design(X, Ic, H)
    target = np.zeros((len(I), T + H))
    target[:, :T] = X[I, :]

    A2 = Dm @ Dm.T / T
    B2 = target @ Dm.T / T
    worst_gram = max(worst_gram, np.abs(A2 - alpha).max(), np.abs(B2 - beta).max())

    theta = np.linalg.solve(alpha, beta.T).T
    crit = np.trace(gammas[0][np.ix_(I, I)]) - np.trace(beta @ np.linalg.solve(alpha, beta.T))
    mse = np.sum((target - theta @ Dm) ** 2) / T
    worst_id = max(worst_id, abs(crit - mse) / abs(mse))

print("max |Gram difference| over 30 trials:", worst_gram)
print("max relative criterion-MSE error   :", worst_id)
assert worst_gram < 1e-12
assert worst_id < 1e-12
print("zero-padded convention confirmed")
