"""Independent reference implementations used as test oracles.

Everything here is written directly against numpy, without touching the
package's training path, so the tests compare two separately derived
answers.
"""

import math

import numpy as np


def encode_reference(labels, target, eps):
    """One-vs-rest targets computed from first principles."""
    labels = np.asarray(labels)
    y = np.where(labels == target, 1.0 - eps, eps)
    pre = np.log(y / (1.0 - y))
    slope = y * (1.0 - y)
    return y, pre, slope


def dense_ridge_weights(X, labels, target, regularization, eps=0.05):
    """Brute-force closed-form weights via a dense solve.

    Builds the bias-augmented design matrix, forms the slope-weighted
    normal matrix explicitly and solves the regularized system with a
    dense linear solver.
    """
    X = np.asarray(X, dtype=np.float64)
    ones = np.ones((1, X.shape[1]))
    X_aug = np.concatenate([ones, X], axis=0)
    _, pre, slope = encode_reference(labels, target, eps)
    moment = X_aug @ (slope * slope * pre)
    normal = (X_aug * slope[None, :] ** 2) @ X_aug.T
    normal += regularization * np.eye(X_aug.shape[0])
    return np.linalg.solve(normal, moment)


def rel_error(actual, expected):
    expected = np.asarray(expected, dtype=np.float64)
    denom = np.linalg.norm(expected)
    if denom == 0.0:
        return float(np.linalg.norm(np.asarray(actual) - expected))
    return float(np.linalg.norm(np.asarray(actual) - expected) / denom)


def sign_align(column, reference):
    """Flip a singular vector's sign to match a reference direction."""
    column = np.asarray(column, dtype=np.float64)
    return column if float(column @ np.asarray(reference)) >= 0 else -column


LOGIT_19 = math.log(19.0)  # logit of 0.95 with eps = 0.05
