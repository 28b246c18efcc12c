"""Matrix kernels: orientation-checked polar factorization A = exp(K) exp(Y).

K is skew (principal-branch log of the special-orthogonal polar factor,
extracted block-wise from the real Schur form so that half-turns are kept
real) and Y is symmetric (eigendecomposition log of the SPD factor).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConditioningError, NumericError, OrientationError, ParameterError

#: Condition-number budget beyond which factorization refuses to certify.
COND_LIMIT = 1e12
#: Relative reconstruction tolerance of linear_factorize.
RECON_RTOL = 1e-12


@dataclass(frozen=True)
class LinearLogFactors:
    """Factors of A = expm(K) @ expm(Y): K skew-symmetric, Y symmetric."""

    K: np.ndarray
    Y: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return scipy.linalg.expm(self.K) @ scipy.linalg.expm(self.Y)


def _check_square(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {A.shape}")
    if not np.isfinite(A).all():
        raise ParameterError("matrix entries must be finite")
    return A


def symmetric_log(P) -> np.ndarray:
    """Log of a symmetric positive definite matrix via eigendecomposition."""
    P = _check_square(P)
    w, V = np.linalg.eigh(0.5 * (P + P.T))
    if np.any(w <= 0):
        raise ConditioningError(f"matrix is not positive definite (min eigenvalue {w.min():.3e})")
    Y = (V * np.log(w)) @ V.T
    return 0.5 * (Y + Y.T)


def skew_log_rotation(R) -> np.ndarray:
    """Principal-branch skew log of a special-orthogonal matrix.

    Rotation angles are taken in (-pi, pi].  Eigenvalues at -1 (half turns)
    come in pairs for det = +1; each pair is logged as a rotation by exactly
    pi in the invariant plane the Schur basis exposes, keeping the result real.
    """
    R = _check_square(R)
    n = R.shape[0]
    T, Q = scipy.linalg.schur(R, output="real")
    S = np.zeros((n, n))
    minus_ones = []
    i = 0
    while i < n:
        two_by_two = i + 1 < n and abs(T[i + 1, i]) > 1e-9
        if two_by_two:
            c = 0.5 * (T[i, i] + T[i + 1, i + 1])
            theta = float(np.arctan2(T[i + 1, i], c))
            S[i, i + 1] = -theta
            S[i + 1, i] = theta
            i += 2
        else:
            if T[i, i] < 0.0:
                minus_ones.append(i)
            i += 1
    if len(minus_ones) % 2 != 0:
        raise NumericError("odd count of -1 eigenvalues; input is not special orthogonal")
    for a, b in zip(minus_ones[0::2], minus_ones[1::2]):
        S[a, b] = -np.pi
        S[b, a] = np.pi
    K = Q @ S @ Q.T
    return 0.5 * (K - K.T)


def linear_factorize(A) -> LinearLogFactors:
    """Factor an orientation-preserving matrix as expm(K) expm(Y).

    Raises OrientationError for det <= 0 and ConditioningError when the
    condition number exceeds 1e12 or the reconstruction misses its 1e-12
    relative tolerance.
    """
    A = _check_square(A)
    det = float(np.linalg.det(A))
    if det <= 0.0:
        raise OrientationError(f"matrix must preserve orientation, det = {det:.6e}")
    cond = float(np.linalg.cond(A))
    if cond > COND_LIMIT:
        raise ConditioningError(f"condition number {cond:.3e} exceeds budget {COND_LIMIT:.1e}")
    R, P = scipy.linalg.polar(A)
    # det A > 0 and det P > 0 force det R = +1, so R is a rotation.
    K = skew_log_rotation(R)
    Y = symmetric_log(P)
    factors = LinearLogFactors(K=K, Y=Y)
    scale = max(1.0, float(np.linalg.norm(A)))
    err = float(np.linalg.norm(factors.reconstruct() - A)) / scale
    if err > RECON_RTOL:
        raise ConditioningError(f"factor reconstruction error {err:.3e} exceeds {RECON_RTOL:.1e}")
    return factors


def positive_growth_rate(Y) -> float:
    """max(lambda_max(Y), 0) for symmetric Y: log of the expansion factor of expm(Y)."""
    Y = _check_square(Y)
    if Y.shape[0] == 0:
        return 0.0
    return float(max(np.linalg.eigvalsh(0.5 * (Y + Y.T)).max(), 0.0))


@dataclass(frozen=True)
class SkewRotationBlocks:
    """Real block-diagonalization of a skew matrix: K = Q S Q^T.

    S is block diagonal with 2x2 blocks [[0, -theta], [theta, 0]] at the
    stored index pairs.  Lets expm(s K) x be evaluated exactly (per-point
    plane rotations), which is what makes damped skew flows integrable in
    closed form.
    """

    Q: np.ndarray
    pairs: tuple[tuple[int, int], ...]
    angles: tuple[float, ...]

    def apply_exp(self, scales: np.ndarray, X: np.ndarray) -> np.ndarray:
        """Rows of X mapped by expm(scales[i] * K); scales has shape (m,)."""
        Z = X @ self.Q  # coordinates in the block basis
        out = Z.copy()
        for (i, j), theta in zip(self.pairs, self.angles):
            ang = scales * theta
            c, s = np.cos(ang), np.sin(ang)
            zi, zj = Z[:, i], Z[:, j]
            out[:, i] = c * zi - s * zj
            out[:, j] = s * zi + c * zj
        return out @ self.Q.T

    def exp_matrices(self, scales: np.ndarray) -> np.ndarray:
        """expm(scales[i] * K) as an (m, n, n) stack."""
        scales = np.asarray(scales, dtype=float)
        m, n = scales.shape[0], self.Q.shape[0]
        E = np.broadcast_to(np.eye(n), (m, n, n)).copy()
        for (i, j), theta in zip(self.pairs, self.angles):
            ang = scales * theta
            c, s = np.cos(ang), np.sin(ang)
            E[:, i, i] = c
            E[:, i, j] = -s
            E[:, j, i] = s
            E[:, j, j] = c
        return np.einsum("ab,mbc,dc->mad", self.Q, E, self.Q)


def skew_rotation_blocks(K) -> SkewRotationBlocks:
    K = _check_square(K)
    K = 0.5 * (K - K.T)
    n = K.shape[0]
    T, Q = scipy.linalg.schur(K, output="real")
    pairs = []
    angles = []
    i = 0
    while i < n:
        if i + 1 < n and abs(T[i + 1, i]) > 1e-14:
            pairs.append((i, i + 1))
            angles.append(float(T[i + 1, i]))
            i += 2
        else:
            i += 1
    return SkewRotationBlocks(Q=Q, pairs=tuple(pairs), angles=tuple(angles))


def expm(M) -> np.ndarray:
    """Matrix exponential (scipy's scaling-and-squaring)."""
    return scipy.linalg.expm(_check_square(M))
