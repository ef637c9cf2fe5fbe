"""
Numerical kernel for SO(n).

Skew matrices are brought to real canonical form through the real Schur
decomposition (a skew matrix is normal, so its Schur form is block diagonal
with 2x2 rotation generators and 1x1 zeros).  Exponential, logarithm,
midpoints and distances are all assembled from those blocks, which keeps
every output exactly orthogonal up to the accuracy of the Schur frame.

Conventions
-----------
* R = [[0, -1], [1, 0]] is the rotation generator; a block ``a * R`` rotates
  its plane by the angle ``a``.
* Metric: Frobenius, <A, B> = trace(A^T B), unnormalised.  A single block
  ``a * R`` therefore has norm ``sqrt(2) * |a|``.
* Geodesics carry an explicit pi: gamma(t) = base @ expm(pi * t * A), so odd
  integer angles are exactly the geodesics from ``base`` to ``-base``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import schur

from .errors import BranchError, InvalidInput, ResolutionError

ROT = np.array([[0.0, -1.0], [1.0, 0.0]])

SKEW_TOL = 1e-10
# principal angles closer than this to pi are treated as the branch boundary
BRANCH_TOL = 1e-9


def skew_residual(A):
    return float(np.abs(A + A.T).max()) if A.size else 0.0


def orthogonality_residual(Q):
    if Q.size == 0:
        return 0.0
    return float(np.abs(Q.T @ Q - np.eye(Q.shape[0])).max())


def _schur_blocks(M):
    """Real Schur form of a normal matrix, split into its diagonal blocks.

    Returns the orthogonal frame ``Z`` and a list of ``(i, T_block)`` with
    the block starting at row ``i`` (size 1 or 2).
    """
    T, Z = schur(M, output="real")
    n = M.shape[0]
    blocks = []
    i = 0
    while i < n:
        if i + 1 < n and T[i + 1, i] != 0.0:
            blocks.append((i, T[i:i + 2, i:i + 2]))
            i += 2
        else:
            blocks.append((i, T[i:i + 1, i:i + 1]))
            i += 1
    return Z, blocks


@dataclass(frozen=True)
class SkewSpectral:
    """Canonical form A = frame @ blockdiag(a_j * R, ..., 0) @ frame.T.

    ``angles`` are non-negative and sorted by non-increasing size; columns
    ``2j, 2j+1`` of ``frame`` span the plane of ``angles[j]`` (oriented so
    that A u = a v), and the last ``kernel_dim`` columns span ker A.
    """

    frame: np.ndarray
    angles: np.ndarray
    kernel_dim: int

    @property
    def n(self):
        return self.frame.shape[0]

    def plane(self, j):
        return self.frame[:, 2 * j:2 * j + 2]

    @property
    def kernel(self):
        return self.frame[:, 2 * len(self.angles):]

    def assemble(self, angles=None):
        """Rebuild a skew matrix in this frame with (optionally new) angles."""
        angles = self.angles if angles is None else np.asarray(angles, dtype=float)
        D = np.zeros((self.n, self.n))
        for j, a in enumerate(angles):
            D[2 * j:2 * j + 2, 2 * j:2 * j + 2] = a * ROT
        return self.frame @ D @ self.frame.T

    def rotation(self, scale=1.0):
        """expm(scale * A) assembled blockwise."""
        D = np.eye(self.n)
        for j, a in enumerate(self.angles):
            c, s = np.cos(scale * a), np.sin(scale * a)
            D[2 * j:2 * j + 2, 2 * j:2 * j + 2] = [[c, -s], [s, c]]
        return self.frame @ D @ self.frame.T


def skew_spectral(A, tol=SKEW_TOL, zero_tol=1e-13):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInput("expected a square matrix")
    n = A.shape[0]
    if n == 0:
        return SkewSpectral(np.zeros((0, 0)), np.zeros(0), 0)
    scale = max(1.0, float(np.abs(A).max()))
    if skew_residual(A) > tol * scale:
        raise InvalidInput(f"matrix is not skew (residual {skew_residual(A):.2e})")
    A = 0.5 * (A - A.T)
    Z, blocks = _schur_blocks(A)
    planes, kernel = [], []
    for i, B in blocks:
        if B.shape[0] == 2:
            a = 0.5 * (B[1, 0] - B[0, 1])
            u, v = Z[:, i], Z[:, i + 1]
            if a < 0:
                a, u, v = -a, v, u
            if a <= zero_tol * scale:
                kernel.extend([u, v])
            else:
                planes.append((a, u, v))
        else:
            kernel.append(Z[:, i])
    # stable sort keeps block order among equal angles
    order = sorted(range(len(planes)), key=lambda j: -planes[j][0])
    cols = []
    for j in order:
        cols.extend(planes[j][1:])
    cols.extend(kernel)
    frame = np.column_stack(cols)
    angles = np.array([planes[j][0] for j in order])
    return SkewSpectral(frame, angles, len(kernel))


def expm(A):
    """Exponential of a skew matrix, exact rotation blocks."""
    return skew_spectral(A).rotation()


def _orth_angles(R, branch_tol=BRANCH_TOL):
    """Schur frame and principal rotation angles of an orthogonal matrix."""
    Z, blocks = _schur_blocks(R)
    out = []
    for i, B in blocks:
        if B.shape[0] == 2:
            theta = np.arctan2(0.5 * (B[1, 0] - B[0, 1]), 0.5 * (B[0, 0] + B[1, 1]))
            if abs(theta) >= np.pi - branch_tol:
                raise BranchError("rotation angle at pi: logarithm is ambiguous")
            out.append((i, theta))
        elif B[0, 0] < 0:
            raise BranchError("eigenvalue -1: logarithm is ambiguous")
    return Z, out


def _assemble(Z, angles, n, fn):
    D = np.zeros((n, n)) if fn is None else np.eye(n)
    for i, theta in angles:
        if fn is None:
            D[i:i + 2, i:i + 2] = theta * ROT
        else:
            D[i:i + 2, i:i + 2] = fn(theta)
    return Z @ D @ Z.T


def logm(R):
    """Principal logarithm of a special orthogonal matrix.

    Raises BranchError when some rotation angle sits at pi.
    """
    R = np.asarray(R, dtype=float)
    if R.shape[0] == 0:
        return np.zeros((0, 0))
    Z, angles = _orth_angles(R)
    L = _assemble(Z, angles, R.shape[0], None)
    return 0.5 * (L - L.T)


def _rot2(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def orth_power(R, s):
    """expm(s * logm(R)) for an orthogonal R inside the principal branch."""
    Z, angles = _orth_angles(R)
    return _assemble(Z, angles, R.shape[0], lambda th: _rot2(s * th))


def rotation_distance(R):
    """Frobenius norm of logm(R), read off the Schur angles."""
    _, angles = _orth_angles(R)
    return float(np.sqrt(2.0 * sum(th * th for _, th in angles)))


def distance(P, Q):
    return rotation_distance(P.T @ Q)


def geodesic_midpoint(P, Q):
    return P @ orth_power(P.T @ Q, 0.5)


def midpoint_and_distance(P, Q):
    """Geodesic midpoint of P, Q together with distance(P, Q), from one Schur form."""
    R = P.T @ Q
    Z, angles = _orth_angles(R)
    M = P @ _assemble(Z, angles, R.shape[0], lambda th: _rot2(0.5 * th))
    return M, float(np.sqrt(2.0 * sum(th * th for _, th in angles)))


def geodesic_interpolate(P, Q, s):
    return P @ orth_power(P.T @ Q, s)


def unit_part(A, tol=1e-8):
    """A (-A^2)^{-1/2} on the range of A, zero on its kernel.

    For a skew A this is the complex structure J' with A = |A| J' on the
    range; blocks with angle below ``tol`` count as kernel.
    """
    sp = skew_spectral(A)
    units = np.where(sp.angles > tol, 1.0, 0.0)
    return sp.assemble(units)


@dataclass(frozen=True)
class GroupGeodesic:
    """gamma(t) = base @ expm(pi * t * velocity)."""

    base: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        if orthogonality_residual(self.base) > 1e-8:
            raise InvalidInput("geodesic base is not orthogonal")
        if skew_residual(self.velocity) > 1e-8:
            raise InvalidInput("geodesic velocity is not skew")

    @property
    def spectral(self):
        return skew_spectral(self.velocity)

    def __call__(self, t):
        return self.base @ self.spectral.rotation(np.pi * t)

    def sample(self, ts):
        sp = self.spectral
        return np.array([self.base @ sp.rotation(np.pi * t) for t in ts])

    def energy(self):
        """Continuous energy over [0, 1]: |pi * velocity|^2."""
        return float(np.pi ** 2 * np.sum(self.velocity ** 2))


def complex_frame(J_o):
    """Columns u_1..u_m with (u_j, J_o u_j) an orthonormal real basis."""
    sp = skew_spectral(J_o)
    if sp.kernel_dim or not np.allclose(sp.angles, 1.0, atol=1e-8):
        raise InvalidInput("J_o is not an orthogonal complex structure")
    return sp.frame[:, 0::2][:, :len(sp.angles)]


def complexify(M, J_o, U=None):
    """Complex m x m matrix of a real map commuting with J_o (J_o acts as i)."""
    U = complex_frame(J_o) if U is None else U
    V = J_o @ U
    return U.T @ M @ U + 1j * (V.T @ M @ U)


def complex_angles(A, J_o):
    """Signed angles a_j of a skew A commuting with J_o: eigenvalues i * a_j."""
    ev = np.linalg.eigvals(complexify(A, J_o))
    return np.sort(ev.imag)[::-1]


def det_winding(loop, J_o, max_step=0.5 * np.pi, comm_tol=1e-8):
    """Winding number of the complex determinant along a sampled loop.

    Every entry must commute with J_o.  The loop is closed in the
    determinant (first and last complex determinants agree); the matrices
    themselves may differ, e.g. I and -I in even complex dimension.
    A step in argument of ``max_step`` or more is reported as a
    ResolutionError because the lift would be ambiguous.
    """
    loop = [np.asarray(M, dtype=float) for M in loop]
    if len(loop) < 2:
        raise InvalidInput("loop needs at least two samples")
    U = complex_frame(J_o)
    dets = []
    for i, M in enumerate(loop):
        res = float(np.abs(M @ J_o - J_o @ M).max())
        if res > comm_tol:
            raise InvalidInput(f"entry {i} does not commute with J_o (residual {res:.2e})")
        d = np.linalg.det(complexify(M, J_o, U))
        if abs(d) < 1e-12:
            raise InvalidInput(f"entry {i} is singular")
        dets.append(d / abs(d))
    if abs(dets[0] - dets[-1]) > 1e-8:
        raise InvalidInput("loop is not closed in the determinant")
    steps = np.angle(np.array(dets[1:]) / np.array(dets[:-1]))
    if np.abs(steps).max() >= max_step:
        raise ResolutionError(
            f"argument step {np.abs(steps).max():.3f} >= {max_step:.3f}; refine the loop")
    return int(round(steps.sum() / (2 * np.pi)))
