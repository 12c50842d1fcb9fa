"""Damped Gauss-Newton least squares on SE(2) pose graphs.

Minimizes sum_e r_e^T * Omega_e * r_e where r_e is the SE(2) residual between
the predicted and measured relative pose of edge e, with the angle component
wrapped to (-pi, pi]. Poses of `fixed` vertices are gauge constraints and are
never touched. Steps are accepted only if chi2 decreases (multiplicative
Levenberg-style damping), so chi2 is monotone over accepted iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .geometry import Pose2, wrap_angles
from .model import SlamGraph

_DENSE_LIMIT = 900  # free unknowns below which a dense Cholesky solve is used


@dataclass
class OptimizationResult:
    iterations: int
    initial_chi2: float
    final_chi2: float
    converged: bool


def _edge_arrays(graph: SlamGraph, index: dict[int, int]):
    m = len(graph.edges)
    ei = np.empty(m, dtype=np.int64)
    ej = np.empty(m, dtype=np.int64)
    z = np.empty((m, 3))
    omega = np.empty((m, 3, 3))
    for k, e in enumerate(graph.edges):
        ei[k] = index[e.from_id]
        ej[k] = index[e.to_id]
        z[k] = e.relative_pose.as_array()
        omega[k] = e.information
    return ei, ej, z, omega


def _residuals(poses: np.ndarray, ei, ej, z):
    """Stacked residuals t2v(Z^-1 * (Xi^-1 * Xj)), shape (m, 3)."""
    xi = poses[ei]
    xj = poses[ej]
    ci, si = np.cos(xi[:, 2]), np.sin(xi[:, 2])
    dx = xj[:, 0] - xi[:, 0]
    dy = xj[:, 1] - xi[:, 1]
    # relative translation in frame i
    rx = ci * dx + si * dy
    ry = -si * dx + ci * dy
    cz, sz = np.cos(z[:, 2]), np.sin(z[:, 2])
    ex = cz * (rx - z[:, 0]) + sz * (ry - z[:, 1])
    ey = -sz * (rx - z[:, 0]) + cz * (ry - z[:, 1])
    eth = wrap_angles(xj[:, 2] - xi[:, 2] - z[:, 2])
    return np.stack([ex, ey, eth], axis=1)


def _chi2(res: np.ndarray, omega: np.ndarray) -> float:
    return float(np.einsum("ki,kij,kj->", res, omega, res))


def _jacobians(poses: np.ndarray, ei, ej, z):
    """Per-edge 3x3 blocks (A wrt vertex i, B wrt vertex j)."""
    m = ei.shape[0]
    xi = poses[ei]
    xj = poses[ej]
    ci, si = np.cos(xi[:, 2]), np.sin(xi[:, 2])
    cz, sz = np.cos(z[:, 2]), np.sin(z[:, 2])
    dx = xj[:, 0] - xi[:, 0]
    dy = xj[:, 1] - xi[:, 1]

    # Rz^T * Ri^T = [[r00, r01], [-r01, r00]]
    r00 = cz * ci - sz * si
    r01 = cz * si + sz * ci
    A = np.zeros((m, 3, 3))
    B = np.zeros((m, 3, 3))
    A[:, 0, 0] = -r00
    A[:, 0, 1] = -r01
    A[:, 1, 0] = r01
    A[:, 1, 1] = -r00
    # d(Ri^T)/dtheta applied to (tj - ti), then rotated by Rz^T
    ux = -si * dx + ci * dy
    uy = -ci * dx - si * dy
    A[:, 0, 2] = cz * ux + sz * uy
    A[:, 1, 2] = -sz * ux + cz * uy
    A[:, 2, 2] = -1.0
    B[:, 0, 0] = r00
    B[:, 0, 1] = r01
    B[:, 1, 0] = -r01
    B[:, 1, 1] = r00
    B[:, 2, 2] = 1.0
    return A, B


def optimize(
    graph: SlamGraph,
    fixed: set[int],
    max_iters: int = 50,
    tol: float = 1e-10,
) -> OptimizationResult:
    """Optimize vertex poses in place. `fixed` removes the gauge freedom."""
    if not fixed:
        raise ValueError("fixed vertex set must be non-empty")
    unknown = set(fixed) - set(graph.vertices)
    if unknown:
        raise ValueError(f"fixed ids not in graph: {sorted(unknown)}")
    if not graph.is_connected():
        raise ValueError("graph must be connected")

    ids = sorted(graph.vertices)
    index = {vid: k for k, vid in enumerate(ids)}
    poses = np.array([graph.vertices[vid].pose.as_array() for vid in ids])
    free = np.array([vid not in fixed for vid in ids])
    free_pos = np.full(len(ids), -1, dtype=np.int64)
    free_pos[free] = np.arange(int(free.sum()))
    n_free = int(free.sum())

    if not graph.edges:
        return OptimizationResult(0, 0.0, 0.0, True)

    ei, ej, z, omega = _edge_arrays(graph, index)
    if n_free == 0:
        chi2 = _chi2(_residuals(poses, ei, ej, z), omega)
        return OptimizationResult(0, chi2, chi2, True)
    res = _residuals(poses, ei, ej, z)
    chi2 = _chi2(res, omega)
    initial_chi2 = chi2

    lam = 1e-8
    iterations = 0
    converged = False
    for _ in range(max_iters):
        if chi2 <= 1e-16:
            converged = True
            break
        A, B = _jacobians(poses, ei, ej, z)
        oA = np.einsum("kij,kjl->kil", omega, A)
        oB = np.einsum("kij,kjl->kil", omega, B)
        Haa = np.einsum("kji,kjl->kil", A, oA)
        Hab = np.einsum("kji,kjl->kil", A, oB)
        Hbb = np.einsum("kji,kjl->kil", B, oB)
        ba = np.einsum("kji,kj->ki", oA, res)
        bb = np.einsum("kji,kj->ki", oB, res)

        fi = free_pos[ei]
        fj = free_pos[ej]
        b = np.zeros(3 * n_free)
        mi = fi >= 0
        mj = fj >= 0
        np.add.at(b.reshape(n_free, 3), fi[mi], ba[mi])
        np.add.at(b.reshape(n_free, 3), fj[mj], bb[mj])

        rows, cols, vals = [], [], []

        def add_blocks(blocks, r, c, mask):
            if not np.any(mask):
                return
            blk = blocks[mask]
            rr = (3 * r[mask])[:, None, None] + np.arange(3)[None, :, None]
            cc = (3 * c[mask])[:, None, None] + np.arange(3)[None, None, :]
            rows.append(np.broadcast_to(rr, blk.shape).ravel())
            cols.append(np.broadcast_to(cc, blk.shape).ravel())
            vals.append(blk.ravel())

        add_blocks(Haa, fi, fi, mi)
        add_blocks(Hbb, fj, fj, mj)
        both = mi & mj
        add_blocks(Hab, fi, fj, both)
        add_blocks(np.transpose(Hab, (0, 2, 1)), fj, fi, both)
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)

        accepted = False
        for _attempt in range(12):
            n = 3 * n_free
            if n <= _DENSE_LIMIT:
                H = np.zeros((n, n))
                np.add.at(H, (rows, cols), vals)
                H[np.diag_indices(n)] += lam
                try:
                    cho = scipy.linalg.cho_factor(H, check_finite=False)
                    dx = scipy.linalg.cho_solve(cho, -b, check_finite=False)
                except scipy.linalg.LinAlgError:
                    lam *= 10.0
                    continue
            else:
                H = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsc()
                H = H + scipy.sparse.identity(n, format="csc") * lam
                dx = scipy.sparse.linalg.splu(H).solve(-b)
            trial = poses.copy()
            trial[free, 0] += dx[0::3]
            trial[free, 1] += dx[1::3]
            trial[free, 2] = wrap_angles(trial[free, 2] + dx[2::3])
            trial_res = _residuals(trial, ei, ej, z)
            trial_chi2 = _chi2(trial_res, omega)
            if trial_chi2 <= chi2:
                poses = trial
                res = trial_res
                rel_drop = (chi2 - trial_chi2) / max(chi2, 1e-300)
                chi2 = trial_chi2
                lam = max(lam * 0.3, 1e-12)
                accepted = True
                iterations += 1
                if rel_drop < tol:
                    converged = True
                break
            lam *= 10.0
        if not accepted or converged:
            converged = converged or not accepted  # damping exhausted: local minimum
            break

    for k, vid in enumerate(ids):
        if free[k]:
            graph.vertices[vid].pose = Pose2(poses[k, 0], poses[k, 1], poses[k, 2])
    return OptimizationResult(iterations, initial_chi2, chi2, converged)
