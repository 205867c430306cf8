"""Independent reference implementations used only by the tests.

These are deliberately naive: explicit matrices, Python loops, closed forms.
They share no code with the package beyond plain numpy.
"""
import numpy as np


def all_shifts(a):
    """Rows are ``np.roll(a, (i, j))`` for every 2-D shift, row-major in ``(i, j)``."""
    H, W = a.shape
    return np.array([np.roll(a, (i, j), axis=(0, 1)).ravel() for i in range(H) for j in range(W)])


def gaussian_gram(A, B, sigma):
    n = A.shape[1]
    d = ((A[:, None, :] - B[None, :, :]) ** 2).sum(-1)
    return np.exp(-d / (sigma ** 2 * n))


def gaussian_target(shape, sigma=1.0):
    H, W = shape
    y = np.zeros(shape)
    for i in range(H):
        for j in range(W):
            di = min(i, H - i)
            dj = min(j, W - j)
            y[i, j] = np.exp(-0.5 * (di * di + dj * dj) / sigma ** 2)
    return y


def dense_kcc(x, z, y, lam, sigma, kernel="gaussian"):
    """Ridge regression over all circular shifts of ``x`` solved with an explicit kernel matrix.

    Returns ``(alpha, f)`` where ``alpha = (K + lam I)^-1 y`` and
    ``f[i] = sum_j alpha_j k(shift_i(z), shift_j(x))``, both shaped like ``x``.
    """
    X, Z = all_shifts(x), all_shifts(z)
    if kernel == "linear":
        K, Kzx = X @ X.T, Z @ X.T
    else:
        K, Kzx = gaussian_gram(X, X, sigma), gaussian_gram(Z, X, sigma)
    alpha = np.linalg.solve(K + lam * np.eye(len(K)), y.ravel())
    return alpha.reshape(x.shape), (Kzx @ alpha).reshape(x.shape)


def primal_ridge_response(x, z, y, lam):
    """Linear ridge regression in weight space: ``w = (X^T X + lam I)^-1 X^T y``."""
    X, Z = all_shifts(x), all_shifts(z)
    w = np.linalg.solve(X.T @ X + lam * np.eye(X.shape[1]), X.T @ y.ravel())
    return (Z @ w).reshape(x.shape)


def project_loop(points, valid, intensity, r, grid):
    """Per-point z-buffer binning with an explicit loop."""
    color = np.zeros((grid, grid))
    depth = np.zeros((grid, grid))
    best = {}
    H, W = valid.shape
    c = grid // 2
    for v in range(H):
        for u in range(W):
            if not valid[v, u]:
                continue
            x, y, z = points[v, u]
            col = int(np.floor(x / r + 0.5)) + c
            row = int(np.floor(y / r + 0.5)) + c
            if not (0 <= col < grid and 0 <= row < grid):
                continue
            if (row, col) not in best or z < best[(row, col)]:
                best[(row, col)] = z
                color[row, col] = intensity[v, u]
                depth[row, col] = z
    mask = np.zeros((grid, grid), dtype=bool)
    for (row, col) in best:
        mask[row, col] = True
    return color, depth, mask


def sequential_scan(nr, nc_valid_dots, thr_overlap, thr_mode, max_seeds):
    """Pixel-by-pixel first-fit Mode assignment, seed normal as representative.

    ``nr`` is ``(N, 3)``; ``nc_valid_dots`` the per-pixel overlap dot products.
    Returns the label of every pixel (-1 = not in pool or unassigned).
    """
    seeds = []
    labels = np.full(len(nr), -1)
    for p in range(len(nr)):
        if nc_valid_dots[p] < thr_overlap:
            continue
        for k, s in enumerate(seeds):
            if nr[p] @ s >= thr_mode:
                labels[p] = k
                break
        else:
            if len(seeds) < max_seeds:
                seeds.append(nr[p])
                labels[p] = len(seeds) - 1
    return labels


def ray_plane_depth(normal, offset, pose_R, pose_t, fx, fy, cx, cy, u, v):
    """z-depth where pixel ``(u, v)`` sees the plane ``n.p + d = 0`` (world frame)."""
    ray_c = np.array([(u - cx) / fx, (v - cy) / fy, 1.0])
    ray_w = pose_R @ ray_c
    s = -(normal @ pose_t + offset) / (normal @ ray_w)
    return s  # the ray has unit z in the camera frame, so the scale is the depth


def random_rotation(rng, max_angle):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0, max_angle)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K


def random_unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def perturb_normal(rng, n, angle):
    """Rotate unit ``n`` by exactly ``angle`` about a random axis orthogonal to it."""
    t = np.cross(n, random_unit(rng))
    t /= np.linalg.norm(t)
    return np.cos(angle) * n + np.sin(angle) * t


def kabsch_reference(src, dst):
    """Horn's quaternion method (independent of the SVD route)."""
    mu_s, mu_d = src.mean(0), dst.mean(0)
    S = (src - mu_s).T @ (dst - mu_d)
    Sxx, Sxy, Sxz = S[0]
    Syx, Syy, Syz = S[1]
    Szx, Szy, Szz = S[2]
    N = np.array([
        [Sxx + Syy + Szz, Syz - Szy, Szx - Sxz, Sxy - Syx],
        [Syz - Szy, Sxx - Syy - Szz, Sxy + Syx, Szx + Sxz],
        [Szx - Sxz, Sxy + Syx, -Sxx + Syy - Szz, Syz + Szy],
        [Sxy - Syx, Szx + Sxz, Syz + Szy, -Sxx - Syy + Szz]])
    w, V = np.linalg.eigh(N)
    q0, qx, qy, qz = V[:, -1]
    R = np.array([
        [q0*q0 + qx*qx - qy*qy - qz*qz, 2*(qx*qy - q0*qz), 2*(qx*qz + q0*qy)],
        [2*(qy*qx + q0*qz), q0*q0 - qx*qx + qy*qy - qz*qz, 2*(qy*qz - q0*qx)],
        [2*(qz*qx - q0*qy), 2*(qz*qy + q0*qx), q0*q0 - qx*qx - qy*qy + qz*qz]])
    return R, mu_d - R @ mu_s
