"""Independent reference computations used as test oracles.

Written as plain loops over pixels so they share no code path with the
vectorized implementations under test.
"""

import math

import numpy as np


def central_gradient(img):
    """Central differences inside, one-sided at the border, written per pixel."""
    h, w = img.shape
    gx = np.zeros((h, w))
    gy = np.zeros((h, w))
    for r in range(h):
        for c in range(w):
            if c == 0:
                gx[r, c] = img[r, 1] - img[r, 0]
            elif c == w - 1:
                gx[r, c] = img[r, w - 1] - img[r, w - 2]
            else:
                gx[r, c] = 0.5 * (img[r, c + 1] - img[r, c - 1])
            if r == 0:
                gy[r, c] = img[1, c] - img[0, c]
            elif r == h - 1:
                gy[r, c] = img[h - 1, c] - img[h - 2, c]
            else:
                gy[r, c] = 0.5 * (img[r + 1, c] - img[r - 1, c])
    return gx, gy


def _reflect_index(i, n):
    # half-sample symmetric: -1 -> 0, n -> n-1
    if i < 0:
        return -i - 1
    if i >= n:
        return 2 * n - i - 1
    return i


def laplacian5(img):
    h, w = img.shape
    out = np.zeros((h, w))
    for r in range(h):
        for c in range(w):
            s = -4.0 * img[r, c]
            for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                s += img[_reflect_index(r + dr, h), _reflect_index(c + dc, w)]
            out[r, c] = s
    return out


def gaussian_weights(sigma):
    radius = math.ceil(3 * sigma)
    raw = [math.exp(-0.5 * (x / sigma) ** 2) for x in range(-radius, radius + 1)]
    total = sum(raw)
    return [v / total for v in raw]


def blur_reflect(img, sigma):
    """Direct 2-D convolution with the separable Gaussian, reflected borders."""
    kern = gaussian_weights(sigma)
    radius = len(kern) // 2
    h, w = img.shape
    out = np.zeros((h, w))
    for r in range(h):
        for c in range(w):
            s = 0.0
            for a in range(-radius, radius + 1):
                rr = _reflect_index(r + a, h)
                for b in range(-radius, radius + 1):
                    cc = _reflect_index(c + b, w)
                    s += kern[a + radius] * kern[b + radius] * img[rr, cc]
            out[r, c] = s
    return out


def steady_temperature(S, hc, Ta, Ts, eps, sigma=5.670374419e-8):
    """Closed-form linearized balance without conduction."""
    lin = hc + 4 * eps * sigma * Ts**3
    return (S + hc * Ta + 4 * eps * sigma * Ts**4) / lin


def camera(T, eps, Ts, p1=1.0, p2=0.0):
    return p1 * (eps * T + (1 - eps) * Ts) + p2


def true_pair_label(rho_i, rho_j, eta_i, eta_j):
    """Ordinal claims a sound labeler is allowed to make about a pair.

    Returns the set of labels consistent with the ground truth.
    """
    ok = {"None"}
    if rho_i > rho_j:
        ok.add("A+")
    if rho_i < rho_j:
        ok.add("A-")
    if eta_i > eta_j:
        ok.add("S+")
    if eta_i < eta_j:
        ok.add("S-")
    return ok


def brute_si_mse(est, truth):
    """si-MSE from the normal equation written with Python floats."""
    e = [float(v) for v in np.ravel(est)]
    t = [float(v) for v in np.ravel(truth)]
    ee = math.fsum(a * a for a in e)
    alpha = math.fsum(a * b for a, b in zip(e, t)) / ee if ee > 0 else 0.0
    return math.fsum((alpha * a - b) ** 2 for a, b in zip(e, t)) / len(e)


def edge_loss_loops(albedo_gray, shading, labels):
    """Edge loss from per-pixel gradients; labels 1 = Albedo, 2 = Shading."""
    ax, ay = central_gradient(albedo_gray)
    sx, sy = central_gradient(shading)
    h, w = labels.shape
    total = 0.0
    for r in range(h):
        for c in range(w):
            if labels[r, c] == 2:
                total += ax[r, c] ** 2 + ay[r, c] ** 2
            elif labels[r, c] == 1:
                total += sx[r, c] ** 2 + sy[r, c] ** 2
    return total / (h * w)


def hinge_loops(albedo_gray, shading, pairs, margin, z_albedo, z_shading):
    """Ordinal hinge loss written case by case; ``pairs`` is [(i, j, symbol)]."""
    total = 0.0
    for (i, j, lab) in pairs:
        ds = (shading[i] - shading[j]) / z_shading
        da = (albedo_gray[i] - albedo_gray[j]) / z_albedo
        if lab == "S+":
            total += max(margin - ds, 0.0)
        elif lab == "S-":
            total += max(margin + ds, 0.0)
        elif lab == "A+":
            total += max(margin - da, 0.0)
        elif lab == "A-":
            total += max(margin + da, 0.0)
    return total / len(pairs) if pairs else 0.0
