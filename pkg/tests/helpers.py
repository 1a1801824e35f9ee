"""Independent oracle implementations shared by the test modules.

Everything here deliberately avoids the production code paths it is used
to check: the transformed process is evaluated by a direct double sum
with adaptive quadrature, the Brownian supremum law comes from the
reflection (inclusion-exclusion) series, and leave-one-out predictions
come from literal refits on reduced datasets.
"""

import math

import numpy as np
from scipy.integrate import quad_vec
from scipy.special import ndtr

from indirgof.estimation import Dataset, estimate_coeffs, estimate_density
from indirgof.khmaladze import gamma_closed_form_gaussian
from indirgof.nulls import score_h


def reflection_sup_cdf(x, terms=40):
    """P(sup |B| <= x) by the reflection series (independent of the
    exponential series used in production)."""
    total = 0.0
    for k in range(-terms, terms + 1):
        total += (-1) ** k * (ndtr((2 * k + 1) * x) - ndtr((2 * k - 1) * x))
    return float(total)


def xi_oracle(z, null, t_points, sides):
    """Direct double-sum transformed process with quadrature-built G0.

    G0 is accumulated by adaptive quadrature over segments between the
    sorted points where it is needed, starting from the 1e-12 quantile.
    Only the Gaussian null is supported (its closed-form tail matrix is
    itself validated against quadrature elsewhere).
    """
    z = np.sort(np.asarray(z, dtype=float))
    n = len(z)
    t0 = float(z[int(np.ceil(0.99 * n)) - 1])

    def integrand(y):
        h = score_h(null, y)
        return np.linalg.solve(gamma_closed_form_gaussian(y), h) * float(null.pdf(y))

    needed = np.unique(np.concatenate([z[z <= t0], np.asarray(t_points, float)]))
    start = float(null.quantile(1e-12))
    table = {}
    acc = np.zeros(3)
    prev = start
    for u in needed:
        if u <= start:
            table[float(u)] = np.zeros(3)
            continue
        seg, _ = quad_vec(integrand, prev, float(u), epsabs=1e-11, epsrel=1e-11)
        acc = acc + seg
        table[float(u)] = acc.copy()
        prev = float(u)

    h_at_z = score_h(null, z)
    out = []
    for t, side in zip(t_points, sides):
        idx = int(np.searchsorted(z, t, side=side))
        comp = 0.0
        for j in range(n):
            u = float(min(t, z[j]))
            g0 = table[u] if u in table else np.zeros(3)
            comp += float(g0 @ h_at_z[j])
        out.append(math.sqrt(n) * (idx / n - comp / n))
    return np.array(out), t0


def xi_production_at(z, null, gamma, scan_grid, t_points, sides):
    """Production-path process values at chosen points and sides."""
    from indirgof.khmaladze import build_scan

    z = np.sort(np.asarray(z, dtype=float))
    n = len(z)
    t0 = float(z[int(np.ceil(0.99 * n)) - 1])
    scan = build_scan(null, gamma, t0, scan_grid)
    h = score_h(null, z)
    g_at = scan(np.minimum(z, t0))
    pref_dot = np.concatenate([[0.0], np.cumsum(np.einsum("ij,ij->i", g_at, h))])
    pref_h = np.vstack([np.zeros(3), np.cumsum(h, axis=0)])
    total_h = pref_h[-1]
    out = []
    for t, side in zip(t_points, sides):
        idx = int(np.searchsorted(z, t, side=side))
        comp = (pref_dot[idx] + scan(np.array([t]))[0] @ (total_h - pref_h[idx])) / n
        out.append(math.sqrt(n) * (idx / n - comp))
    return np.array(out), t0


def oracle_points_for(z, t0, extra=23):
    """Comparison points: all jumps twice (left/right) plus a spread."""
    z = np.sort(np.asarray(z, dtype=float))
    jumps = np.unique(z[z <= t0])
    spread = np.linspace(t0 - 6.0, t0, extra)
    pts = np.concatenate([jumps, jumps, spread])
    sides = ["left"] * len(jumps) + ["right"] * (len(jumps) + extra)
    return pts, sides


def refit_loo_prediction(data, lattice, floor, j):
    """Leave-one-out prediction at x_j by a literal refit without row j."""
    keep = np.arange(data.n) != j
    reduced = Dataset(x=data.x[keep], y=data.y[keep])
    density = estimate_density(reduced, lattice, floor)
    rhat = estimate_coeffs(reduced, density, lattice)
    ph = lattice.phases(data.x[j][None, :])
    wc = lattice.weights * rhat
    return float((np.cos(ph) @ wc.real - np.sin(ph) @ wc.imag)[0])


def complex_weight_sum(lattice, x):
    """Complex-exponential evaluation of the smoothing weight function."""
    ph = lattice.phases(np.atleast_2d(np.asarray(x, dtype=float)))
    vals = (np.exp(1j * ph) * lattice.weights).sum(axis=1)
    return vals


def brute_lattice_count(m, radius, span):
    """Count lattice points by scanning the integer box [-span, span]^m."""
    axes = [np.arange(-span, span + 1)] * m
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
    return int(np.sum(np.sum(grid * grid, axis=1) <= radius * radius))


def truncated_laplace_pdf(w, scale=0.1):
    """Normalized Laplace(1/2, scale) density on [0, 1], extended periodically.

    Centred at 1/2, the two clipped tails each hold mass exp(-1/(2*scale))/2,
    so the kept mass is 1 - exp(-1/(2*scale)).
    """
    w = np.mod(np.asarray(w, dtype=float), 1.0)
    kept = 1.0 - math.exp(-0.5 / scale)
    return np.exp(-np.abs(w - 0.5) / scale) / (2.0 * scale) / kept
