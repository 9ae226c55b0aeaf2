"""Independent reference implementations used to pin expected values.

Everything here is scalar, loop-based and evaluated in mpmath at 40 digits.
None of it imports statrg.
"""

import mpmath as mp

mp.mp.dps = 40


def mpf_list(xs):
    return [mp.mpf(float(x)) for x in xs]


def power_spectrum(a, J):
    return [mp.mpf(j) ** (-2 * mp.mpf(a)) for j in range(1, J + 1)]


def N(t, lam):
    lam = mp.mpf(lam)
    return mp.fsum(tj / (tj + lam) for tj in t)


def rho(t, lam):
    return 1 / mp.sqrt(lam * N(t, lam))


def theta(t, lam):
    return mp.sqrt(mp.mpf(lam) / N(t, lam))


def bisect_increasing(f, target, lo, hi, iters=400):
    lo, hi = mp.mpf(lo), mp.mpf(hi)
    for _ in range(iters):
        mid = mp.sqrt(lo * hi)
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
    return mp.sqrt(lo * hi)


def invert_theta(t, target, nu=0, lo=1e-30, hi=1e6):
    return bisect_increasing(lambda s: theta(t, s) * s ** mp.mpf(nu), mp.mpf(target), lo, hi)


def log_factor(delta):
    return abs(mp.log(1 / mp.mpf(delta)))


def kappa_auto(delta, n0):
    return mp.sqrt(8 * log_factor(delta) / mp.mpf(n0))


def residual(name, alpha, t, n=1):
    alpha, t = mp.mpf(alpha), mp.mpf(t)
    if name == "tikhonov":
        return alpha / (t + alpha)
    if name == "iterated-tikhonov":
        return (alpha / (t + alpha)) ** n
    if name == "tsvd":
        return mp.mpf(0) if t >= alpha else mp.mpf(1)
    if name == "landweber":
        # step count taken from the double value of 1/alpha, as callers write e.g. alpha=1e-3 meaning 1000
        return (1 - t) ** int(1.0 / float(alpha))
    if name == "showalter":
        return mp.exp(-t / alpha)
    raise ValueError(name)


def filt(name, alpha, t, n=1):
    return (1 - residual(name, alpha, t, n)) / mp.mpf(t)


def reconstruct(t, x0, z, name, alpha, n=1):
    # x0 + g (z - t x0), coefficientwise
    return [x0j + filt(name, alpha, tj, n) * (zj - tj * x0j) for tj, x0j, zj in zip(t, x0, z)]


def data(t, x, delta, zeta):
    return [tj * xj + mp.mpf(delta) * zj for tj, xj, zj in zip(t, x, zeta)]


def misfit(t, x0, z, name, alpha, n=1):
    # ||s (A x_alpha - z)|| computed through the reconstruction
    alpha = mp.mpf(alpha)
    xa = reconstruct(t, x0, z, name, alpha, n)
    return mp.sqrt(mp.fsum((alpha / (tj + alpha) * (tj * xj - zj)) ** 2 for tj, xj, zj in zip(t, xa, z)))


def error(t, x, x0, z, name, alpha, n=1):
    xa = reconstruct(t, x0, z, name, alpha, n)
    return mp.sqrt(mp.fsum((a - b) ** 2 for a, b in zip(x, xa)))


def bias(t, x, x0, name, alpha, n=1):
    return mp.sqrt(mp.fsum((residual(name, alpha, tj, n) * (xj - x0j)) ** 2 for tj, xj, x0j in zip(t, x, x0)))


def scan_statistical(t, x, x0, zeta, delta, name, tau, eta, kappa, alpha0, q, k_max):
    """Evaluate both stopping tests at every grid point; return the first hit."""
    z = data(t, x, delta, zeta)
    table = []
    for k in range(k_max + 1):
        a = mp.mpf(alpha0) * mp.mpf(q) ** k
        reg = misfit(t, x0, z, name, a) <= tau * (1 + kappa) * delta * mp.sqrt(a * N(t, a))
        emg = theta(t, a) <= eta * (1 + kappa) * delta
        table.append((a, reg, emg))
    for k, (a, reg, emg) in enumerate(table):
        if reg:
            return a, "Regular", k + 1
        if emg:
            return a, "Emergency", k + 1
    return table[-1][0], "Exhausted", k_max + 1


def scan_deterministic(t, x, x0, zeta, delta, mu, name, tau, eta, alpha0, q, k_max):
    z = data(t, x, delta, zeta)
    grid = [mp.mpf(alpha0) * mp.mpf(q) ** k for k in range(k_max + 1)]
    dfun = lambda a: mp.mpf(delta) * a ** mp.mpf(mu)  # noqa: E731
    k_hat = min(k for k, a in enumerate(grid) if a <= eta * dfun(a))
    ok = [k for k in range(k_hat + 1) if misfit(t, x0, z, name, grid[k]) <= tau * dfun(grid[k])]
    if ok:
        return grid[ok[0]], "Regular", grid[k_hat]
    return grid[k_hat], "Emergency", grid[k_hat]


def argmin_error(t, x, x0, z, name, alphas):
    errs = [error(t, x, x0, z, name, a) for a in alphas]
    best = min(errs)
    # ties go to the largest alpha
    i = max(range(len(alphas)), key=lambda i: (errs[i] == best, alphas[i]))
    return alphas[i], best


def oracle_rhs_statistical(t, x, x0, name, alpha, delta):
    delta = mp.mpf(delta)
    return bias(t, x, x0, name, alpha) + delta * (1 + mp.sqrt(log_factor(delta))) / theta(t, alpha)


def kn_sides(t, v, name, c1, c2, alpha, n=1):
    alpha = mp.mpf(alpha)
    lhs = mp.fsum(vj ** 2 for tj, vj in zip(t, v) if tj <= alpha)
    rhs = mp.fsum((residual(name, alpha, tj, n) * vj) ** 2 for tj, vj in zip(t, v) if tj >= c2 * alpha)
    return lhs, c1 ** 2 * rhs


def rmse(t, x, x0, zetas, delta, name, alpha_of):
    """RMSE given a per-replicate selected alpha (callable on the data)."""
    sq = []
    for zeta in zetas:
        z = data(t, x, delta, zeta)
        a = alpha_of(z)
        sq.append(error(t, x, x0, z, name, a) ** 2)
    return mp.sqrt(mp.fsum(sq) / len(sq))
