"""Independent reference computations used by the tests."""

from fractions import Fraction

import mpmath


def auuc_brute_force(scores, w, y):
    """AUUC by explicit enumeration of prefixes, plain float arithmetic."""
    n = len(scores)
    order = sorted(range(n), key=lambda i: (-scores[i], i))
    gains = []
    for k in range(1, n + 1):
        top = order[:k]
        st = sc = 0.0
        nt = nc = 0
        for i in top:
            if w[i] == 1:
                st += y[i]
                nt += 1
            else:
                sc += y[i]
                nc += 1
        if nt == 0 or nc == 0:
            gains.append(0.0)
        else:
            gains.append((st / nt - sc / nc) * (k / n))
    # exact rational sum of the float gains, rounded once
    return gains, float(sum(Fraction(g) for g in gains)) / n


def auuc_exact(scores, w, y):
    """AUUC in exact rational arithmetic (outcomes converted exactly)."""
    n = len(scores)
    order = sorted(range(n), key=lambda i: (-scores[i], i))
    total = Fraction(0)
    for k in range(1, n + 1):
        top = order[:k]
        t = [Fraction(y[i]) for i in top if w[i] == 1]
        c = [Fraction(y[i]) for i in top if w[i] == 0]
        if t and c:
            total += (sum(t) / len(t) - sum(c) / len(c)) * Fraction(k, n)
    return total / n


def welch_p_mpmath(a, b, dps=50):
    """Two-sided Welch p-value with every step in mpmath at ``dps`` digits."""
    with mpmath.workdps(dps):
        a = [mpmath.mpf(v) for v in a]
        b = [mpmath.mpf(v) for v in b]
        na, nb = len(a), len(b)
        ma = mpmath.fsum(a) / na
        mb = mpmath.fsum(b) / nb
        va = mpmath.fsum((v - ma) ** 2 for v in a) / (na - 1)
        vb = mpmath.fsum((v - mb) ** 2 for v in b) / (nb - 1)
        qa, qb = va / na, vb / nb
        t = (ma - mb) / mpmath.sqrt(qa + qb)
        df = (qa + qb) ** 2 / (qa ** 2 / (na - 1) + qb ** 2 / (nb - 1))
        x = df / (df + t * t)
        p = mpmath.betainc(df / 2, mpmath.mpf(1) / 2, 0, x, regularized=True)
        return float(t), float(df), float(p)


def t_two_sided_mpmath(t, df, dps=50):
    with mpmath.workdps(dps):
        t = mpmath.mpf(t)
        df = mpmath.mpf(df)
        return float(mpmath.betainc(df / 2, mpmath.mpf(1) / 2, 0, df / (df + t * t), regularized=True))


def enumerate_mixture_variance(dist0, dist1, pi):
    """Variance of the pooled variable by direct enumeration of its support."""
    support = [(v, (1 - pi) * p) for v, p in dist0] + [(v, pi * p) for v, p in dist1]
    mean = mpmath.fsum(mpmath.mpf(v) * q for v, q in support)
    return float(mpmath.fsum(q * (mpmath.mpf(v) - mean) ** 2 for v, q in support))


def group_moments(dist):
    m = sum(p * v for v, p in dist)
    return m, sum(p * (v - m) ** 2 for v, p in dist)
