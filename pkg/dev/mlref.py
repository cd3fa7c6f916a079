"""High-precision Mittag-Leffler oracle (dev only, never shipped).

E_{alpha,beta}(-x) for x >= 0 via adaptive-precision mpmath series when the
cancellation scale xi = x**(1/alpha) is moderate, and via the pole pair +
optimally truncated power asymptotic when xi is large (error ~ e**-xi).
"""

import math

import mpmath as mp


def ml_neg(alpha: float, x: float, beta: float = 1.0) -> float:
    assert x >= 0.0
    if x == 0.0:
        return float(1.0 / mp.gamma(beta))
    if alpha == 1.0 and beta == 1.0:
        return math.exp(-x) if x < 700 else 0.0
    xi = x ** (1.0 / alpha)
    if xi <= 60.0:
        dps = 40 + int(0.5 * xi)
        with mp.workdps(dps):
            s = mp.mpf(0)
            term_scale = mp.mpf(0)
            xm = mp.mpf(x)
            am = mp.mpf(alpha)  # keep Gamma argument in mpf: double a*k poisons cancellation
            bm = mp.mpf(beta)
            k = 0
            p = mp.mpf(1)
            while True:
                g = mp.gamma(am * k + bm)
                t = p / g
                s += t
                term_scale = max(term_scale, abs(t))
                if k > 5 and abs(t) < mp.mpf(10) ** (-(dps + 5)) * max(term_scale, mp.mpf(1)):
                    break
                p *= -xm
                k += 1
                if k > 100000:
                    raise RuntimeError("series did not terminate")
            return float(s)
    # large xi: pole pair (alpha > 1) + asymptotic power series
    total = 0.0
    if alpha > 1.0:
        z = complex(xi * math.cos(math.pi / alpha), xi * math.sin(math.pi / alpha))
        w = z ** (1.0 - beta) * cexp(z)
        total += (2.0 / alpha) * w.real
    # Truncate at the argmin of the smooth term envelope x^-m Gamma(a m + 1 - b);
    # raw |t_m| is non-monotone (sin factor near Gamma poles) so "first increase"
    # stops far too early when alpha is near a rational.
    with mp.workdps(40):
        am, bm, xm = mp.mpf(alpha), mp.mpf(beta), mp.mpf(x)
        env_prev = None
        m_opt = 1
        for m in range(1, 2000):
            env = -m * mp.log(xm) + mp.loggamma(am * m + 1 - bm)
            if env_prev is not None and env > env_prev:
                break
            env_prev = env
            m_opt = m
        acc = mp.mpf(0)
        for m in range(1, m_opt + 1):
            g = mp.rgamma(bm - am * m)
            acc += (-1) ** (m + 1) * xm ** (-m) * g
        return total + float(acc)


def cexp(z: complex) -> complex:
    return complex(math.exp(z.real) * math.cos(z.imag), math.exp(z.real) * math.sin(z.imag))
