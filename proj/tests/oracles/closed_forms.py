"""50-digit reference values frozen into the C++ tests (mpmath, independent of the library)."""
from mpmath import mp, mpf, exp, expm1, quad, diff

mp.dps = 50
r, b, sigma, T = mpf("0.02"), mpf("0.08"), mpf("0.2"), mpf(1)
rho = ((b - r) / sigma) ** 2


def f_case1(alpha, tau):
    return (exp(rho * tau) - 1 + alpha * exp(r * tau)) / alpha


def gamma_of(f, tau):
    return (f - exp((r - rho) * tau)) / (1 - exp(-rho * tau))


def naive_mean(alpha, x0=1):
    return x0 * exp(r * T) * exp((1 / alpha) * (rho / (rho - r)) * (exp((rho - r) * T) - 1))


def c_na1(alpha, t):
    return (b - r) / (alpha * sigma**2) * exp((rho - r) * (T - t))


def c_na2(k, t):
    tau = T - t
    return (b - r) / sigma**2 * expm1((k - r) * tau) / (-expm1(-rho * tau))


def c_re1(alpha, t):
    tau = T - t
    psi = (r + (rho - r) * exp(rho * tau)) / (alpha * exp(r * tau) + exp(rho * tau) - 1)
    return psi / (b - r)


def phi(k, t):
    tau = T - t
    return expm1(rho * tau) / (exp(k * tau) - exp(r * tau))


if __name__ == "__main__":
    f = f_case1(1, T)
    g = gamma_of(f, T)
    print("rho", rho)
    print("f(0,T) case1 alpha=1", f)
    print("gamma(0) case1", g)
    print("precommitted portfolio at anchor", -(b - r) / sigma**2 * (1 - g * exp(-r * T)))
    print("c_na case1 t=0", c_na1(1, 0))
    print("c_na case2 k=0.05 t=0", c_na2(mpf("0.05"), 0))
    print("c_re case1 t=0", c_re1(1, 0))
    print("phi k=0.05 t=0", phi(mpf("0.05"), 0))
    print("naive mean alpha=1", naive_mean(1))
    print("frontier V at f", (f - exp(r * T)) ** 2 / expm1(rho * T))
    for a in ["0.25", "0.5", "1", "2", "4"]:
        a = mpf(a)
        print("alpha", a, "naive", naive_mean(a), "precommitted", f_case1(a, T))
    # gamma for case 2 (f = e^{k tau}) at s = 0 and its limit at T
    k = mpf("0.05")
    print("gamma(0) case2 k=0.05", gamma_of(exp(k * T), T))
    print("gamma(T-) case2 limit", (k - r + rho) / rho)
    print("gamma(T-) case1 limit", (diff(lambda tau: f_case1(1, tau), 0) - (r - rho)) / rho)
