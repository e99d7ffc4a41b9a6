"""Independent reference values for the integration tests.

Re-derives the model from its formulas with numpy and mpmath (no code shared
with the crate) and writes tests/fixtures/oracle.json. Run from the crate
root:  python3 tests/oracle/generate.py
"""

import json
import os

import mpmath as mp
import numpy as np
from scipy.optimize import minimize_scalar

mp.mp.dps = 40
C0 = 299792458.0
EPS0 = 8.8541878128e-12


def panel(nrf, ne, f, kappa=1e-4, de_frac=0.2):
    lam = C0 / f
    de = de_frac * lam
    a, b = 0.73 * lam, 0.17 * lam
    k = 2 * np.pi / lam
    kx0 = np.sqrt(complex(k * k - (np.pi / a) ** 2))
    return dict(lam=lam, drf=lam, de=de, a=a, b=b, S=(ne - 1) * de + lam / 2, port=lam / 4,
                k=k, kx=complex(kx0.real, -abs(kx0.imag)), om=2 * np.pi * f, nrf=nrf, ne=ne, kappa=kappa, f=f)


# ---------- Green's functions (mpmath, high precision) ----------

def gmc_mp(p, q, k):
    p = [mp.mpf(x) for x in p]
    q = [mp.mpf(x) for x in q]
    k = mp.mpf(k)
    R = mp.sqrt(sum((a - b) ** 2 for a, b in zip(p, q)))
    dz = p[2] - q[2]
    t1 = (R**2 - dz**2) / R**2 - 1j * (R**2 - 3 * dz**2) / (R**3 * k)
    t2 = (R**2 - 3 * dz**2) / (R**4 * k**2)
    return t1 * t2 * mp.exp(-1j * k * R) / (4 * mp.pi * R)


def gsa_mp(P, xi, xn, zi, zn):
    a, b, k, S = (mp.mpf(P[x]) for x in ("a", "b", "k", "S"))
    kx = mp.sqrt(mp.mpc(k**2 - (mp.pi / a) ** 2))
    if mp.im(kx) > 0:
        kx = mp.conj(kx)
    xi, xn, zi, zn = (mp.mpf(v) for v in (xi, xn, zi, zn))
    pre = -kx * mp.sin(mp.pi * zn / a) * mp.sin(mp.pi * zi / a) / (a * b * k**2 * mp.sin(kx * S))
    return pre * (mp.cos(kx * (xi + xn - S)) + mp.cos(kx * (S - abs(xn - xi))))


def cplx(z):
    return [float(mp.re(z)), float(mp.im(z))]


# ---------- circuit (numpy) ----------

def gsa(P, xi, xn):
    a, b, k, kx, S = P["a"], P["b"], P["k"], P["kx"], P["S"]
    return -kx / (a * b * k * k * np.sin(kx * S)) * (np.cos(kx * (xi + xn - S)) + np.cos(kx * (S - abs(xn - xi))))


def gmc(p, q, k):
    d = p - q
    R = np.linalg.norm(d)
    dz = d[2]
    return ((R * R - dz * dz) / R**2 - 1j * (R * R - 3 * dz * dz) / (R**3 * k)) * (
        (R * R - 3 * dz * dz) / (R**4 * k * k)) * np.exp(-1j * k * R) / (4 * np.pi * R)


def positions(P):
    return np.array([[i * P["drf"], 0.0, n * P["de"]] for i in range(P["nrf"]) for n in range(P["ne"])])


def circuit(P):
    nrf, ne = P["nrf"], P["ne"]
    N = nrf * ne
    p = positions(P)
    xi = p[:, 2] + P["port"]
    Psa = np.zeros((N, nrf), complex)
    for n in range(N):
        Psa[n, n // ne] = 1j * P["om"] * gsa(P, 0.0, xi[n])
    W = np.zeros((N, N), complex)
    je = 1j * P["om"] * EPS0 * P["kappa"]
    for n in range(N):
        for m in range(N):
            if n == m:
                W[n, n] = je * gsa(P, xi[n], xi[n] + P["de"] / 100)
            else:
                v = 2 * gmc(p[n], p[m], P["k"])
                if n // ne == m // ne:
                    v += gsa(P, xi[n], xi[m])
                W[n, m] = je * v
    return Psa, W


def lor(phi):
    return 0.5 * (1j + np.exp(1j * np.asarray(phi)))


def beamformer(Psa, W, phases, order):
    D = np.diag(lor(phases))
    N = len(phases)
    if order == 0:
        inv = D @ np.linalg.inv(np.eye(N) + W @ D)
    else:
        inv = sum(D @ np.linalg.matrix_power(-W @ D, m) for m in range(order))
    return Psa.conj().T @ inv


# ---------- channel ----------

def h_mp(P, r, th, ph):
    out = []
    lam = mp.mpf(P["lam"])
    for i in range(P["nrf"]):
        for n in range(P["ne"]):
            X, Z = mp.mpf(i * P["drf"]), mp.mpf(n * P["de"])
            d = mp.sqrt(r**2 - 2 * r * (mp.sin(th) * mp.cos(ph) * X + mp.cos(th) * Z) + X**2 + Z**2)
            out.append(lam / (4 * mp.pi * d) * mp.exp(2j * mp.pi * d / lam))
    return out


def h_np(P, r, th, ph):
    X = np.repeat(np.arange(P["nrf"]) * P["drf"], P["ne"])
    Z = np.tile(np.arange(P["ne"]) * P["de"], P["nrf"])
    d = np.sqrt(r * r - 2 * r * (np.sin(th) * np.cos(ph) * X + np.cos(th) * Z) + X * X + Z * Z)
    return P["lam"] / (4 * np.pi * d) * np.exp(2j * np.pi * d / P["lam"])


def jac_mp(P, r, th, ph):
    """3 x N Jacobian by high-precision numerical differentiation."""
    r, th, ph = mp.mpf(r), mp.mpf(th), mp.mpf(ph)
    N = P["nrf"] * P["ne"]
    J = np.zeros((3, N), complex)
    for idx in range(N):
        f = [lambda x: h_mp(P, x, th, ph)[idx], lambda x: h_mp(P, r, x, ph)[idx], lambda x: h_mp(P, r, th, x)[idx]]
        for c, x0 in enumerate((r, th, ph)):
            J[c, idx] = complex(mp.diff(f[c], x0))
    return J


# ---------- design ----------

def rayleigh(G):
    K = G.conj().T @ G
    ev, V = np.linalg.eigh(K)
    y = V[:, -1]
    piv = int(np.argmax(np.abs(y)))
    y = y * (np.conj(y[piv]) / abs(y[piv]))
    u = G @ y
    return u * np.sqrt(ev[-1]) / np.linalg.norm(u), float(ev[-1])


def ls(Wrx, vt):
    return np.linalg.solve(Wrx @ Wrx.conj().T, Wrx @ vt)


FLOOR = -np.pi / 2 + 1e-6


def argmin_phase(f):
    grid = np.linspace(FLOOR, np.pi / 2, 4097)
    vals = np.array([f(p) for p in grid])
    best_p, best_v = grid[np.argmin(vals)], vals.min()
    for k in np.argsort(vals)[:6]:
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
        res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
        if res.fun < best_v:
            best_p, best_v = res.x, res.fun
    return best_p


def design_order2(P, G, iters):
    Psa, W = circuit(P)
    vt, s1 = rayleigh(G)
    N = P["nrf"] * P["ne"]
    ph = np.zeros(N)
    hist = []
    best = None
    for it in range(iters):
        Wrx = beamformer(Psa, W, ph, 2)
        v = ls(Wrx, vt)
        res = float(np.linalg.norm(vt - Wrx.conj().T @ v) ** 2)
        hist.append(res)
        if best is None or res < best[0]:
            best = (res, ph.copy(), v.copy())
        if it == iters - 1:
            break
        a = Psa @ v

        def total(phases):
            u = np.conj(lor(phases))
            c = u * a
            return float(np.linalg.norm(vt - u * (a - W.conj().T @ c)) ** 2)

        cur = total(ph)
        for n in range(N):
            u = np.conj(lor(ph))
            b = sum(np.conj(W[j, n]) * u[j] * a[j] for j in range(N) if j != n)
            m = np.conj(W[n, n])

            def f2(p):
                un = np.conj(lor(p))
                return abs(vt[n] - un * (1 - m * un) * a[n] + un * b) ** 2

            cand = argmin_phase(f2)
            trial = ph.copy()
            trial[n] = cand
            t = total(trial)
            if t <= cur:
                ph, cur = trial, t
    return best, hist, s1, vt


def main():
    out = {}
    # Green's functions at 28 GHz
    P = panel(4, 32, 28e9)
    pts = [((0.0, 0.0, 0.0), (0.0, 0.0, 0.3 * P["lam"])),
           ((0.0, 0.0, 0.0), (P["lam"], 0.0, 0.2 * P["lam"])),
           ((0.001, 0.0, 0.002), (0.004, 0.0, 0.0105))]
    out["green_free_space"] = [dict(p=list(p), q=list(q), k0=P["k"], value=cplx(gmc_mp(p, q, P["k"]))) for p, q in pts]
    a = P["a"]
    gs = [(P["port"], P["port"] + 3 * P["de"]), (0.0, P["port"] + 10 * P["de"]), (0.002, 0.002 + P["de"] / 100)]
    out["green_waveguide"] = dict(freq=28e9, n_e=32, samples=[
        dict(xi=x1, xn=x2, value=cplx(gsa_mp(P, x1, x2, a / 2, a / 2))) for x1, x2 in gs])

    # circuit entries, 2 x 8 at 28 GHz
    P = panel(2, 8, 28e9)
    Psa, W = circuit(P)
    out["circuit"] = dict(n_rf=2, n_e=8, freq=28e9,
                          propagation=[dict(n=n, i=n // 8, value=[Psa[n, n // 8].real, Psa[n, n // 8].imag]) for n in (0, 5, 11)],
                          coupling=[dict(n=n, m=m, value=[W[n, m].real, W[n, m].imag]) for n, m in ((0, 0), (0, 1), (3, 7), (2, 12), (9, 9))])
    ph = np.linspace(-1.2, 1.4, 16)
    exact = beamformer(Psa, W, ph, 0)
    Dinv_exact = np.diag(lor(ph)) @ np.linalg.inv(np.eye(16) + W @ np.diag(lor(ph)))
    errs = []
    for k in range(1, 5):
        approx = sum(np.diag(lor(ph)) @ np.linalg.matrix_power(-W @ np.diag(lor(ph)), m) for m in range(k))
        errs.append(float(np.linalg.norm(Dinv_exact - approx) ** 2))
    out["approx_error"] = dict(phases=ph.tolist(), errors=errs,
                               exact_bf_00=[exact[0, 0].real, exact[0, 0].imag],
                               exact_bf_1_13=[exact[1, 13].real, exact[1, 13].imag])

    # channel + Jacobian
    chans = []
    for (r, thd, phd) in ((5.0, 30.0, 90.0), (7.3, 50.0, 40.0), (1.7, 30.0, 150.0)):
        th, phr = np.radians(thd), np.radians(phd)
        h = h_mp(P, mp.mpf(r), mp.mpf(th), mp.mpf(phr))
        J = jac_mp(P, r, th, phr)
        chans.append(dict(r=r, theta_deg=thd, phi_deg=phd,
                          h=[cplx(x) for x in h],
                          jac=[[[J[c, n].real, J[c, n].imag] for n in range(16)] for c in range(3)]))
    out["channel"] = dict(n_rf=2, n_e=8, freq=28e9, cases=chans)

    # Rayleigh + LS + FIM on 2 x 8 at (5 m, 30 deg, 90 deg)
    J = np.array([[complex(*z) for z in row] for row in chans[0]["jac"]])
    G = J.conj().T
    A = G @ G.conj().T
    lam_max = float(np.linalg.eigvalsh(A)[-1])
    vt, s1 = rayleigh(G)
    ph0 = np.zeros(16)
    W1 = beamformer(Psa, W, ph0, 1)
    v = ls(W1, vt)
    T, Pmax = 200, 10 ** (-12 / 10) * 1e-3
    sigma2 = 10 ** ((-174 + 10 * np.log10(150e3)) / 10) * 1e-3
    Wx = beamformer(Psa, W, ph0, 0)
    vtil = Wx.conj().T @ v
    alpha = np.array([vtil.conj() @ G[:, i] for i in range(3)])
    fim = 2 * T * Pmax / (sigma2 * np.linalg.norm(vtil) ** 2) * np.real(np.outer(alpha, alpha.conj()))
    sub = fim[np.ix_([0, 2], [0, 2])]
    out["design_2x8"] = dict(lambda_max=lam_max, sigma1=s1,
                             vtilde_opt=[[z.real, z.imag] for z in vt],
                             v_order1_zero_phase=[[z.real, z.imag] for z in v],
                             fim_exact_zero_phase=fim.tolist(),
                             peb_r_phi=float(np.sqrt(np.trace(np.linalg.inv(sub)))))

    # short order-2 design run with a fixed budget
    best, hist, s1, _ = design_order2(P, G, 4)
    out["design_order2_2x8"] = dict(max_iters=4, residual_history=hist, residual=best[0],
                                    phases=best[1].tolist(), v=[[z.real, z.imag] for z in best[2]])

    path = os.path.join(os.path.dirname(__file__), "..", "fixtures", "oracle.json")
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(out, fh, indent=1)
        fh.write("\n")
    print("wrote", os.path.normpath(path))


if __name__ == "__main__":
    main()
