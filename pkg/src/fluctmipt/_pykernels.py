"""Pure numpy kernels; drop-in replacement for the compiled ``_core`` module."""

import numpy as np


def apply_gate(psi, i00, i11, i01, i10, c):
    psi[i00] *= c[0]
    psi[i11] *= c[1]
    a = psi[i01]
    b = psi[i10]
    psi[i01] = c[2] * a + c[3] * b
    psi[i10] = c[4] * a + c[5] * b


def prob_up(psi, states, site):
    up = (states >> site) & 1 == 1
    return float(np.sum(psi.real[up] ** 2 + psi.imag[up] ** 2))


def project(psi, states, site, up, scale):
    keep = ((states >> site) & 1) == (1 if up else 0)
    psi[keep] *= scale
    psi[~keep] = 0.0


def norm_sq(psi):
    return float(np.sum(psi.real**2 + psi.imag**2))


def _cost(pc, nu, omega, subtract, sizes, p, y, w, pt_off, node_p, node_y, node_off):
    G = len(sizes)
    fac = sizes ** (1.0 / nu)
    scl = sizes**omega
    nodes = [(node_p[node_off[g]:node_off[g + 1]], node_y[node_off[g]:node_off[g + 1]]) for g in range(G)]
    yc = np.array([np.interp(pc, *nodes[g]) if subtract else 0.0 for g in range(G)])
    total, count = 0.0, 0
    for g in range(G):
        sl = slice(pt_off[g], pt_off[g + 1])
        x = (p[sl] - pc) * fac[g]
        acc = np.zeros(x.shape)
        nover = np.zeros(x.shape, dtype=int)
        for h in range(G):
            if h == g:
                continue
            pp = pc + x / fac[h]
            np_h, ny_h = nodes[h]
            inside = (pp >= np_h[0]) & (pp <= np_h[-1])
            acc[inside] += (np.interp(pp[inside], np_h, ny_h) - yc[h]) * scl[h]
            nover += inside
        ok = nover > 0
        if not ok.any():
            continue
        Y = (y[sl][ok] - yc[g]) * scl[g]
        r = Y - acc[ok] / nover[ok]
        total += float(np.sum(r * r * w[sl][ok])) / scl[g] ** 2
        count += int(ok.sum())
    return total / count if count else np.nan


def collapse_cost_grid(pcs, nus, omega, subtract, sizes, p, y, w, pt_off, node_p, node_y, node_off):
    return np.array(
        [
            _cost(pc, nu, omega, subtract, sizes, p, y, w, pt_off, node_p, node_y, node_off)
            for pc, nu in zip(pcs, nus)
        ]
    )
