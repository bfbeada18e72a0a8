"""One-time generator for the bundled FCIDUMP test assets.

Computes STO-3G integrals for hydrogen-only molecules (closed-form s-type
Gaussian integrals), runs a restricted Hartree-Fock to get canonical MOs,
and writes the MO-basis integrals in FCIDUMP format. Run from the repo
root:

    python3 tools/gen_fcidump.py

The emitted files live in src/vqenoise/data/. FCI energies are never taken
from here; the test suite recomputes them from the files themselves.
"""

import math
import os

import numpy as np

ANGSTROM_TO_BOHR = 1.8897259886

# STO-3G hydrogen 1s: (exponent, contraction coefficient) per primitive
STO3G_H = [
    (3.42525091, 0.15432897),
    (0.62391373, 0.53532814),
    (0.16885540, 0.44463454),
]


def boys_f0(t):
    if t < 1e-12:
        return 1.0 - t / 3.0
    st = math.sqrt(t)
    return 0.5 * math.sqrt(math.pi / t) * math.erf(st)


def primitive_norm(alpha):
    return (2.0 * alpha / math.pi) ** 0.75


def build_integrals(centers):
    """AO-basis S, T(kinetic), V(nuclear), ERI for one 1s STO-3G per center."""
    n = len(centers)
    prims = []
    for c in centers:
        prims.append([(a, d * primitive_norm(a)) for a, d in STO3G_H])

    S = np.zeros((n, n))
    T = np.zeros((n, n))
    V = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            A, B = centers[i], centers[j]
            rab2 = float(np.dot(A - B, A - B))
            sij = tij = vij = 0.0
            for a, da in prims[i]:
                for b, db in prims[j]:
                    p = a + b
                    mu = a * b / p
                    pref = da * db * math.exp(-mu * rab2)
                    s = pref * (math.pi / p) ** 1.5
                    sij += s
                    tij += s * mu * (3.0 - 2.0 * mu * rab2)
                    P = (a * A + b * B) / p
                    for C in centers:
                        rpc2 = float(np.dot(P - C, P - C))
                        vij -= pref * (2.0 * math.pi / p) * boys_f0(p * rpc2)
            S[i, j] = sij
            T[i, j] = tij
            V[i, j] = vij

    eri = np.zeros((n, n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    A, B, C, D = centers[i], centers[j], centers[k], centers[l]
                    rab2 = float(np.dot(A - B, A - B))
                    rcd2 = float(np.dot(C - D, C - D))
                    val = 0.0
                    for a, da in prims[i]:
                        for b, db in prims[j]:
                            p = a + b
                            P = (a * A + b * B) / p
                            eab = math.exp(-a * b / p * rab2)
                            for c, dc in prims[k]:
                                for d, dd in prims[l]:
                                    q = c + d
                                    Q = (c * C + d * D) / q
                                    ecd = math.exp(-c * d / q * rcd2)
                                    rpq2 = float(np.dot(P - Q, P - Q))
                                    val += (
                                        da * db * dc * dd * eab * ecd
                                        * 2.0 * math.pi ** 2.5
                                        / (p * q * math.sqrt(p + q))
                                        * boys_f0(p * q / (p + q) * rpq2)
                                    )
                    eri[i, j, k, l] = val
    return S, T, V, eri


def nuclear_repulsion(centers):
    e = 0.0
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            e += 1.0 / float(np.linalg.norm(centers[i] - centers[j]))
    return e


def run_rhf(S, Hcore, eri, n_electrons, max_iter=200, conv=1e-12):
    """Roothaan SCF with DIIS; returns (E_elec, MO coefficients)."""
    n = S.shape[0]
    s_val, s_vec = np.linalg.eigh(S)
    X = s_vec @ np.diag(s_val ** -0.5) @ s_vec.T

    nocc = n_electrons // 2
    F = Hcore.copy()
    D = np.zeros((n, n))
    diis_f, diis_e = [], []
    e_old = 0.0
    for it in range(max_iter):
        Fp = X.T @ F @ X
        _, Cp = np.linalg.eigh(Fp)
        C = X @ Cp
        Cocc = C[:, :nocc]
        D = 2.0 * Cocc @ Cocc.T
        J = np.einsum("pqrs,rs->pq", eri, D)
        K = np.einsum("prqs,rs->pq", eri, D)
        F = Hcore + J - 0.5 * K
        e_elec = 0.5 * np.sum(D * (Hcore + F))

        err = F @ D @ S - S @ D @ F
        diis_f.append(F.copy())
        diis_e.append(err.copy())
        if len(diis_f) > 8:
            diis_f.pop(0)
            diis_e.pop(0)
        if len(diis_f) > 1:
            m = len(diis_f)
            B = -np.ones((m + 1, m + 1))
            B[m, m] = 0.0
            for a in range(m):
                for b in range(m):
                    B[a, b] = np.sum(diis_e[a] * diis_e[b])
            rhs = np.zeros(m + 1)
            rhs[m] = -1.0
            try:
                coef = np.linalg.solve(B, rhs)[:m]
                F = sum(c * f for c, f in zip(coef, diis_f))
            except np.linalg.LinAlgError:
                pass

        if abs(e_elec - e_old) < conv and np.max(np.abs(err)) < 1e-9:
            break
        e_old = e_elec

    # final canonical orbitals from the converged Fock matrix
    Fp = X.T @ F @ X
    _, Cp = np.linalg.eigh(Fp)
    C = X @ Cp
    return e_elec, C


def write_fcidump(path, h_mo, g_mo, core, n_electrons):
    n = h_mo.shape[0]
    lines = []
    lines.append(f" &FCI NORB={n},NELEC={n_electrons},MS2=0,")
    lines.append("  ORBSYM=" + "1," * n)
    lines.append("  ISYM=1,")
    lines.append(" &END")

    def emit(v, p, q, r, s):
        lines.append(f" {v: .16E} {p:4d} {q:4d} {r:4d} {s:4d}")

    for p in range(n):
        for q in range(p + 1):
            for r in range(p + 1):
                smax = q if r == p else r
                for s in range(smax + 1):
                    v = g_mo[p, q, r, s]
                    if abs(v) > 1e-14:
                        emit(v, p + 1, q + 1, r + 1, s + 1)
    for p in range(n):
        for q in range(p + 1):
            v = h_mo[p, q]
            if abs(v) > 1e-14:
                emit(v, p + 1, q + 1, 0, 0)
    emit(core, 0, 0, 0, 0)
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def fci_energy_check(h_mo, g_mo, core, n_electrons):
    """Brute-force FCI over all determinants (independent of the package)."""
    n = h_mo.shape[0]
    n_so = 2 * n
    dim = 1 << n_so

    def apply_a(dagger, so, state_index):
        occ = (state_index >> so) & 1
        if dagger == bool(occ):
            return None
        sign = (-1) ** bin(state_index & ((1 << so) - 1)).count("1")
        return sign, state_index ^ (1 << so)

    H = np.zeros((dim, dim))
    # one-body: h_pq sum over spins (spatial p -> spin-orbitals 2p, 2p+1)
    for p in range(n):
        for q in range(n):
            if abs(h_mo[p, q]) < 1e-14:
                continue
            for sp in (0, 1):
                for j in range(dim):
                    r1 = apply_a(False, 2 * q + sp, j)
                    if r1 is None:
                        continue
                    s1, j1 = r1
                    r2 = apply_a(True, 2 * p + sp, j1)
                    if r2 is None:
                        continue
                    s2, j2 = r2
                    H[j2, j] += h_mo[p, q] * s1 * s2
    # two-body: 1/2 sum_{pqrs,st} (pq|rs) a+_ps a+_rt a_st a_qs
    for p in range(n):
        for q in range(n):
            for r in range(n):
                for s in range(n):
                    v = g_mo[p, q, r, s]
                    if abs(v) < 1e-14:
                        continue
                    for sp in (0, 1):
                        for tp in (0, 1):
                            for j in range(dim):
                                acc_sign = 1.0
                                jj = j
                                ok = True
                                for dag, so in (
                                    (False, 2 * q + sp),
                                    (False, 2 * s + tp),
                                    (True, 2 * r + tp),
                                    (True, 2 * p + sp),
                                ):
                                    res = apply_a(dag, so, jj)
                                    if res is None:
                                        ok = False
                                        break
                                    sgn, jj = res
                                    acc_sign *= sgn
                                if ok:
                                    H[jj, j] += 0.5 * v * acc_sign
    evals = np.linalg.eigvalsh(H)
    # restrict to the n_electrons sector for the reported FCI number
    sector = [
        j for j in range(dim) if bin(j).count("1") == n_electrons
    ]
    Hs = H[np.ix_(sector, sector)]
    e_sector = np.linalg.eigvalsh(Hs)[0]
    return evals[0] + core, e_sector + core


def generate(name, centers_bohr, n_electrons, out_dir, check_fci=True):
    centers = [np.asarray(c, dtype=float) for c in centers_bohr]
    S, T, V, eri = build_integrals(centers)
    core = nuclear_repulsion(centers)
    Hcore = T + V
    e_elec, C = run_rhf(S, Hcore, eri, n_electrons)
    h_mo = C.T @ Hcore @ C
    # chemist order: g[p,q,r,s] = (pq|rs); AO eri is already (ij|kl)
    g_mo = np.einsum("pi,qj,rk,sl,pqrs->ijkl", C, C, C, C, eri, optimize=True)
    path = os.path.join(out_dir, f"{name}.fcidump")
    write_fcidump(path, h_mo, g_mo, core, n_electrons)
    print(f"{name}: E_RHF = {e_elec + core:.10f} Ha (core {core:.10f})")
    if check_fci:
        e_full, e_sector = fci_energy_check(h_mo, g_mo, core, n_electrons)
        print(f"{name}: FCI full-Fock {e_full:.10f}  N-sector {e_sector:.10f}")
    return path


def main():
    out = os.path.join(os.path.dirname(__file__), "..", "src", "vqenoise", "data")
    out = os.path.abspath(out)
    os.makedirs(out, exist_ok=True)

    def h2(r_angstrom):
        r = r_angstrom * ANGSTROM_TO_BOHR
        return [(0.0, 0.0, 0.0), (0.0, 0.0, r)]

    def h4(spacing_angstrom):
        d = spacing_angstrom * ANGSTROM_TO_BOHR
        return [(0.0, 0.0, i * d) for i in range(4)]

    generate("h2_0.7414", h2(0.7414), 2, out)
    generate("h2_1.0", h2(1.0), 2, out)
    generate("h4_1.0", h4(1.0), 4, out)
    generate("h4_3.0", h4(3.0), 4, out)


if __name__ == "__main__":
    main()
