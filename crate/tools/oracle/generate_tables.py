"""Generate fermionic coefficient tables and amplitude guesses with pyscf.

Outputs (relative to the repository root):
  data/h2_sto3g_fermionic.json   H2 / STO-3G, canonical RHF orbitals, R = 0.30 .. 3.00 A
  data/lih_sto6g_fermionic.json  LiH / STO-6G, CISD natural orbitals, R = 0.90 .. 3.50 A
  data/h2_amplitudes.json        CCSD amplitudes at R = 0.75 A
  data/lih_amplitudes.json       CISD amplitudes (natural-orbital basis) at R = 1.60 A

Spin-orbital convention: index 2k is spatial orbital k spin-down (beta),
2k + 1 is spatial orbital k spin-up (alpha).

Ladder terms are written normal ordered: creation operators left of
annihilation operators, mode indices descending inside each block.
Two-body coefficients follow H = sum h_pq a+_p a_q + 1/2 sum h_pqrs a+_p a+_q a_r a_s
with h_pqrs = (ps|qr).

Usage: python3 tools/oracle/generate_tables.py [--out data]
"""

import argparse
import itertools
import json
import os

import numpy as np
import pyscf
from pyscf import ao2mo, cc, ci, fci, gto, scf

PRUNE = 1e-10


def spin_orbital_terms(h1, eri):
    """Return {descriptor: coeff} for the normal-ordered electronic Hamiltonian."""
    n = h1.shape[0]
    nso = 2 * n
    terms = {}

    def add(key, val):
        terms[key] = terms.get(key, 0.0) + val

    for p in range(nso):
        for q in range(nso):
            if p % 2 != q % 2:
                continue
            v = h1[p // 2, q // 2]
            if v != 0.0:
                add(((p, True), (q, False)), v)

    def h2(p, q, r, s):
        if p % 2 != s % 2 or q % 2 != r % 2:
            return 0.0
        return eri[p // 2, s // 2, q // 2, r // 2]

    # a+_p a+_q a_r a_s with p > q and r > s collects four index permutations.
    for p, q in itertools.combinations(reversed(range(nso)), 2):
        for r, s in itertools.combinations(reversed(range(nso)), 2):
            v = h2(p, q, r, s) - h2(q, p, r, s)
            if v != 0.0:
                add(((p, True), (q, True), (r, False), (s, False)), v)
    return terms


def descriptor(key):
    return " ".join(f"{m}^" if dag else f"{m}" for m, dag in key)


def sector_fci(h1, eri, nelec, e_nuc):
    n = h1.shape[0]
    e, _ = fci.direct_spin1.kernel(h1, eri, n, nelec)
    return e + e_nuc


def h2_geometry(r):
    mol = gto.M(atom=f"H 0 0 0; H 0 0 {r}", basis="sto-3g", unit="angstrom", verbose=0)
    mf = scf.RHF(mol).run()
    c = mf.mo_coeff
    h1 = c.T @ mf.get_hcore() @ c
    eri = ao2mo.restore(1, ao2mo.kernel(mol, c), c.shape[1])
    return mol, mf, h1, eri


def lih_geometry(r):
    mol = gto.M(atom=f"Li 0 0 0; H 0 0 {r}", basis="sto-6g", unit="angstrom", verbose=0)
    mf = scf.RHF(mol).run()
    myci = ci.CISD(mf).run()
    dm = myci.make_rdm1()
    occ, vecs = np.linalg.eigh(dm)
    order = np.argsort(-occ, kind="stable")
    occ = occ[order]
    vecs = vecs[:, order]
    # Fix the sign of each natural orbital so the table is reproducible.
    for k in range(vecs.shape[1]):
        j = np.argmax(np.abs(vecs[:, k]))
        if vecs[j, k] < 0:
            vecs[:, k] *= -1
    c = mf.mo_coeff @ vecs
    h1 = c.T @ mf.get_hcore() @ c
    eri = ao2mo.restore(1, ao2mo.kernel(mol, c), c.shape[1])
    return mol, mf, c, occ, h1, eri


def build_table(molecule, basis, radii, geometry_fn, provenance, reference, nelec):
    per_r = []
    for r in radii:
        out = geometry_fn(r)
        mol, h1, eri = out["mol"], out["h1"], out["eri"]
        terms = spin_orbital_terms(h1, eri)
        per_r.append(
            dict(
                r=r,
                e_nuc=mol.energy_nuc(),
                terms=terms,
                fci=sector_fci(h1, eri, nelec, mol.energy_nuc()),
                extra=out.get("extra", {}),
            )
        )
    keys = set()
    for g in per_r:
        keys.update(k for k, v in g["terms"].items() if abs(v) > PRUNE)
    keys = sorted(keys, key=lambda k: (len(k), [(-m, not d) for m, d in k]))
    geometries = []
    for g in per_r:
        geo = {
            "r_angstrom": round(g["r"], 10),
            "nuclear_repulsion": g["e_nuc"],
            "fci_energy": g["fci"],
            "terms": [{"op": descriptor(k), "coeff": float(g["terms"].get(k, 0.0))} for k in keys],
        }
        geo.update(g["extra"])
        geometries.append(geo)
    return {
        "molecule": molecule,
        "basis": basis,
        "mapping": "fermionic",
        "n_modes": 2 * per_r[0]["extra_norb"] if "extra_norb" in per_r[0] else None,
        "reference": reference,
        "provenance": provenance,
        "geometries": geometries,
    }


def h2_fn(r):
    mol, mf, h1, eri = h2_geometry(r)
    return {"mol": mol, "h1": h1, "eri": eri}


def lih_fn(r):
    mol, mf, c, occ, h1, eri = lih_geometry(r)
    return {
        "mol": mol,
        "h1": h1,
        "eri": eri,
        "extra": {"natural_occupations": [float(x) for x in occ]},
    }


def radii(lo, hi, step):
    n = int(round((hi - lo) / step))
    return [round(lo + k * step, 10) for k in range(n + 1)]


def ccsd_amplitudes_h2(r):
    mol, mf, h1, eri = h2_geometry(r)
    mycc = cc.CCSD(mf).run()
    return restricted_to_spin_amplitudes(mycc.t1, mycc.t2, mol.nelectron // 2, h1.shape[0], None)


def restricted_to_spin_amplitudes(t1, t2, nocc, nmo, active):
    """Map restricted t1[i,a] / t2[i,j,a,b] (i,a alpha; j,b beta) to spin-orbital generators.

    Generators are written a+_{v2} a+_{v1} a_{o1} a_{o2} with v2 > v1 and o1 < o2,
    single excitations as a+_v a_o. `active` optionally limits spatial orbitals.
    """
    occ = list(range(nocc))
    vir = list(range(nocc, nmo))
    if active is not None:
        occ = [i for i in occ if i in active]
        vir = [a for a in vir if a in active]
    so_occ = sorted(2 * i + s for i in occ for s in (0, 1))
    so_vir = sorted(2 * a + s for a in vir for s in (0, 1))

    def t1_so(o, v):
        if o % 2 != v % 2:
            return 0.0
        return t1[o // 2, v // 2 - nocc]

    def t2_so(o1, o2, v1, v2):
        # amplitude of a+_{v2} a+_{v1} a_{o1} a_{o2} in the spin-orbital cluster operator
        # 1/4 sum t_{ij}^{ab} a+_a a+_b a_j a_i
        def rt2(i, j, a, b):
            # spin-orbital t_{ij}^{ab} from the restricted amplitudes
            si, sj, sa, sb = i % 2, j % 2, a % 2, b % 2
            I, J, A, B = i // 2, j // 2, a // 2 - nocc, b // 2 - nocc
            if si + sj != sa + sb:
                return 0.0
            if si == sj:
                if sa != si:
                    return 0.0
                return t2[I, J, A, B] - t2[I, J, B, A]
            if si == sa:
                return t2[I, J, A, B] if si == 1 else t2[J, I, B, A]
            return -(t2[I, J, B, A] if si == 1 else t2[J, I, A, B])

        # a+_{v2} a+_{v1} a_{o1} a_{o2} = a+_a a+_b a_j a_i with a=v2, b=v1, j=o1, i=o2
        return rt2(o2, o1, v2, v1)

    out = []
    for o in so_occ:
        for v in so_vir:
            out.append({"operator": f"{v}^ {o}", "amplitude": float(t1_so(o, v))})
    for o1, o2 in itertools.combinations(so_occ, 2):
        for v1, v2 in itertools.combinations(so_vir, 2):
            out.append(
                {"operator": f"{v2}^ {v1}^ {o1} {o2}", "amplitude": float(t2_so(o1, o2, v1, v2))}
            )
    return out


def cisd_amplitudes_lih(r):
    mol, mf, c, occ, h1, eri = lih_geometry(r)
    # CISD in the natural-orbital basis; orbitals 0 and 1 remain the occupied pair.
    myci = ci.CISD(mf, mo_coeff=c, mo_occ=mf.mo_occ).run()
    c0, c1, c2 = myci.cisdvec_to_amplitudes(myci.ci)
    nocc = mol.nelectron // 2
    # Active space: spatial orbitals 1, 2, 3 (two electrons in three orbitals).
    return restricted_to_spin_amplitudes(c1 / c0, c2 / c0, nocc, c.shape[1], active={1, 2, 3})


def dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    h2 = build_table(
        "H2",
        "sto-3g",
        radii(0.3, 3.0, 0.1),
        h2_fn,
        {
            "generator": "tools/oracle/generate_tables.py",
            "package": f"pyscf {pyscf.__version__}",
            "orbitals": "canonical RHF",
            "fci_energy": "pyscf direct_spin1 FCI, 2 electrons",
        },
        "0011",
        2,
    )
    h2["n_modes"] = 4
    dump(h2, os.path.join(args.out, "h2_sto3g_fermionic.json"))

    lih = build_table(
        "LiH",
        "sto-6g",
        sorted(set(radii(0.9, 3.5, 0.1)) | {2.75}),
        lih_fn,
        {
            "generator": "tools/oracle/generate_tables.py",
            "package": f"pyscf {pyscf.__version__}",
            "orbitals": "CISD natural orbitals ordered by descending occupation",
            "fci_energy": "pyscf direct_spin1 FCI, 4 electrons",
        },
        "000000001111",
        4,
    )
    lih["n_modes"] = 12
    dump(lih, os.path.join(args.out, "lih_sto6g_fermionic.json"))

    dump(
        {"source": "pyscf CCSD, H2 / STO-3G, R = 0.75 A", "amplitudes": ccsd_amplitudes_h2(0.75)},
        os.path.join(args.out, "h2_amplitudes.json"),
    )
    dump(
        {
            "source": "pyscf CISD in the natural-orbital basis, LiH / STO-6G, R = 1.60 A, "
            "active spatial orbitals 1-3",
            "amplitudes": cisd_amplitudes_lih(1.6),
        },
        os.path.join(args.out, "lih_amplitudes.json"),
    )


if __name__ == "__main__":
    main()
