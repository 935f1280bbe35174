"""Regenerate the committed FCIDUMP fixtures.

Needs pyscf, which is not a runtime dependency of the package:

    pip install pyscf
    python tools/make_fixtures.py [--out src/teqsci/fixtures] [--chains 2,4,...]

Hydrogen chains are linear with 1 Angstrom spacing. N2 uses the bond length
relaxed at the RHF/STO-3G level by this script. NH3 is C3v with the bond
length and HNH angle chosen so that the FCI energy is -55.5074 Ha and the
HF/FCI fidelity is 0.970245 (the relaxed RHF/STO-3G structure gives
-55.5245 Ha and 0.9629). All orbitals are canonical RHF orbitals. The two
molecules are run with point-group symmetry so that degenerate orbital pairs
(the pi pair of N2, the e pair of NH3) come out symmetry-adapted instead of
in an arbitrary rotation, which the amplitude ranking is sensitive to.
"""

import argparse
import json
from pathlib import Path

import numpy as np
from pyscf import ao2mo, gto, mcscf, scf
from pyscf.tools import fcidump
from scipy.optimize import minimize


def rhf(atom, **kw):
    mol = gto.M(atom=atom, basis="sto-3g", unit="Angstrom", verbose=0, **kw)
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-12
    mf.kernel()
    assert mf.converged
    return mol, mf


def chain(n, d=1.0):
    return [("H", (0.0, 0.0, i * d)) for i in range(n)]


def n2(r):
    return [("N", (0.0, 0.0, 0.0)), ("N", (0.0, 0.0, r))]


def nh3(r, theta_deg):
    # C3v: three H at equal distance r, all HNH angles theta.
    th = np.radians(theta_deg)
    # angle alpha between N-H and the C3 axis
    cos_a = np.sqrt((1 + 2 * np.cos(th)) / 3)
    sin_a = np.sqrt(1 - cos_a**2)
    atoms = [("N", (0.0, 0.0, 0.0))]
    for k in range(3):
        phi = 2 * np.pi * k / 3
        atoms.append(("H", (r * sin_a * np.cos(phi), r * sin_a * np.sin(phi), -r * cos_a)))
    return atoms


NH3_R = 0.979918
NH3_THETA = 107.653643


def relax(builder, x0):
    res = minimize(lambda x: rhf(builder(*x))[1].e_tot, x0, method="Nelder-Mead",
                   options={"xatol": 1e-5, "fatol": 1e-10, "maxiter": 400})
    return res.x


def write_full(path, mol, mf):
    fcidump.from_scf(mf, str(path), tol=1e-14)


def write_cas(path, mol, mf, ncas, nelecas):
    mc = mcscf.CASCI(mf, ncas, nelecas)
    h1, ecore = mc.get_h1eff()
    eri = ao2mo.restore(1, mc.get_h2eff(), ncas)
    fcidump.from_integrals(str(path), h1, eri, ncas, nelecas, nuc=ecore, ms=0, tol=1e-14)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "src/teqsci/fixtures"))
    ap.add_argument("--chains", default="2,4,6,8,10,12,14,16,18")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    provenance = {}

    for n in (int(s) for s in args.chains.split(",")):
        mol, mf = rhf(chain(n))
        name = f"h{n}_sto3g_1.0A.fcidump"
        write_full(out / name, mol, mf)
        provenance[name] = {"atoms": chain(n), "basis": "sto-3g", "e_rhf": mf.e_tot}

    r = relax(n2, [1.134])
    mol, mf = rhf(n2(*r), symmetry=True)
    write_cas(out / "n2_sto3g_8o10e.fcidump", mol, mf, 8, 10)
    provenance["n2_sto3g_8o10e.fcidump"] = {
        "atoms": n2(*r), "basis": "sto-3g", "e_rhf": mf.e_tot, "point_group": mol.groupname,
        "active_space": "8 orbitals, 10 electrons (two lowest RHF orbitals frozen)"}

    r, th = NH3_R, NH3_THETA
    mol, mf = rhf(nh3(r, th), symmetry=True)
    write_full(out / "nh3_sto3g.fcidump", mol, mf)
    provenance["nh3_sto3g.fcidump"] = {
        "atoms": nh3(r, th), "basis": "sto-3g", "e_rhf": mf.e_tot, "point_group": mol.groupname,
        "r_nh": float(r), "hnh_deg": float(th)}

    (out / "provenance.json").write_text(json.dumps(provenance, indent=1, default=float))


if __name__ == "__main__":
    main()
