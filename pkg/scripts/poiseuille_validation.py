#!/usr/bin/env python3
"""Validate the whole indicator chain against the steady pipe-flow oracle.

Builds the analytic cylinder case (R = 3 mm, Q = 7.9 ml/s, mu = 3.45 mPa.s),
extracts its centerline, projects tangents, and compares every indicator to
its closed-form value, then repeats with a reversing square-wave waveform
where the oscillation indices hit exactly 0.5.
"""

import numpy as np

import vesselwss as vw


def check(name, got, expected, tol):
    dev = np.abs(np.asarray(got) - expected).max()
    status = "ok " if dev <= tol else "FAIL"
    print(f"  [{status}] {name:<22} expected {expected:<12.6g} "
          f"max deviation {dev:.3e} (tol {tol:.1e})")
    return dev <= tol


def main():
    print("steady Poiseuille cylinder (R=3 mm, L=40 mm, 64 x 128)")
    case = vw.steady_poiseuille_case()
    cl = vw.extract_centerline(case.mesh, (0, 0, 0), (0, 0, 40), spacing=0.5)
    tangents = vw.project_centerline_tangents(case.mesh, cl)
    tau_vec = vw.wss_vector(case.traction, case.mesh.vertex_normals)
    long = vw.wss_longitudinal(case.traction, tangents)

    results = {
        "wss_amplitude": vw.wss_amplitude(tau_vec).samples[0],
        "wss_longitudinal": long.samples[0],
        "tawss": vw.tawss(tau_vec).values,
        "osi": vw.osi_vector(tau_vec).values,
        "osi_longitudinal": vw.osi_longitudinal(long).values,
    }
    ok = True
    for name, expected in case.oracle.items():
        tol = case.tolerance * (abs(expected) if expected else 1.0)
        ok &= check(name, results[name], expected, max(tol, 1e-12))

    print("reversing square-wave case (balanced forward/backward flow)")
    rev = vw.reversing_square_wave_case()
    axial = vw.TangentField(
        np.tile([0.0, 0.0, 1.0], (rev.mesh.n_vertices, 1)), "projected",
        np.zeros(rev.mesh.n_vertices, bool),
    )
    rev_vec = vw.wss_vector(rev.traction, rev.mesh.vertex_normals)
    rev_long = vw.wss_longitudinal(rev.traction, axial)
    ok &= check("osi", vw.osi_vector(rev_vec).values, 0.5, rev.tolerance)
    ok &= check("osi_longitudinal",
                vw.osi_longitudinal(rev_long).values, 0.5, rev.tolerance)
    print("all oracles met" if ok else "ORACLE VIOLATIONS; see lines above")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
