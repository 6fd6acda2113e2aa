#!/usr/bin/env python3
"""Generate the bundled physics data files.

Writes data/physics.dat (emission lines, absorption-edge metadata, mass
attenuation curves, fluorescence parameters) and data/default_background.xsp
(a smooth instrument-style continuum used as the default additive background).

Line and edge energies and fluorescence yields are standard reference values
(Bearden line tables, X-ray data booklet, Krause yields). Mass attenuation
curves are synthesized from a piecewise power-law photoelectric model with
edge jumps, anchored per element to reference total mu/rho values; this keeps
the curves within a few percent of tabulated data across 1-45 keV, which is
sufficient for qualitative layered-spectrum simulation. Rerunning this script
reproduces the shipped files byte for byte.
"""

import math
import os
import sys

E_MIN, E_MAX = 1.0, 45.0
GRID_POINTS = 60
VICTOREEN_EXP = 2.80
# photoelectric base: k * Z^4 * E^-2.8 / A, k calibrated on Fe at 10 keV
PHOTO_K = 13.11

# Z, A, anchor (energy keV, total mu/rho cm^2/g), edges [(label, E, jump)]
# Anchors sit away from edges; edges outside 1-45 keV are folded into the
# anchor fit and not listed.
ELEMENTS = {
    "H":  dict(z=1,  a=1.008,   anchor=None, edges=[]),
    "C":  dict(z=6,  a=12.011,  anchor=(10.0, 2.37),  edges=[]),
    "N":  dict(z=7,  a=14.007,  anchor=(10.0, 3.88),  edges=[]),
    "O":  dict(z=8,  a=15.999,  anchor=(10.0, 5.95),  edges=[]),
    "Na": dict(z=11, a=22.990,  anchor=(10.0, 14.0),
               edges=[("K", 1.072, 11.0)]),
    "Al": dict(z=13, a=26.982,  anchor=(10.0, 26.23),
               edges=[("K", 1.560, 11.0)]),
    "S":  dict(z=16, a=32.06,   anchor=(10.0, 50.3),
               edges=[("K", 2.472, 10.0)]),
    "Ca": dict(z=20, a=40.078,  anchor=(10.0, 95.0),
               edges=[("K", 4.038, 9.3)]),
    "Cr": dict(z=24, a=51.996,  anchor=(10.0, 141.0),
               edges=[("K", 5.989, 8.8)]),
    "Fe": dict(z=26, a=55.845,  anchor=(10.0, 170.6),
               edges=[("K", 7.112, 8.3)]),
    "Co": dict(z=27, a=58.933,  anchor=(10.0, 186.0),
               edges=[("K", 7.709, 8.2)]),
    "Cu": dict(z=29, a=63.546,  anchor=(10.0, 215.9),
               edges=[("K", 8.979, 7.9)]),
    "Zn": dict(z=30, a=65.38,   anchor=(10.0, 235.0),
               edges=[("K", 9.659, 7.8)]),
    "As": dict(z=33, a=74.922,  anchor=(10.0, 45.0),
               edges=[("K", 11.867, 7.3)]),
    "Sn": dict(z=50, a=118.710, anchor=(10.0, 141.0),
               edges=[("L3", 3.929, 2.30), ("L2", 4.156, 1.40),
                      ("L1", 4.465, 1.12), ("K", 29.200, 4.9)]),
    "Hg": dict(z=80, a=200.592, anchor=(10.0, 125.0),
               edges=[("M5", 2.295, 1.85), ("M4", 2.385, 1.30),
                      ("M3", 2.847, 1.45), ("M2", 3.279, 1.12),
                      ("M1", 3.562, 1.06),
                      ("L3", 12.284, 2.45), ("L2", 14.209, 1.40),
                      ("L1", 14.839, 1.15)]),
    "Pb": dict(z=82, a=207.2,   anchor=(10.0, 130.6),
               edges=[("M5", 2.484, 1.85), ("M4", 2.586, 1.30),
                      ("M3", 3.066, 1.45), ("M2", 3.554, 1.12),
                      ("M1", 3.851, 1.06),
                      ("L3", 13.035, 2.45), ("L2", 15.200, 1.41),
                      ("L1", 15.861, 1.15)]),
}

# symbol -> [(series, energy keV, relative intensity within (element, shell))]
# Series map to excitation shells as Ka/Kb->K, La->L3, Lb/Lg->L2.
LINES = {
    "S":  [("Ka", 2.307, 0.935), ("Kb", 2.464, 0.065)],
    "Ca": [("Ka", 3.692, 0.887), ("Kb", 4.013, 0.113)],
    "Cr": [("Ka", 5.415, 0.882), ("Kb", 5.947, 0.118)],
    "Fe": [("Ka", 6.404, 0.881), ("Kb", 7.058, 0.119)],
    "Co": [("Ka", 6.930, 0.880), ("Kb", 7.649, 0.120)],
    "Cu": [("Ka", 8.048, 0.879), ("Kb", 8.905, 0.121)],
    "Zn": [("Ka", 8.639, 0.877), ("Kb", 9.572, 0.123)],
    "As": [("Ka", 10.544, 0.868), ("Kb", 11.726, 0.132)],
    "Sn": [("Ka", 25.271, 0.824), ("Kb", 28.486, 0.176),
           ("La", 3.444, 1.000), ("Lb", 3.663, 0.900), ("Lg", 4.131, 0.100)],
    "Hg": [("La", 9.989, 1.000), ("Lb", 11.823, 0.880), ("Lg", 13.830, 0.120)],
    "Pb": [("La", 10.552, 1.000), ("Lb", 12.614, 0.880), ("Lg", 15.222, 0.120)],
}

# symbol -> [(shell, edge energy keV, fluorescence yield)]  (Krause values)
FP = {
    "S":  [("K", 2.472, 0.078)],
    "Ca": [("K", 4.038, 0.163)],
    "Cr": [("K", 5.989, 0.282)],
    "Fe": [("K", 7.112, 0.340)],
    "Co": [("K", 7.709, 0.373)],
    "Cu": [("K", 8.979, 0.440)],
    "Zn": [("K", 9.659, 0.474)],
    "As": [("K", 11.867, 0.562)],
    "Sn": [("K", 29.200, 0.860), ("L2", 4.156, 0.037), ("L3", 3.929, 0.037)],
    "Hg": [("L2", 14.209, 0.347), ("L3", 12.284, 0.333)],
    "Pb": [("L2", 15.200, 0.373), ("L3", 13.035, 0.360)],
}


def scatter_term(z, a):
    return 0.40 * z / a


def jump_factor(edges, energy):
    """Product of 1/J over edges lying above `energy`."""
    f = 1.0
    for _, e_edge, jump in edges:
        if energy < e_edge:
            f /= jump
    return f


def mu_model(sym, energy):
    el = ELEMENTS[sym]
    if sym == "H":
        # photoelectric negligible; scattering dominates
        return 6.8 * energy ** -3.1 + 0.385 * (energy / 10.0) ** -0.05
    base = PHOTO_K * el["z"] ** 4 * energy ** -VICTOREEN_EXP / el["a"]
    anchor_e, anchor_mu = el["anchor"]
    sigma = scatter_term(el["z"], el["a"])
    anchor_base = PHOTO_K * el["z"] ** 4 * anchor_e ** -VICTOREEN_EXP / el["a"]
    scale = (anchor_mu - sigma) / (anchor_base * jump_factor(el["edges"], anchor_e))
    return scale * base * jump_factor(el["edges"], energy) + sigma


def sample_grid(sym):
    el = ELEMENTS[sym]
    pts = set()
    for i in range(GRID_POINTS):
        pts.add(E_MIN * (E_MAX / E_MIN) ** (i / (GRID_POINTS - 1)))
    for _, e_edge, _ in el["edges"]:
        if E_MIN < e_edge < E_MAX:
            pts.add(e_edge * (1.0 - 1e-6))  # below-edge sample
            pts.add(e_edge)                 # at-edge sample = above-edge value
    return sorted(pts)


def write_physics(path):
    with open(path, "w") as f:
        f.write("# XRF physics table, version 1\n")
        f.write("# generated by tools/gen_physics_table.py -- do not edit by hand\n")
        f.write("#\n# [lines]: symbol series energy_keV rel_intensity\n")
        f.write("[lines]\n")
        for sym in LINES:
            for series, e, rel in LINES[sym]:
                f.write(f"{sym} {series} {e:.4f} {rel:.4f}\n")
        for sym in ELEMENTS:
            f.write(f"\n# attenuation: edge label energy_keV jump_ratio;"
                    f" sample energy_keV mu_rho_cm2_g\n")
            f.write(f"[attenuation {sym}]\n")
            for label, e_edge, jump in sorted(ELEMENTS[sym]["edges"],
                                              key=lambda t: t[1]):
                f.write(f"edge {label} {e_edge:.6f} {jump:.3f}\n")
            for e in sample_grid(sym):
                f.write(f"sample {e:.9g} {mu_model(sym, e):.7g}\n")
        f.write("\n# [fp]: symbol shell edge_keV fluorescence_yield\n")
        f.write("[fp]\n")
        for sym in FP:
            for shell, e_edge, y in FP[sym]:
                f.write(f"{sym} {shell} {e_edge:.4f} {y:.4f}\n")


def write_background(path, channels=4096, gain=0.010, offset=0.0, scale=12.0):
    """Smooth continuum peaking near 18 keV with a soft low-energy turn-on."""
    with open(path, "w") as f:
        f.write("xsp 1\n")
        f.write(f"offset {offset:.17g}\n")
        f.write(f"gain {gain:.17g}\n")
        f.write(f"channels {channels}\n")
        f.write("live_time 10\n")
        f.write("data\n")
        peak = 18.0
        for ch in range(channels):
            e = offset + gain * ch
            v = 0.0
            if 0.0 < e < 40.0:
                v = scale * (e / peak) * math.exp(1.0 - e / peak)
                v *= (1.0 - math.exp(-e / 2.0)) ** 3
            f.write(f"{v:.17g}\n")


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else \
        os.path.join(os.path.dirname(__file__), "..", "data")
    os.makedirs(out_dir, exist_ok=True)
    write_physics(os.path.join(out_dir, "physics.dat"))
    write_background(os.path.join(out_dir, "default_background.xsp"))
    print(f"wrote physics.dat and default_background.xsp to {out_dir}")


if __name__ == "__main__":
    main()
