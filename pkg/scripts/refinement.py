"""Grid/step refinement of the two evolution identities.

    python3 scripts/refinement.py [--out runs/refinement.json]

Hessian (χ) evolution on an inhomogeneous S¹×S²×S³ run, with the default and
the literal base-fiber coefficient; Ř and Uhlenbeck residuals on a torus run
with one S² fiber, both for a generic 2-D warping and for w = w(x).
"""

import argparse
import json
from pathlib import Path

import numpy as np

from warpflow import monitors
from warpflow.flow_s1 import Profile
from warpflow.flow_surface import BaseMetricFamily, SurfaceConfig, SurfaceProfile, r_evolution_refinement
from warpflow.state import FiberSpec

S2 = FiberSpec.unit_sphere(2)


def hessian():
    profiles = (Profile("cosine", 1.0, 0.2), Profile("cosine", 1.5, 0.1, 2, -np.pi / 2))
    fibers = (S2, FiberSpec(3, 2.0))
    out = {}
    for coeff in (8.0, 4.0):
        norms, ratios = monitors.hessian_refinement(profiles, fibers, base_fiber_coeff=coeff)
        out[f"coeff_{coeff:g}"] = {"norms": norms, "ratios": ratios}
    return out


def surface():
    two_d = SurfaceProfile("trig", 0.8, terms=((0.15, 1, 0, 0.0), (0.1, 0, 1, 0.3), (0.05, 1, 1, 0.0)))
    cases = {
        "trig_conformal": SurfaceConfig(fibers=(S2,), profiles=(two_d,),
                                        base_metric=BaseMetricFamily("conformal", 0.1, 1, 1)),
        "sine_x_flat": SurfaceConfig(fibers=(S2,), profiles=(SurfaceProfile("sine", 0.8, 0.15),)),
    }
    return {name: r_evolution_refinement(cfg) for name, cfg in cases.items()}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs/refinement.json")
    args = ap.parse_args()
    doc = {"hessian": hessian(), "surface": surface()}
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps(doc, indent=2))
    for name, r in doc["hessian"].items():
        print(f"hessian {name}: ratios {', '.join(f'{x:.2f}' for x in r['ratios'])}")
    for name, r in doc["surface"].items():
        print(f"{name}: R ratios {', '.join(f'{x:.2f}' for x in r['R_ratios'])}; "
              f"Uhlenbeck norms {', '.join(f'{x:.3g}' for x in r['uhlenbeck_norms'])}")


if __name__ == "__main__":
    main()
