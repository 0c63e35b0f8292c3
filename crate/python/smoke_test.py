"""Smoke test for the helfrich_py extension.

Build and install first:  pip install --no-build-isolation ./crates/py
"""

import math
import os
import sys
import tempfile

import helfrich_py as hp


def check(name, ok, detail=""):
    print(f"{'ok  ' if ok else 'FAIL'} {name} {detail}")
    return ok


def main():
    results = []
    sphere = hp.Mesh.icosphere(4)
    e = sphere.energy()
    results.append(check("unit sphere willmore", abs(e["willmore"] / (4 * math.pi) - 1) < 0.01, f"{e['willmore']:.6f}"))
    h = sphere.energy(c0=1.0)["helfrich"]
    results.append(check("unit sphere helfrich at c0=1", h < 0.05, f"{h:.3e}"))
    results.append(check("topology", sphere.topology()["pass"]))

    ell = hp.Mesh.ellipsoid(3, 1.5, 1.0, 0.8)
    for f in ["area", "volume", "total_mean_curvature", "willmore", "helfrich"]:
        r = ell.gradient_check(f, c0=0.7, alpha=0.3, rho=0.1)
        results.append(check(f"gradient {f}", r["pass"], f"{r['max_relative_error']:.2e}"))
    g = ell.gradient("area")
    results.append(check("gradient shape", len(g) == ell.num_vertices and len(g[0]) == 3))

    rows = hp.neck_family(c0=1.0)
    hs = [r["helfrich"] for r in rows]
    results.append(check("neck family decreasing", all(b < a for a, b in zip(hs, hs[1:])), f"{hs[0]:.3f} -> {hs[-1]:.3f}"))

    r_star = hp.critical_radius(1.0, alpha=1.0)
    results.append(check("critical radius", abs(r_star - 0.5) < 1e-12, f"{r_star}"))
    study = hp.conservation_study(1.0, 1.0, 0.0, resolutions=[33, 65])
    orders = study["orders"]
    results.append(check("conservation orders", min(orders.values()) > 1.5, str({k: round(v, 2) for k, v in orders.items()})))

    eps = hp.epsilon_embeddedness(4 * math.pi, 4 * math.pi / 3, 4 * math.pi)
    results.append(check("epsilon threshold", abs(eps - (math.sqrt(2) - 1) / 2) < 1e-12, f"{eps:.5f}"))

    start = hp.Mesh.ellipsoid(2, 1.2, 1.0, 0.9)
    final, summary = hp.minimize(start, area=start.area(), volume=start.volume(), max_iterations=50)
    results.append(check("minimize", summary["iteration"] == 50 and final.num_vertices == start.num_vertices, summary["status"]))

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "s.ply")
        sphere.save(path)
        back = hp.Mesh.load(path)
        results.append(check("ply round trip", back.vertices == sphere.vertices))

    try:
        sphere.energy(alpha=-1.0)
        results.append(check("negative alpha rejected", False))
    except ValueError:
        results.append(check("negative alpha rejected", True))

    print(f"{sum(results)}/{len(results)} checks passed")
    return 0 if all(results) else 1


if __name__ == "__main__":
    sys.exit(main())
