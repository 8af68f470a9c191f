"""Quick checks of the elliptic_amp extension module.

Run python/build.sh first, then: python3 python/smoke_test.py
"""
import json
import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import elliptic_amp as ea


def main():
    a = ea.sample_elliptic(4, 1.0, 7)
    assert all(a[i][j] == a[j][i] for i in range(4) for j in range(4))
    assert a == ea.sample_elliptic(4, 1.0, 7)

    b = ea.sample_elliptic(300, 0.0, 1, normalized=True)
    norm = ea.spectral_norm(b)
    assert 1.8 < norm < 2.2, norm

    sol = ea.solve_system(2.0, 0.0)
    assert sol["delta"] == 2.0
    assert 0.5 < sol["gamma"] < 1.0
    assert max(abs(v) for v in sol["residuals"].values()) < 1e-8

    eq = ea.equilibrium(b, 3.0, solver="lemke")
    assert eq["gate_passed"] and eq["solver"] == "lemke"
    assert min(eq["x_star"]) >= 0.0

    theta = ea.de_scalar_lv(2.0, 5)
    assert len(theta) == 5 and all(t > 0 for t in theta)

    assert ea.wasserstein2([0.0, 2.0], [1.0, 3.0]) == 1.0

    step = 0.01
    ys = [step * (i + 0.5) for i in range(2000)]
    mass = sum(ea.f_surv(2.0, 0.0, ys)) * step
    assert abs(mass - 1.0) < 1e-3, mass

    report = ea.run_amp_lv(json.dumps({"n": 200, "depth": 3, "rho": 0.4, "seed": 1}))
    assert len(report["rows"]) == 3

    with tempfile.TemporaryDirectory() as out:
        files = ea.run_figure("truncdist", out)
        assert files and all(os.path.exists(f) for f in files)

    try:
        ea.solve_system(0.1, 0.9)
    except ValueError as e:
        assert "out of domain" in str(e)
    else:
        raise AssertionError("expected ValueError")

    print("elliptic_amp", ea.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
