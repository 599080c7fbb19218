"""Smoke test for the qsimcost extension module.

Build and run from the repository root:

    cargo build --release -p qsimcost-py --features extension-module
    python3 python/smoke.py target/release
"""

import json
import math
import os
import shutil
import sys
import tempfile


def load(build_dir):
    for name in ("libqsimcost_py.so", "libqsimcost_py.dylib", "qsimcost_py.dll"):
        src = os.path.join(build_dir, name)
        if os.path.exists(src):
            break
    else:
        sys.exit(f"no qsimcost_py library in {build_dir}")
    dest = tempfile.mkdtemp()
    ext = ".pyd" if name.endswith(".dll") else ".so"
    shutil.copy(src, os.path.join(dest, "qsimcost" + ext))
    sys.path.insert(0, dest)
    import qsimcost

    return qsimcost


def main():
    q = load(sys.argv[1] if len(sys.argv) > 1 else "target/release")

    x = q.BlochVector(0.6, 0.0, 0.8)
    trine = q.Povm.trine()
    report = q.simulate_pm(x, trine, rounds=200_000, seed=7)
    assert report["pass"], report
    assert report == q.simulate_pm(x, trine, rounds=200_000, seed=7)
    inter = q.simulate_pm(x, trine, rounds=200_000, seed=7, variant="interactive")
    assert [c["count"] for c in inter["cells"]] == [c["count"] for c in report["cells"]]

    z = q.BlochVector(0, 0, 1)
    singlet = q.simulate_singlet(z, q.Povm.projective(z), rounds=100_000, seed=3)
    assert singlet["pass"], singlet

    assert len(q.snub_cube()) == 24
    assert len(q.octahedron()) == 6
    two = q.thomson(2, restarts=3)
    assert abs(sum(a * b for a, b in zip(*two)) + 1) < 1e-6

    states = [q.BlochVector(*v) for v in q.octahedron()[:4]]
    povms = [q.Povm.projective(q.BlochVector(*v)) for v in q.octahedron()[:3]]
    b = q.Behavior.from_quantum(states, povms)
    assert b.shape == (4, 3, 2)
    assert math.isclose(sum(b.get(k, 0, 0) for k in range(2)), 1.0)
    r = q.visibility(b, 2)
    assert r["simulable"], r

    # Guessing x from one message: 2 with a bit, 1 without.
    gamma = [[[1.0, 0.0]], [[0.0, 1.0]]]
    assert q.classical_bound(gamma, 2) == 2.0
    assert q.classical_bound(gamma, 1) == 1.0

    try:
        q.BlochVector(0, 0, 2)
    except ValueError:
        pass
    else:
        raise AssertionError("invalid Bloch vector accepted")

    print(json.dumps({"pm_max_deviation": report["max_deviation"], "eta_star": r["eta_star"]}))
    print("python smoke test passed")


if __name__ == "__main__":
    main()
