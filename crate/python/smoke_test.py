"""Smoke test for the plapsys extension module.

Build and run from the repository root:

    cargo build --release -p plapsys-python
    cp target/release/libplapsys.so python/plapsys.so
    python3 python/smoke_test.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import plapsys  # noqa: E402


def check(cond, msg):
    if not cond:
        raise SystemExit(f"FAIL {msg}")
    print(f"ok   {msg}")


def main():
    a1, a2 = plapsys.similarity_exponents(3.0, 1)
    check(abs(a2 - 0.25) < 1e-15 and abs(a1 - 0.25) < 1e-15, "exponents at p=3, n=1")

    prof = plapsys.BarenblattProfile(1.0, 3.0, 1)
    grid = plapsys.Grid(1, [800], 4.0)
    mass = sum(prof.sample(grid, 1.0)) * grid.cell_volume
    check(abs(mass - 1.0) < 1e-4, f"profile mass {mass:.8f}")
    check(prof.evaluate([prof.support_radius(1.0) + 1e-9], 1.0) == 0.0, "zero outside the support")

    try:
        plapsys.SystemParams(1.5, 1, 1)
    except ValueError as e:
        check("p must exceed 2" in str(e), "invalid p raises ValueError")
    else:
        raise SystemExit("FAIL p = 1.5 accepted")

    params = plapsys.SystemParams(3.0, 1, 2)
    grid = plapsys.Grid(1, [300], 6.0)
    init = plapsys.make_initial("bump", [1.0, 2.0], grid, params, width=0.8)
    times = [0.2 * 2**i for i in range(6)]
    traj = plapsys.run(init, params, 6.4, snapshot_times=times)
    check(len(traj) == len(times) and traj.times() == times, "snapshot times")
    m0, m1 = init.masses(), traj.final_field().masses()
    drift = max(abs(x - y) / x for x, y in zip(m0, m1))
    check(drift < 1e-10, f"mass drift {drift:.2e}")

    rep = plapsys.mass_conservation_report(traj)
    check(rep.passed and rep.verdict_line().startswith("mass_conservation,PASS"), "mass report")
    rep = plapsys.gradient_bound_report(traj, params, 0.2)
    check(rep.passed, "gradient bound report")

    back = plapsys.VectorField.from_snapshot(traj.final_field().to_snapshot())
    check(back.components() == traj.final_field().components(), "snapshot round trip")

    a, b = plapsys.run_lockstep([init, init.scaled(1.1)], params, 2.0, snapshot_times=[0.5, 1.0, 2.0])
    check(plapsys.l2_contraction_report(a, b).passed, "L2 contraction")

    cfg = "p = 3\nn = 1\nk = 2\ncells = 200\nL = 6\nt_end = 1\nweights = 1, 2\nwidth = 0.8\n"
    check("cells = 200" in plapsys.parse_config(cfg), "config round trip")
    _, out = plapsys.simulate(cfg)
    check(out.passed and "run_log.csv" in out.files(), "simulate study")

    out = plapsys.verify_barenblatt([3.0, 4.0], [1, 2], [1.0], cells=200)
    check(out.passed, "closed-form verification")
    check(math.isfinite(plapsys.profile_constant(2.0, 3.0, 2)), "profile constant")
    print("all smoke checks passed")


if __name__ == "__main__":
    main()
