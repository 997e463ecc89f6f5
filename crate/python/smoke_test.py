"""Smoke test for the vehpred Python module.

Build and install first, e.g. `pip install maturin && maturin develop -m crates/py/Cargo.toml`.
"""

import math
import sys

import vehpred


def check(name, ok, detail=""):
    print(f"{'ok  ' if ok else 'FAIL'} {name} {detail}".rstrip())
    return ok


def main():
    results = []
    params = vehpred.VehicleParams(4.0, 0.16, 0.20, 0.05, 50.0, 50.0)
    cfg = vehpred.Config(params)
    results.append(check("config defaults", cfg.dt == 0.005 and cfg.r == [[0.125, 0.0], [0.0, 0.1]]))
    again = vehpred.Config.from_toml(cfg.render())
    results.append(check("config round trip", again.render() == cfg.render()))

    pose = vehpred.kinematic_step(vehpred.Pose(), 1.0, 0.1, params, 0.005)
    want = 0.005 * math.tan(0.1) / 0.36
    results.append(check("kinematic step", abs(pose.psi - want) < 1e-15, f"psi={pose.psi:.6e}"))

    vel = vehpred.VelocityState(1.5, 0.02, 0.5)
    jac = vehpred.discrete_jacobian(vel, 0.15, 0.1, params, 0.005)
    h = 1e-6
    plus = vehpred.discrete_step(vehpred.VelocityState(1.5, 0.02, 0.5 + h), 0.15, 0.1, params, 0.005)
    minus = vehpred.discrete_step(vehpred.VelocityState(1.5, 0.02, 0.5 - h), 0.15, 0.1, params, 0.005)
    fd = (plus.psi_dot - minus.psi_dot) / (2 * h)
    results.append(check("jacobian vs finite difference", abs(fd - jac[2][2]) < 1e-6, f"{jac[2][2]:.6f}"))

    f = vehpred.Filter(cfg, vehpred.VelocityState(1.0))
    for _ in range(200):
        f.step(0.0, 0.0, psi_dot=0.0, v_x=1.0)
    p = f.covariance
    results.append(check("filter straight line", abs(f.pose.x - 1.0) < 1e-9 and abs(f.t - 1.0) < 1e-9))
    results.append(check("covariance symmetric", all(p[i][j] == p[j][i] for i in range(3) for j in range(3))))

    try:
        f.predict(1.0, 0.0)
        results.append(check("steering limit raises", False))
    except ArithmeticError as e:
        results.append(check("steering limit raises", True, f"({e})"))

    l_v, l_h = vehpred.cog_from_scale(4 * 9.81 * 0.20 / 0.36, 4 * 9.81 * 0.16 / 0.36, 0.36, 4.0)
    results.append(check("cog from scale", abs(l_v - 0.16) < 1e-12 and abs(l_h - 0.20) < 1e-12))
    period = vehpred.bifilar_period(0.05, 4.0, 0.3, 1.2)
    j = vehpred.inertia_bifilar([k * period for k in range(10)], 4.0, 0.3, 1.2)
    results.append(check("bifilar round trip", abs(j - 0.05) < 1e-12, f"J={j:.6f}"))

    run = vehpred.simulate(cfg, "lap", speed=2.0, seed=1)
    dyn = vehpred.run_estimate(run["sensors"], cfg)["closure"]["closure_per_meter"]
    kin = vehpred.run_estimate(run["sensors"], cfg, model="kinematic")["closure"]["closure_per_meter"]
    results.append(check("dynamic beats kinematic", dyn <= 0.5 * kin, f"{dyn:.4f} vs {kin:.4f} m/m"))

    closed = [vehpred.Pose(0, 0, 0), vehpred.Pose(5, 0, 0), vehpred.Pose(0, 0, 0)]
    results.append(check("closure metrics", vehpred.closure_metrics(closed)["position_closure"] == 0.0))
    log = [(0.005 * k, 0.005 * k, 0.0, 0.0) for k in range(20)]
    results.append(check("horizon identity", vehpred.horizon_error(log, log, 7) == (0.0, 0.0)))

    us = vehpred.bench_cycle(cfg, 20000)
    results.append(check("cycle time", us < 50.0, f"{us:.3f} us"))

    print(f"{sum(results)}/{len(results)} checks passed")
    return 0 if all(results) else 1


if __name__ == "__main__":
    sys.exit(main())
