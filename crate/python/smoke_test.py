#!/usr/bin/env python3
"""Smoke test for the dfmc_py extension module.

Builds nothing itself: it looks for the compiled cdylib under target/
(`cargo build --release -p dfmc-py` produces it), exposes it as an
importable module, and runs a handful of end-to-end checks.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_dfmc_py():
    candidates = [
        REPO / "target" / "release" / "libdfmc_py.so",
        REPO / "target" / "debug" / "libdfmc_py.so",
        REPO / "target" / "release" / "libdfmc_py.dylib",
        REPO / "target" / "debug" / "libdfmc_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit(
            "dfmc_py cdylib not found; run `cargo build --release -p dfmc-py` first"
        )
    stage = Path(tempfile.mkdtemp(prefix="dfmc_py_"))
    suffix = ".so" if built.suffix == ".so" else ".so"  # CPython loads .so on mac too
    shutil.copy2(built, stage / f"dfmc_py{suffix}")
    sys.path.insert(0, str(stage))
    import dfmc_py

    return dfmc_py


def check(name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"{status} {name}{': ' + detail if detail else ''}")
    if not ok:
        sys.exit(1)


def main():
    m = import_dfmc_py()
    print(f"dfmc_py {m.__version__}")

    # linear fitters: hat-matrix trace
    eye2 = m.DesignMatrix.identity(2)
    ridge = m.Fitter.ridge(eye2, 1.0)
    check("ridge trace", abs(m.df_trace_linear(ridge) - 1.0) < 1e-12)

    # best subset on the identity design keeps the larger coordinate
    bsr = m.Fitter.best_subset(m.DesignMatrix.identity(2), 1)
    fitted, support, rss = bsr.fit([3.0, 1.0])
    check(
        "bsr identity fit",
        fitted == [3.0, 0.0] and support == [0] and abs(rss - 1.0) < 1e-12,
    )

    # closed-form anchors
    check(
        "scaling limit",
        abs(m.df_scaling_limit() - 1.0 / math.sqrt(math.pi)) < 1e-12,
    )
    check(
        "axis pair reference at origin",
        abs(m.df_axis_pair_reference(0.0, 0.0) - (1.0 + 2.0 / math.pi)) < 1e-9,
    )

    # Monte Carlo vs the two-point closed form sqrt(2/pi)/sigma
    points = m.Fitter.point_set([[-1.0], [1.0]])
    model = m.DataModel([0.0], sigma=1.0)
    est = m.estimate_df(model, points, replicates=40_000, seed=7)
    target = math.sqrt(2.0 / math.pi)
    check(
        "two-point MC vs closed form",
        abs(est.value - target) <= 4.0 * est.std_error,
        f"df = {est.value:.4f} +- {est.std_error:.4f}, target {target:.4f}",
    )

    # both estimators agree on the same draws
    cov, opt = m.estimate_df_both(model, points, 40_000, 7)
    comb = math.hypot(cov.std_error, opt.std_error)
    check(
        "estimator agreement",
        abs(cov.value - opt.value) <= 4.0 * comb,
        f"cov {cov.value:.4f} vs opt {opt.value:.4f}",
    )

    # quadrature reports its Richardson pair
    quad = m.df_quadrature(model, points, 256)
    check(
        "quadrature pair",
        abs(quad["value"] - target) < 1e-5 and "converged" in quad,
        f"value = {quad['value']:.6f}",
    )

    # determinism: same seed, same estimate
    again = m.estimate_df(model, points, replicates=40_000, seed=7)
    check("seeded determinism", again.value == est.value and again.std_error == est.std_error)

    # OLS anchor on a seeded Gaussian design: DF = p
    design = m.DesignMatrix.gaussian(50, 15, seed=1)
    ols = m.Fitter.ols(design)
    model = m.DataModel(design.standardized_mean(), sigma=1.0)
    est = m.estimate_df(model, ols, replicates=20_000, seed=3)
    check(
        "OLS DF = p",
        abs(est.value - 15.0) <= 4.0 * est.std_error,
        f"df = {est.value:.3f} +- {est.std_error:.3f}",
    )

    print("smoke test OK")


if __name__ == "__main__":
    main()
