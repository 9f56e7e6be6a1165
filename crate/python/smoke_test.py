"""Import the compiled `wmst` module and exercise each binding once.

Build first:  cargo build --release -p wmst-py
Then run:     python3 python/smoke_test.py [path/to/libwmst_py.so]
"""

import importlib.util
import math
import os
import shutil
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def find_library():
    if len(sys.argv) > 1:
        return sys.argv[1]
    for profile in ("release", "debug"):
        for name in ("libwmst_py.so", "libwmst_py.dylib", "wmst_py.dll"):
            path = os.path.join(ROOT, "target", profile, name)
            if os.path.exists(path):
                return path
    sys.exit("no compiled module found; run `cargo build --release -p wmst-py`")


def load(lib, tmp):
    suffix = ".pyd" if lib.endswith(".dll") else ".so"
    target = os.path.join(tmp, "wmst" + suffix)
    shutil.copy(lib, target)
    spec = importlib.util.spec_from_file_location("wmst", target)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b}"


def main():
    tmp = tempfile.mkdtemp()
    wmst = load(find_library(), tmp)
    print("wmst", wmst.__version__)

    data = wmst.Dataset.bcos()
    assert len(data) == 94, len(data)
    print(data)

    tau1, rows = wmst.analyze(
        data, ["rmst", "wmst:15", "logrank", "fh:0:1"], rule="last-event"
    )
    assert tau1 == 42.0
    by_test = {r["test"]: r for r in rows}
    w15 = by_test["wmst:15"]
    close(w15["estimate"], 7.53, 0.01)
    close(w15["ci"][0], 3.06, 0.01)
    close(w15["ci"][1], 12.00, 0.01)
    close(by_test["rmst"]["p_value"], 0.0091, 0.0005)
    close(by_test["logrank"]["p_value"], 0.0011, 0.0005)
    for r in rows:
        print(f"  {r['test']:<10} z={r['statistic']:+.3f} p={r['p_value']:.4f}")

    single = wmst.wmst_test(data, 15.0, tau1=42.0)
    close(single["estimate"], w15["estimate"], 1e-12)
    lr = wmst.weighted_logrank(data)
    close(lr["statistic"], by_test["logrank"]["statistic"], 1e-12)

    km = wmst.kaplan_meier([1.0, 2.0, 3.0], [True, True, False])
    close(km(1.5), 2.0 / 3.0, 1e-12)
    close(km.wmst(0.0, 2.0), 1.0 + 2.0 / 3.0, 1e-12)

    c0 = wmst.fit(data, 0, "turnbull")
    assert c0(0.0) == 1.0 and 0.0 <= c0(60.0) <= 1.0
    assert all(s[2] >= s[3] - 1e-12 for s in c0.segments())

    close(wmst.true_wmst("weibull-i", 0, 0.25, 1.0), math.exp(-0.25) - math.exp(-1.0), 1e-9)

    sim = wmst.Dataset.simulate("weibull-vi", n_per_arm=50, seed=3)
    again = wmst.Dataset.simulate("weibull-vi", n_per_arm=50, seed=3)
    assert len(sim) == 100 and sim.rows() == again.rows()
    path = os.path.join(tmp, "sim.csv")
    sim.to_csv(path)
    assert wmst.Dataset.from_csv(path).rows() == sim.rows()

    config = open(os.path.join(ROOT, "configs", "power-weibull-i.json")).read()
    csv_text = wmst.simulate(config, replications=50, seed=1)
    assert csv_text == wmst.simulate(config, replications=50, seed=1)
    assert csv_text.splitlines()[0].startswith("test,tau0,rejection_rate")

    try:
        wmst.analyze(data, ["bogus"])
    except ValueError as e:
        print("  bad test name rejected:", e)
    else:
        raise AssertionError("bad test name accepted")

    shutil.rmtree(tmp)
    print("python smoke test passed")


if __name__ == "__main__":
    main()
