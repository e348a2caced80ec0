"""Builds the pysrcomp extension and exercises its main entry points."""

import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def build() -> pathlib.Path:
    subprocess.run(
        ["cargo", "build", "--release", "-p", "srcomp-python", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    lib = ROOT / "target" / "release" / "libpysrcomp.so"
    out = pathlib.Path(tempfile.mkdtemp()) / "pysrcomp.so"
    shutil.copy(lib, out)
    return out.parent


def main() -> None:
    sys.path.insert(0, str(build()))
    import pysrcomp as sr

    e = sr.parse("0.4*x0*x1 - 1.5*x0 + 2.5*x1 + 1")
    assert e.node_count() == 15, e.node_count()
    assert e.variables() == [0, 1]
    assert abs(e.evaluate([[1.0, 1.0]])[0] - 2.4) < 1e-12
    assert sr.simplify("x0 + x0") == "2.0 * x0", sr.simplify("x0 + x0")

    kind, const = sr.equivalent(str(e), "0.4*(x0 + 6.25)*(x1 - 3.75) + 10.37", [(-3.0, 3.0)] * 2)
    assert kind == "exact_additive" and abs(const - 0.005) < 1e-3, (kind, const)

    train, test = sr.generate("exact", "easier", 0)
    assert len(train) == 1000 and len(test) == 1000
    assert train.ground_truth is not None

    model = sr.fit_linear(train.features, train.target)
    pred = sr.parse(model).evaluate(test.features)
    assert 0.0 < sr.r2(test.target, pred) < 1.0

    gp = sr.fit_gp(train.features, train.target, budget_seconds=3.0, seed=1)
    assert sr.r2(test.target, sr.parse(gp).evaluate(test.features)) > 0.9, gp

    assert sr.simplicity_from_nodes(10) == -1.4
    assert abs(sr.harmonic_rank([10.0, 1.0, 1.0]) - 3 / 2.1) < 1e-12
    assert sr.rank_criterion([0.9, 0.5, 0.7]) == [3.0, 1.0, 2.0]
    assert abs(sr.critical_difference(8, 10) - 3.320) < 0.01
    assert abs(sr.erf(1.0) - math.erf(1.0)) < 1e-12

    cleaned = sr.clean_outliers([10.0] * 7 + [1000.0, 10.0])
    assert cleaned[7] == 10.0
    assert sr.ewma([1.0, 3.0], 0.5) == [1.0, 2.0]
    train_rows, test_rows = sr.chunk_split(112)
    assert train_rows[:2] == [0, 1] and test_rows[0] == 35 and len(test_rows) == 42

    try:
        sr.parse("x0 +")
    except ValueError:
        pass
    else:
        raise AssertionError("parse error not raised")
    print("pysrcomp smoke test passed")


if __name__ == "__main__":
    main()
