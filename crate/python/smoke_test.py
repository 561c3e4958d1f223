"""Smoke test for the Python bindings.

Build first:  pip install -e crates/python --no-build-isolation
Run:          python python/smoke_test.py
"""

import math
import sys

import tsfloor_py as ts


def main():
    checks = ts.verify_fixtures()
    failed = [c for c in checks if not c[1]]
    assert not failed, failed

    assert abs(ts.box_plus(2.0, 2.0) - 1.3250027473578645) < 1e-12

    code = ts.Code.builtin("tanner-155")
    assert (code.n, code.m, code.num_layers, code.lift) == (155, 93, 3, 31)

    cat = ts.Catalog.enumerate(code, 5, 3)
    assert len(cat) == 155 and cat.class_counts() == {(5, 3): 155}

    a = ts.transition_matrix(code, cat.sets()[0], "2,3,1")
    r = ts.spectral_radius(a)
    assert abs(r - 2.0136) < 1e-3, r

    out = ts.decode(code, [5.0] * code.n, 15.75, iters=5)
    assert out.converged and not any(out.hard)

    est = ts.estimate(code, cat, 4.0, 15.75, step=0.25)
    assert 0.0 < est.total < 1.0 and math.isclose(sum(est.by_class.values()), est.total)

    rows = ts.search_schedules(code, cat, 4.0, 15.75, shortlist=2, step=0.25)
    assert len(rows) == 6 and len({round(r[1], 6) for r in rows}) == 1

    pt = ts.simulate(code, 2.0, 15.75, iters=20, max_frames=300, min_errors=10**6)
    assert pt.frames == 300 and pt.ci_low <= pt.fer <= pt.ci_high

    try:
        ts.Code.builtin("missing")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown code accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    sys.exit(main())
