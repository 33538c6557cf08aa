"""Smoke test for the declab_py extension: parse a problem, run each main operation once."""

import math
from pathlib import Path

import declab_py as dl

ROOT = Path(__file__).resolve().parent.parent
PARABOLA = ROOT / "problems" / "parabola.prob"


def main():
    p = dl.Problem.from_file(str(PARABOLA))
    assert p.dim == 2 and p.functions() == ["f1", "f2"]
    assert p.value("f1", [0.5, 0.25]) == -0.5
    assert math.isinf(p.value("f1", [0.5, 0.0]))
    again = dl.Problem.parse(p.to_text())
    assert again.to_text() == p.to_text()

    try:
        dl.Problem.parse("[function]\nf = x if x < else 1\n")
    except ValueError as e:
        assert "line 2" in str(e)
    else:
        raise AssertionError("malformed guard accepted")

    step = dl.Problem.from_file(str(ROOT / "problems" / "step.prob"))
    rep = step.decouple()
    assert abs(rep["lambda_dag"] - 1.0) < 5e-2 and abs(rep["lambda_circ"]) < 5e-2
    d = step.diamond([0.2], [0.4])
    assert abs(d["value"] - 0.1) < 1e-3

    pole = dl.Problem.from_file(str(ROOT / "problems" / "pole.prob"))
    cert = pole.certify("uniform", scheme=dl.Scheme(levels=6))
    assert cert["verdict"]["status"] == "FAILS" and cert["witness"] is not None

    sg = p.is_subgradient("f1", [0.5, 0.25], [0.0, -1.0])
    assert sg["status"] == "HOLDS"

    w = p.multiplier_search([0.0, 0.0], 0.1, 0.1, 0.1)
    assert w["outcome"] == "found" and w["residual"] == 0.0
    w = p.intersection_rule("P", "H", [0.0, 0.0], [1.0, 0.0], 0.25)
    assert w["outcome"] == "found" and w["residual"] == 0.0

    e = dl.ekeland_on_cloud([[0.0], [1.0], [2.0]], [1.0, 0.2, math.inf], [0.0], 0.5)
    assert e["xhat"] == [1.0]

    sol = dl.solve_sparse_oc([0.5, 0.5], [-1.0, -1.0], [1.0, 1.0], [0.1, 3.0], sigma=1.0, sigma0=0.1)
    assert sol["xopt"] == [0.0, 1.0] and sol["stationarity"]["status"] == "HOLDS"
    assert dl.project_box([2.0, -0.5], [-1.0, -1.0], [1.0, 1.0]) == [1.0, -0.5]

    g = dl.run_gallery("E3.2", seed=1)
    assert g["failed"] == 0 and g["passed"] == 8
    print("smoke test passed")


if __name__ == "__main__":
    main()
