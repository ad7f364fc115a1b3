"""Smoke test for the pyietidp extension module."""

import pyietidp


def main():
    kv = pyietidp.KnotVector.uniform(2, 4)
    first, values = kv.eval_basis(0.3)
    assert kv.num_basis == 6 and len(values) == 3 and 0 <= first <= 3
    assert abs(sum(values) - 1.0) < 1e-12
    assert len(kv.greville()) == kv.num_basis

    for form in ("cg", "dg"):
        case = pyietidp.Case(patches=[2, 2], degree=2, refine=2, formulation=form, workers=2)
        sol = pyietidp.solve(case)
        report = sol.report()
        assert report["formulation"] == form and report["workers"] == 2
        assert 0 < sol.iterations <= 30 and sol.condition >= 1.0
        assert sol.residuals[-1] <= 1e-8 * sol.residuals[0]
        assert len(sol.global_solution) == report["dofs"]
        assert len(sol.multipliers) == report["n_multipliers"]
        assert sol.l2_error < 0.1
        # the solve is bitwise independent of the worker count
        serial = pyietidp.solve(pyietidp.Case(patches=[2, 2], degree=2, refine=2, formulation=form))
        assert serial.solution_hash == sol.solution_hash
        print(f"{form}: {sol.iterations} iterations, kappa {sol.condition:.3f}, L2 error {sol.l2_error:.3e}")

    rows = pyietidp.scaling_study("strong", pyietidp.Case(patches=[4, 2], refine=1), [1, 2])
    assert [r["workers"] for r in rows] == [1, 2]

    case = pyietidp.Case.from_toml(pyietidp.Case(degree=3).to_toml())
    assert case.to_dict()["degree"] == 3
    for bad in ({"degree": 2, "colour": "red"}, {"dim": 5}, {"holders": 3, "workers": 2}):
        try:
            pyietidp.Case(**bad)
        except ValueError:
            pass
        else:
            raise AssertionError(f"accepted {bad}")
    print("smoke test passed")


if __name__ == "__main__":
    main()
