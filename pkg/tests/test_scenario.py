import json

import numpy as np
import pytest

from covdyn import fieldio
from covdyn.errors import ScenarioError
from covdyn.scenario import Expression, parse_scenario, scenario_from_dict

MINIMAL = """
[manifold]
name = "euclidean:1"

[body]
d = 1
N = 33

[material]
lagrangian = "dirichlet"

[initial]
phi = ["x"]
"""


def write(tmp_path, text, name="s.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestParse:
    def test_minimal(self, tmp_path):
        sc = parse_scenario(write(tmp_path, MINIMAL))
        assert (sc.manifold, sc.d, sc.N, sc.lagrangian) == ("euclidean:1", 1, 33, "dirichlet")
        assert np.allclose(sc.phi0(), sc.grid().x)
        assert np.all(sc.V0() == 0)

    def test_json_equivalent(self, tmp_path):
        raw = {"manifold": {"name": "euclidean:1"}, "body": {"d": 1, "N": 33},
               "material": {"lagrangian": "dirichlet"}, "initial": {"phi": ["x"]}}
        sc = parse_scenario(write(tmp_path, json.dumps(raw), "s.json"))
        assert sc.N == 33

    def test_unknown_manifold_names_field(self, tmp_path):
        with pytest.raises(ScenarioError, match="manifold.name"):
            parse_scenario(write(tmp_path, MINIMAL.replace("euclidean:1", "torus")))

    def test_unsupported_body_dimension(self, tmp_path):
        with pytest.raises(ScenarioError, match="unsupported body dimension"):
            parse_scenario(write(tmp_path, MINIMAL.replace("d = 1", "d = 3")))

    def test_dimension_mismatch(self, tmp_path):
        with pytest.raises(ScenarioError, match="dimension mismatch"):
            parse_scenario(write(tmp_path, MINIMAL.replace("d = 1", "d = 2")))

    def test_all_problems_reported(self, tmp_path):
        text = MINIMAL.replace("dirichlet", "rubber").replace('["x"]', '["x", "2*x"]')
        with pytest.raises(ScenarioError) as info:
            parse_scenario(write(tmp_path, text))
        assert len(info.value.problems) == 2

    def test_toml_parse_error_position(self, tmp_path):
        with pytest.raises(ScenarioError, match="line 2"):
            parse_scenario(write(tmp_path, "[manifold]\nname = \n"))

    def test_json_parse_error_position(self, tmp_path):
        with pytest.raises(ScenarioError, match="line 1, column"):
            parse_scenario(write(tmp_path, "{\"a\": }", "s.json"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ScenarioError, match="not found"):
            parse_scenario(tmp_path / "nope.toml")

    def test_bad_expression(self, tmp_path):
        with pytest.raises(ScenarioError, match="initial.phi"):
            parse_scenario(write(tmp_path, MINIMAL.replace('["x"]', '["__import__(1)"]')))

    def test_clamp_faces(self, tmp_path):
        sc = parse_scenario(write(tmp_path, MINIMAL + 'clamp = ["x1-"]\n'))
        mask = sc.clamp_mask()
        assert mask[0] and not mask[1:].any()
        with pytest.raises(ScenarioError, match="unknown face"):
            parse_scenario(write(tmp_path, MINIMAL + 'clamp = ["x2-"]\n'))

    def test_reference_metric_and_loads(self):
        raw = {"manifold": {"name": "euclidean:2"}, "body": {"d": 2, "N": 9},
               "material": {"lagrangian": "svk-incompatible", "g": [["1 + x1", "0"], ["0", "1"]]},
               "loading": {"surface": ["0.1*y1", "0"]},
               "initial": {"phi": ["x1", "x2"]}}
        sc = scenario_from_dict(raw)
        g = sc.reference_metric()(np.array([[0.5, 0.2]]))
        assert np.allclose(g, [[[1.5, 0], [0, 1]]])
        load = sc.loading()
        assert np.allclose(load.T(np.zeros((1, 2)), np.array([[2.0, 3.0]])), [[0.2, 0.0]])

    def test_grid_metric_values(self):
        n = 9
        vals = np.broadcast_to(np.eye(2) * 2.0, (n, n, 2, 2)).tolist()
        raw = {"manifold": {"name": "euclidean:2"}, "body": {"d": 2, "N": 17},
               "material": {"lagrangian": "svk-incompatible", "g_grid": vals},
               "initial": {"phi": ["x1", "x2"]}}
        g = scenario_from_dict(raw).reference_metric()(np.array([[0.3, 0.7], [1.05, -0.01]]))
        assert np.allclose(g, 2 * np.eye(2))

    def test_prescribed_motion(self):
        raw = {"manifold": {"name": "sphere"}, "body": {"d": 1, "N": 9},
               "material": {"lagrangian": "dirichlet"},
               "initial": {"phi": ["pi/2", "x + t"]}, "time": {"dt": 0.1, "steps": 4}}
        sc = scenario_from_dict(raw)
        assert sc.is_prescribed_motion()
        m = sc.motion()
        assert np.allclose(m.values[-1, :, 1], m.grid.x[..., 0] + 0.4)


class TestExpression:
    def test_grammar(self):
        e = Expression("2*sin(pi*x)**2 - exp(-x)/3", ["x"])
        assert e(x=0.25) == pytest.approx(2 * np.sin(np.pi / 4) ** 2 - np.exp(-0.25) / 3)

    @pytest.mark.parametrize("text", ["x.real", "open('f')", "[x]", "x if x else 1", "y", "'a'"])
    def test_rejects(self, text):
        with pytest.raises(ValueError):
            Expression(text, ["x"])


class TestFieldIO:
    def test_round_trip(self, tmp_path):
        times = np.array([0.0, 0.5])
        x = np.stack(np.meshgrid(np.linspace(0, 1, 3), np.linspace(0, 1, 4), indexing="ij"), -1)
        vals = np.random.default_rng(0).normal(size=(2, 3, 4, 2))
        path = fieldio.write_field(tmp_path / "f.csv", times, x, vals)
        header, table = fieldio.read_field(path)
        assert header == ["t", "x1", "x2", "y1", "y2"]
        assert table.shape == (24, 5)
        assert np.array_equal(table[:, 3:].reshape(vals.shape), vals)
        assert np.array_equal(table[:12, 0], np.zeros(12))
        assert np.array_equal(table[:4, 2], np.linspace(0, 1, 4))

    def test_name_count_checked(self, tmp_path):
        with pytest.raises(ValueError):
            fieldio.write_field(tmp_path / "f.csv", [0.0], np.zeros((3, 1)), np.zeros((1, 3, 2)), ["a"])

    def test_tensor_names(self):
        assert fieldio.tensor_component_names("A2", (1, 1, 2)) == ["A2_0_0_0", "A2_0_0_1"]
