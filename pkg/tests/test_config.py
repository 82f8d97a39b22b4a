"""TOML configuration parsing and validation."""

import pytest

from leakywire.config import ConfigError, load_config, parse_config
from leakywire.geometry import CircleLoop, CircularArc, Segment

MINIMAL = """
alpha = 0.0

[curve]
kind = "segment"
length = 20.0
"""


class TestParse:
    def test_minimal_with_defaults(self):
        cfg = parse_config(MINIMAL)
        assert cfg.alpha == 0.0
        assert cfg.workers == 1
        assert cfg.mesh["n_panels"] == 256
        assert cfg.mesh["order"] == 8
        assert cfg.mesh["basis"] == "hat"
        assert cfg.solver["branch_count"] == 6
        assert cfg.solver["rel_tol"] == 1e-10
        assert cfg.hiatus["eps_count"] == 8
        assert cfg.regcheck["kappa"] == 1.0
        assert cfg.regcheck["points"] == [0.15, 0.35, 0.5, 0.65, 0.85]
        assert cfg.eigfun["grid_points"] == 12

    def test_build_curves(self):
        assert isinstance(parse_config(MINIMAL).build_curve(), Segment)
        cfg = parse_config('[curve]\nkind = "circle"\nlength = 3.0\n')
        assert isinstance(cfg.build_curve(), CircleLoop)
        cfg = parse_config('[curve]\nkind = "arc"\nradius = 2.0\n'
                           'angle = 1.0\n')
        arc = cfg.build_curve()
        assert isinstance(arc, CircularArc)
        assert arc.length == pytest.approx(2.0)

    def test_sha256_tracks_source(self):
        a = parse_config(MINIMAL)
        b = parse_config(MINIMAL + "\n# comment\n")
        assert a.config_sha256 != b.config_sha256
        assert len(a.config_sha256) == 64

    def test_echo_contains_resolved_defaults(self):
        echo = parse_config(MINIMAL).echo()
        assert echo["mesh"]["n_panels"] == 256
        assert echo["curve"] == {"kind": "segment", "length": 20.0}


class TestValidation:
    @pytest.mark.parametrize("text,fragment", [
        ("bogus = 1\n[curve]\nkind='segment'\nlength=1.0",
         "unknown key"),
        ("[curve]\nkind = 'triangle'\nlength = 1.0", "curve.kind"),
        ("[curve]\nkind = 'segment'", "curve.length"),
        ("[curve]\nkind = 'segment'\nlength = -2.0", "curve.length"),
        ("[curve]\nkind = 'arc'\nradius = 1.0\nangle = 7.0",
         "curve.angle"),
        ("[curve]\nkind='segment'\nlength=1.0\n[mesh]\norder = 1",
         "mesh.order"),
        ("[curve]\nkind='segment'\nlength=1.0\n[solver]\n"
         "bracket = [-1.0, 2.0]", "solver.bracket"),
        ("[curve]\nkind='segment'\nlength=1.0\n[hiatus]\n"
         "eps_grid = [0.001, 0.01]", "hiatus.eps_grid"),
        ("[curve]\nkind='segment'\nlength=1.0\n[regcheck]\n"
         "points = [1.5]", "regcheck.points"),
        ("[curve]\nkind='segment'\nlength=1.0\n[eigfun]\n"
         "center = [1.0, 2.0]", "eigfun.center"),
        ("workers = 0\n[curve]\nkind='segment'\nlength=1.0",
         "workers"),
        ("alpha = 'x'\n[curve]\nkind='segment'\nlength=1.0", "alpha"),
        ("not toml ][", "invalid TOML"),
    ])
    def test_error_messages_name_the_key(self, text, fragment):
        with pytest.raises(ConfigError, match=fragment):
            parse_config(text)

    def test_load_config_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "absent.toml")

    def test_load_config_roundtrip(self, tmp_path):
        p = tmp_path / "run.toml"
        p.write_text(MINIMAL)
        cfg = load_config(p)
        assert cfg.alpha == 0.0
        assert cfg.source_text == MINIMAL
