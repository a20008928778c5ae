from mtfcost.config import EXACT, INVERSION, QUADRATURE, STATS, get_config


class TestConfig:
    """Settings dictionaries and dot-path lookup."""

    def test_sections_hold_numeric_defaults(self):
        assert QUADRATURE["abs_tol"] > 0
        assert QUADRATURE["rel_tol"] >= 0
        assert 0 < INVERSION["quantile_cap"] < 1
        assert EXACT["max_n"] >= 1
        assert all(0 < level < 1 for level in EXACT["panel_levels"])
        assert 0 < STATS["dkw_confidence"] < 1

    def test_dot_path_lookup(self):
        assert get_config("EXACT.max_n") == EXACT["max_n"]
        assert get_config("STATS.tv_bins") == STATS["tv_bins"]

    def test_missing_path_returns_default(self):
        assert get_config("EXACT.nope") is None
        assert get_config("NOPE.max_n", 7) == 7
        assert get_config("EXACT.max_n.deeper", "x") == "x"
