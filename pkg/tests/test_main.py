import filecmp
from pathlib import Path

import pytest

from mtfcost.config import STATS
from mtfcost.main import EXIT_IO, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, exit_code_for, main


def _paths(out: str):
    return [Path(line) for line in out.splitlines() if line.endswith((".csv", ".json"))]


class TestMain:
    """Command-line runs end to end."""

    def test_analytic(self, tmp_path, capsys):
        assert main(["analytic", "--family", "exp(1)", "--t", "1", "--grid", "11", "--out", str(tmp_path)]) == EXIT_OK
        paths = _paths(capsys.readouterr().out)
        assert [p.suffix for p in paths] == [".csv", ".json"]
        assert all(p.exists() for p in paths)

    def test_lru_prints_probability(self, tmp_path, capsys):
        code = main(["lru", "--family", "exp(1)", "--t", "1", "--delta", "0.5", "--out", str(tmp_path)])
        assert code == EXIT_OK
        assert capsys.readouterr().out.splitlines()[0] == "0.25"

    def test_pac(self, tmp_path):
        args = ["lru", "--family", "pareto(-0.5)", "--t", "2", "--delta", "0.3", "--pac", "--out", str(tmp_path)]
        assert main(args) == EXIT_OK

    @pytest.mark.parametrize("args", [
        ["exact", "--n", "100000", "--t", "1"],
        ["analytic", "--family", "pareto(0.5)", "--t", "1"],
        ["analytic", "--t", "1", "--stationary"],
        ["lru", "--t", "1"],
        ["simulate", "--t", "0", "--validate", "--m", "100"],
    ])
    def test_usage_errors(self, tmp_path, args):
        assert main(args + ["--out", str(tmp_path)]) == EXIT_USAGE

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["analytic", "--t", "1", "--grid", "5", "--out", str(blocker / "sub")]) == EXIT_IO

    def test_validation_failure(self, tmp_path, monkeypatch):
        monkeypatch.setitem(STATS, "ks_threshold", 1e-9)
        args = ["simulate", "--n", "50", "--m", "200", "--t", "1", "--validate", "--out", str(tmp_path)]
        assert main(args) == EXIT_VALIDATION
        assert list(tmp_path.glob("*.csv"))

    def test_simulate_is_reproducible(self, tmp_path):
        for name in ("a", "b"):
            args = ["simulate", "--n", "100", "--m", "500", "--t", "1", "--seed", "9", "--out", str(tmp_path / name)]
            assert main(args) == EXIT_OK
        (first,) = (tmp_path / "a").glob("*.csv")
        assert filecmp.cmp(first, tmp_path / "b" / first.name, shallow=False)

    def test_config_file(self, tmp_path, capsys):
        config = tmp_path / "run.cfg"
        config.write_text("family = geometric(0.5)\nt = 0.6931471805599453\ngrid = 7\n")
        assert main(["analytic", "--config", str(config), "--out", str(tmp_path / "out")]) == EXIT_OK
        csv_path = _paths(capsys.readouterr().out)[0]
        assert len(csv_path.read_text().splitlines()) == 8

    def test_metrics_file(self, tmp_path):
        metrics = tmp_path / "metrics.prom"
        args = ["order-check", "--t", "1", "--grid", "21", "--out", str(tmp_path), "--metrics-file", str(metrics)]
        assert main(args) == EXIT_OK
        assert "mtf_commands_total" in metrics.read_text()

    def test_exit_codes(self):
        assert exit_code_for(PermissionError("denied")) == EXIT_IO
        assert exit_code_for(RuntimeError("boom")) == 1
