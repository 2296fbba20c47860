"""Figure rendering from synthetic CSVs matching the harness schema."""

import csv

import pytest

import figures

COLUMNS = ["kind", "p", "ratio", "B", "n", "N_y", "q", "c_q", "seed",
           "empirical_q", "approx_q_mc", "analytic_Q", "mean_mse_mc", "var_mse_mc",
           "B1", "B2", "S", "R", "kappa_Z", "c_Z"]

KINDS = ["continuous", "incidence", "proportion", "count", "survival"]
B_LIST = [1, 2, 4, 8, 16, 48]


def synthetic_rows(ratio="1:1", p_values=(1, 2, 5), best_b=4):
    """V-shaped curves with a known minimum at best_b."""
    rows = []
    for kind in KINDS:
        for p in p_values:
            for b in B_LIST:
                base = 1.0 + 0.1 * abs(b - best_b)
                rows.append({
                    "kind": kind, "p": p, "ratio": ratio, "B": b, "n": 48,
                    "N_y": 1000, "q": 0.95, "c_q": 1.645, "seed": 1,
                    "empirical_q": base, "approx_q_mc": base * 0.98,
                    "analytic_Q": base * 0.97, "mean_mse_mc": base * 0.8,
                    "var_mse_mc": 0.01, "B1": 1.0, "B2": 1.0, "S": 0.0, "R": 1.0,
                    "kappa_Z": 0.0, "c_Z": 10.0,
                })
    return rows


def write_rows(path, rows, columns=COLUMNS):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)


@pytest.fixture
def grid_csv(tmp_path):
    path = tmp_path / "grid.csv"
    write_rows(path, synthetic_rows())
    return path


class TestRender:
    def test_image_written(self, grid_csv, tmp_path):
        out = tmp_path / "grid.png"
        metadata = figures.render(str(grid_csv), str(out), "1:1")
        assert out.exists() and out.stat().st_size > 0
        assert len(metadata) == 15  # 5 kinds x 3 p panels

    def test_argmin_annotation(self, grid_csv, tmp_path):
        metadata = figures.render(str(grid_csv), str(tmp_path / "x.png"), "1:1")
        for info in metadata.values():
            assert info["argmin_B"] == 4
            assert info["B_list"] == B_LIST

    def test_missing_analytic_column_warns(self, tmp_path):
        path = tmp_path / "noan.csv"
        columns = [c for c in COLUMNS if c != "analytic_Q"]
        write_rows(path, synthetic_rows(), columns)
        out = tmp_path / "noan.png"
        with pytest.warns(UserWarning, match="analytic_Q"):
            metadata = figures.render(str(path), str(out), "1:1")
        assert out.exists() and metadata

    def test_missing_required_column_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        columns = [c for c in COLUMNS if c != "empirical_q"]
        write_rows(path, synthetic_rows(), columns)
        with pytest.raises(ValueError, match="empirical_q"):
            figures.render(str(path), str(tmp_path / "bad.png"), "1:1")

    def test_missing_ratio_rejected(self, grid_csv, tmp_path):
        with pytest.raises(ValueError, match="2:1"):
            figures.render(str(grid_csv), str(tmp_path / "x.png"), "2:1")

    def test_single_p_layout(self, tmp_path):
        path = tmp_path / "p1.csv"
        write_rows(path, synthetic_rows(ratio="2:1", p_values=(1,)))
        out = tmp_path / "p1.png"
        metadata = figures.render(str(path), str(out), "2:1")
        assert len(metadata) == 5  # 5 kinds x 1 p


class TestCli:
    def test_main_smoke(self, grid_csv, tmp_path, capsys):
        out = tmp_path / "cli.png"
        assert figures.main(["--csv", str(grid_csv), "--out", str(out),
                             "--ratio", "1:1"]) == 0
        captured = capsys.readouterr().out
        assert "argmin B = 4" in captured
        assert out.exists()

    def test_main_error_path(self, tmp_path, capsys):
        missing = tmp_path / "nope.csv"
        missing.write_text("kind,p\n")
        assert figures.main(["--csv", str(missing), "--out",
                             str(tmp_path / "x.png"), "--ratio", "1:1"]) == 1
        assert "error" in capsys.readouterr().err
