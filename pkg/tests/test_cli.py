import pytest

from lseig.cli import build_parser, main


def test_parser_globals_either_side():
    a = build_parser().parse_args(["--quad-degree", "4", "apriori", "--out", "x"])
    b = build_parser().parse_args(["apriori", "--out", "x", "--quad-degree", "4"])
    assert a.quad_degree == b.quad_degree == 4
    assert build_parser().parse_args(["adaptive", "--out", "x", "--theta", "0.2,0.4"]).theta == (0.2, 0.4)


@pytest.mark.parametrize("bad", [["adaptive", "--out", "x", "--theta", "1.5"],
                                 ["apriori", "--out", "x", "--sigma", "p2"],
                                 ["apriori"]])
def test_parser_rejects(bad):
    with pytest.raises(SystemExit):
        build_parser().parse_args(bad)


def test_apriori_cli_deterministic(tmp_path, capsys):
    args = ["apriori", "--formulation", "f1", "--sigma", "bdm1", "--levels", "2", "--out"]
    assert main(args + [str(tmp_path / "a")]) == 0
    assert main(args + [str(tmp_path / "b")]) == 0
    assert "FOSLS-BDM1" in capsys.readouterr().out
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_dump_flags(tmp_path):
    assert main(["apriori", "--levels", "1", "--out", str(tmp_path), "--dump-mesh", "--dump-matrices"]) == 0
    names = {p.name for p in tmp_path.iterdir()}
    assert any(n.endswith(".txt") for n in names)
    assert any(n.endswith(".mtx") for n in names)


def test_adaptive_cli(tmp_path, capsys):
    assert main(["adaptive", "--theta", "0.5", "--max-dofs", "1500", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "theta=0.50" in out and "theta=1.00" in out
    assert (tmp_path / "adaptive_summary.csv").exists()


def test_oracle_rejects_short_sequence(tmp_path, capsys):
    assert main(["oracle", "lshape", "--out", str(tmp_path), "--max-level", "2"]) == 2
    assert "five levels" in capsys.readouterr().err
