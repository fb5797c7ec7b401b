import json
import subprocess
import sys

import jsonschema
import pytest

from bussgang import cli

FAST = ["--samples", "2e4"]


def run(argv, tmp_path):
    out = tmp_path / "out.json"
    rc = cli.main(argv + ["-o", str(out)])
    return rc, (json.loads(out.read_text()) if rc == 0 else None)


def validate(doc, command):
    schema = json.loads(cli.schema_path(command).read_text())
    jsonschema.validate(doc, schema)


def write_config(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(path)


class TestSchemas:
    @pytest.mark.parametrize(
        "command,argv",
        [
            ("gain", ["gain", "--nl", "soft_clipper(amax=1)"] + FAST),
            ("gain", ["gain", "--nl", "sign", "--method", "closed"]),
            ("decompose", ["decompose", "--nl", "one_bit"] + FAST),
            ("decompose", ["decompose", "--nl", "identity", "--method", "closed"]),
            ("rate", ["rate", "--nl", "third_order", "--sigma2", "1e-9", "1", "1e9"]),
            ("theorem-check", ["theorem-check", "--nl", "sign", "--rho", "0.3"] + FAST),
            ("aqnm", ["aqnm", "--bits", "3"] + FAST),
            ("fig3", ["fig3", "--bits", "1,inf", "--realizations", "2"] + FAST),
        ],
    )
    def test_outputs_validate(self, command, argv, tmp_path):
        if command == "fig3":
            argv = argv + ["--csv", str(tmp_path / "c.csv")]
        rc, doc = run(argv, tmp_path)
        assert rc == 0
        validate(doc, command)
        assert doc["command"] == command and "config" in doc

    @pytest.mark.parametrize("source", ["gaussian", "qpsk"])
    def test_mimo_validates(self, source, tmp_path):
        key = "channel" if source == "qpsk" else "C_x"
        mat = [[1, [0.2, 0.1]], [0.3, 1]] if source == "qpsk" else [[1, [0.5, 0.1]], [[0.5, -0.1], 2]]
        path = write_config(tmp_path, {key: mat, "source": source, "nonlinearity": ["one_bit", "third_order"], "samples": 20000})
        rc, doc = run(["mimo", path], tmp_path)
        assert rc == 0
        validate(doc, "mimo")
        assert doc["config"]["nl_resolved"] == ["one_bit", "third_order"]


class TestCommands:
    def test_gain_all_reports_agreement(self, tmp_path):
        _, doc = run(["gain", "--nl", "third_order"] + FAST, tmp_path)
        assert [e["method"] for e in doc["estimates"]] == ["closed_form", "correlation_mc", "derivative_mc"]
        assert all(a["within_4sigma"] for a in doc["agreement"])

    def test_gain_skips_unavailable_routes(self, tmp_path):
        _, doc = run(["gain", "--nl", "one_bit"] + FAST, tmp_path)
        assert [e["method"] for e in doc["estimates"]] == ["correlation_mc"]

    def test_rate_identity(self, tmp_path):
        _, doc = run(["rate", "--nl", "identity", "--sigma2", "1"], tmp_path)
        assert doc["rates"] == [{"rate": 1.0, "sigma2": 1.0}]

    def test_decompose_closed_sign(self, tmp_path):
        _, doc = run(["decompose", "--nl", "sign", "--method", "closed"], tmp_path)
        assert doc["decomposition"]["distortion_power"] == pytest.approx(0.3633802276324186)

    def test_fig3_writes_csv(self, tmp_path):
        csv_path = tmp_path / "c.csv"
        summary = tmp_path / "s.json"
        argv = ["fig3", "--bits", "2", "--realizations", "2", "--m-rx", "3", "--csv", str(csv_path), "--summary", str(summary)]
        _, doc = run(argv + FAST, tmp_path)
        assert doc["csv_rows"] == 6
        assert len(csv_path.read_text().splitlines()) == 7
        assert json.loads(summary.read_text())["series"] == doc["series"]

    def test_fig3_all_degenerate_writes_nothing(self, tmp_path):
        csv_path = tmp_path / "c.csv"
        _, doc = run(["fig3", "--bits", "inf", "--realizations", "2", "--csv", str(csv_path)] + FAST, tmp_path)
        assert doc["csv_rows"] == 0 and not csv_path.exists()

    def test_stdout(self, capsys):
        assert cli.main(["rate", "--nl", "identity", "--sigma2", "3"]) == 0
        assert json.loads(capsys.readouterr().out)["rates"][0]["rate"] == pytest.approx(0.4150374992788438)


class TestExitCodes:
    @pytest.mark.parametrize(
        "argv,code",
        [
            (["gain", "--nl", "bogus("], 2),
            (["gain", "--nl", "soft_clipper(amax=1)", "--method", "closed"], 3),
            (["gain", "--nl", "sign", "--method", "derivative"] + FAST, 4),
            (["gain", "--nl", "sign", "--cx", "-1"] + FAST, 6),
            (["aqnm", "--nl", "uniform_quantizer(bits=2)"] + FAST, 9),
            (["rate", "--nl", "identity", "--sigma2", "0"], 6),
            (["fig3", "--bits", "0"], 6),
            (["theorem-check", "--nl", "one_bit", "--rho", "1.5"] + FAST, 6),
            (["fig3", "--bits", "1", "--realizations", "1", "--csv", "/nonexistent/dir/c.csv"] + FAST, 8),
        ],
    )
    def test_library_errors(self, argv, code, tmp_path, capsys):
        assert cli.main(argv + ["-o", str(tmp_path / "o.json")]) == code
        assert "bussgang" in capsys.readouterr().err

    @pytest.mark.parametrize(
        "argv",
        [[], ["nope"], ["gain"], ["gain", "--nl", "sign", "--samples", "many"], ["gain", "--nl", "sign", "--seed", "-1"]],
    )
    def test_usage_errors(self, argv):
        with pytest.raises(SystemExit) as exc:
            cli.main(argv)
        assert exc.value.code == cli.USAGE_EXIT


class TestMimoConfig:
    @pytest.mark.parametrize(
        "content,fragment",
        [
            ('{"C_x": [[1, 0]\n, [0, 1]', ":2:"),
            ({"C_x": [[1, 0], [0, 1]], "extra": 1, "nonlinearity": "one_bit"}, "unknown keys"),
            ({"nonlinearity": "one_bit"}, "exactly one"),
            ({"C_x": [[1, 0.5], [0, 1]], "nonlinearity": "one_bit"}, "C_x"),
            ({"C_x": [[1, 2], [2, 1]], "nonlinearity": "one_bit"}, "C_x"),
            ({"C_x": [[1, 0], [0, 1]], "nonlinearity": ["one_bit"]}, "branches"),
            ({"C_x": [[1, 0], [0, 1]], "source": "qpsk", "nonlinearity": "one_bit"}, "channel"),
            ({"C_x": [[1, 0], [0, "x"]], "nonlinearity": "one_bit"}, "C_x[1][1]"),
            ({"C_x": [[1, 0], [0, 1]], "nonlinearity": "one_bit", "samples": 1.5}, "samples"),
            ({"C_x": [[1, 0], [0, 1]], "nonlinearity": "sign"}, "nonlinearity"),
        ],
    )
    def test_config_errors(self, content, fragment, tmp_path, capsys):
        path = write_config(tmp_path, content)
        assert cli.main(["mimo", path]) == 5
        assert fragment in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert cli.main(["mimo", str(tmp_path / "absent.json")]) == 5


class TestConsoleScript:
    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "bussgang.cli", "gain", "--nl", "sign", "--method", "closed"],
            capture_output=True,
            text=True,
            check=True,
        )
        assert json.loads(proc.stdout)["estimates"][0]["value"] == pytest.approx(0.7978845608028654)
