from io import StringIO

from rich.console import Console

from src.monte_carlo import Report
from src.verify import CheckResult
from src.visualizer import Visualizer


def make_visualizer():
    return Visualizer(Console(file=StringIO(), width=160, color_system=None))


def test_checks_table():
    vis = make_visualizer()
    vis.show_checks([CheckResult("R(a,b)", True, "exact"), CheckResult("Fejer", False, "gap 1e-3")])
    text = vis.console.file.getvalue()
    assert "PASS" in text and "FAIL" in text
    assert "gap 1e-3" in text


def test_report():
    vis = make_visualizer()
    report = Report("clt", {}, estimates=[{"k": 2, "value": 0.25, "se": 0.01}],
                    flags={"skew_small": True}, notes=["centering: exact limit means"])
    vis.show_report(report)
    text = vis.console.file.getvalue()
    assert "clt estimates" in text
    assert "skew_small" in text
    assert "exact limit means" in text


def test_spectrum_summary(small_spectrum):
    vis = make_visualizer()
    vis.show_spectrum_summary(small_spectrum, {"N0(T)": 5, "ratio": 0.123456789012})
    text = vis.console.file.getvalue()
    assert "primitive classes: 5" in text
    assert "0.123456789" in text
