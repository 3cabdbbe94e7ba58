"""
Text- und CSV-Berichte
Textberichte werden aus Jinja2-Templates in rangeloop/templates gerendert.
"""
import csv
from pathlib import Path
from typing import Union

from jinja2 import Environment, FileSystemLoader

from ..schemas.equivariance_schema import EquivarianceReport
from ..schemas.retrieval_schema import EvalProtocol, EvalReport

TEMPLATE_DIR = Path(__file__).parent.parent / "templates"

_env = Environment(
    loader=FileSystemLoader(str(TEMPLATE_DIR)),
    trim_blocks=True,
    keep_trailing_newline=True,
    autoescape=False,
)

PathLike = Union[str, Path]


def render_eval_report(report: EvalReport, protocol: EvalProtocol) -> str:
    template = _env.get_template("eval_report.txt.j2")
    return template.render(
        lines=report.as_lines(),
        rule=protocol.rule.value,
        exclusion_window=protocol.exclusion_window,
    )


def write_eval_csv(path: PathLike, report: EvalReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["metric", "value"])
        for name, value in report.metrics().items():
            writer.writerow([name, repr(float(value))])
        writer.writerow(["queries_evaluated", report.queries_evaluated])
        writer.writerow(["queries_total", report.queries_total])
        writer.writerow(["database_size", report.database_size])
        writer.writerow(["search_ms_per_query", f"{report.search_ms_per_query:.4f}"])


def render_equicheck_report(report: EquivarianceReport) -> str:
    return _env.get_template("equicheck_report.txt.j2").render(report=report)


def write_equicheck_csv(path: PathLike, report: EquivarianceReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["shift", "ccm", "rtm", "descriptor"])
        for row in report.rows:
            writer.writerow([row.shift, repr(row.ccm), repr(row.rtm), repr(row.descriptor)])
