import argparse
import json
import logging
import shutil
import sys
import tempfile
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from rich.console import Console
from rich.table import Table

from experiments import get_experiment_declarations, run_experiment
from reproductions.common import ERROR, NON_CONVERGED, SUCCESS
from reproductions.custom import CustomRun, run_custom
from utils.export import build_manifest, to_jsonable, write_json, write_tables
from utils.log import setup_logging
from utils.settings import get_settings

load_dotenv()

logger = logging.getLogger("main")

EXIT_SUCCESS = 0
EXIT_NON_CONVERGED = 2
EXIT_INVALID = 3
EXIT_CODES = {SUCCESS: EXIT_SUCCESS, NON_CONVERGED: EXIT_NON_CONVERGED, ERROR: EXIT_INVALID}

CUSTOM_NAME = "custom"


class ExperimentConfig(BaseModel):
    """A named experiment with parameter overrides, or a custom run.

    Custom-run keys (``model``, ``estimator``, ``times``, ...) may sit at the
    top level of a config file; they are gathered into ``custom``.
    """

    model_config = ConfigDict(extra="forbid")

    experiment: Optional[str] = None
    params: Dict[str, Any] = Field(default_factory=dict)
    custom: Optional[CustomRun] = None
    seed: int = Field(ge=0, lt=2**64)
    workers: Optional[int] = Field(None, gt=0)
    out: Optional[Path] = None

    @model_validator(mode="before")
    @classmethod
    def gather_custom(cls, data: Any) -> Any:
        if isinstance(data, dict) and "custom" not in data:
            keys = [k for k in CustomRun.model_fields if k in data]
            if keys:
                data = dict(data)
                data["custom"] = {k: data.pop(k) for k in keys}
        return data

    @model_validator(mode="after")
    def one_target(self) -> "ExperimentConfig":
        if (self.experiment is None) == (self.custom is None):
            raise ValueError("give exactly one of an experiment name or a custom run")
        if self.custom is not None and self.params:
            raise ValueError("params only apply to named experiments")
        return self

    @property
    def name(self) -> str:
        return self.experiment or CUSTOM_NAME


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge a JSON config file with command-line flags; flags win."""
    data: Dict[str, Any] = {}
    if args.config:
        with open(args.config) as f:
            data = json.load(f)
        if not isinstance(data, dict):
            raise ValueError(f"{args.config} must hold a JSON object")
    if args.experiment:
        data["experiment"] = args.experiment
    for key in ("seed", "workers", "out"):
        value = getattr(args, key)
        if value is not None:
            data[key] = value
    return ExperimentConfig.model_validate(data)


def summary_text(name: str, result: dict) -> str:
    lines = [f"experiment: {name}", f"status: {result['status']}", f"message: {result['message']}"]
    checks = result.get("report", {}).get("checks", {})
    for check, ok in checks.items():
        lines.append(f"  [{'ok' if ok else 'FAILED'}] {check}")
    for table, frame in result.get("tables", {}).items():
        lines.append(f"table {table}: {len(frame)} rows")
    return "\n".join(lines) + "\n"


def print_summary(name: str, result: dict) -> None:
    console = Console()
    table = Table(title=f"{name}: {result['status']}")
    table.add_column("check")
    table.add_column("result")
    for check, ok in result.get("report", {}).get("checks", {}).items():
        table.add_row(check, "[green]ok[/green]" if ok else "[red]failed[/red]")
    console.print(result["message"])
    if table.row_count:
        console.print(table)


def _execute(config: ExperimentConfig, workers: int) -> dict:
    if config.custom is not None:
        return run_custom(seed=config.seed, workers=workers, run=config.custom)
    return run_experiment(config.experiment, config.seed, workers, config.params)


def _check_target(out: Path) -> None:
    if out.exists() and any(out.iterdir()) and not (out / "manifest.json").exists():
        raise FileExistsError(f"{out} is not empty and holds no earlier run; refusing to replace it")


def run(config: ExperimentConfig, as_json: bool = False) -> int:
    """Run one experiment and write its artifacts under ``config.out``.

    Everything is written to a staging directory beside the target first and
    moved into place only when the run did not fail.
    """
    settings = get_settings()
    workers = config.workers or settings.workers
    out = Path(config.out or settings.output_dir / config.name)
    _check_target(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f".{out.name}-", dir=out.parent))
    try:
        logger.info("running %s (seed=%d, workers=%d)", config.name, config.seed, workers)
        result = _execute(config, workers)
        status = result["status"]
        if status == ERROR:
            logger.error("%s failed: %s", config.name, result["message"])
            if as_json:
                print(json.dumps(to_jsonable({k: v for k, v in result.items() if k != "tables"})))
            return EXIT_INVALID
        tables = write_tables(result["tables"], staging / "results")
        report = {"experiment": config.name, "status": status, "message": result["message"], "seed": config.seed, **result["report"]}
        write_json(report, staging / "report.json")
        dumped = config.model_dump(mode="json", exclude={"out", "workers"})
        write_json(build_manifest(config.name, dumped, config.seed, workers, tables, status), staging / "manifest.json")
        (staging / "summary.txt").write_text(summary_text(config.name, result))
        if out.exists():
            shutil.rmtree(out)
        shutil.move(str(staging), str(out))
        logger.info("wrote %s", out)
    finally:
        shutil.rmtree(staging, ignore_errors=True)

    if as_json:
        print(json.dumps(to_jsonable(report)))
    else:
        print_summary(config.name, result)
    return EXIT_CODES[status]


def list_experiments(as_json: bool = False) -> None:
    declarations = get_experiment_declarations()
    if as_json:
        print(json.dumps(to_jsonable(declarations), indent=2))
        return
    table = Table(title="experiments")
    table.add_column("name", no_wrap=True)
    table.add_column("section")
    table.add_column("description")
    for declaration in declarations:
        table.add_row(declaration["name"], declaration["section"], declaration["description"])
    Console().print(table)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Penalized Markov processes: named reproductions and custom runs")
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="run a named experiment or a JSON config")
    target = run_parser.add_mutually_exclusive_group(required=True)
    target.add_argument("--experiment", type=str, help="name from `list`")
    target.add_argument("--config", type=Path, help="JSON config file")
    run_parser.add_argument("--seed", type=int, help="root seed, 0 <= seed < 2^64")
    run_parser.add_argument("--workers", type=int, help="worker processes (default: PENALIZED_WORKERS or logical cores)")
    run_parser.add_argument("--out", type=Path, help="output directory")
    run_parser.add_argument("--json", action="store_true", help="print the report as JSON")

    list_parser = commands.add_parser("list", help="list the named experiments")
    list_parser.add_argument("--json", action="store_true", help="machine-readable listing")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(get_settings().log_level)
    if args.command == "list":
        list_experiments(args.json)
        return EXIT_SUCCESS
    try:
        config = load_config(args)
        return run(config, args.json)
    except (ValidationError, ValueError, OSError) as e:
        # library errors are ValueErrors, so unknown experiment names land here too
        logger.error("invalid config: %s", e)
        print(f"invalid config: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
