import logging
from pathlib import Path

from config.exceptions import ConfigurationError
from config.serializers import validate_config
from runs.artifacts import read_frame
from runs.command import IncidenceCommand
from runs.plotting import event_study_svg, sweep_svg
from runs.serializers import ReportPlotConfigSerializer

logger = logging.getLogger(__name__)

# csv artifact -> (svg name, renderer)
RENDERERS = {
    "event_study.csv": ("event_study.svg", lambda frame, title: event_study_svg(frame, title=title)),
    "sweep.csv": ("sweep.svg", lambda frame, title: sweep_svg(frame)),
}


class Command(IncidenceCommand):
    help = "Re-render SVG plots from CSV artifacts of an earlier run (plot)."
    command_name = "report"
    actions = ("plot",)

    def add_action_arguments(self, parser):
        parser.add_argument("--input", dest="input_dir", default=None, help="Artifact directory to read")

    def extra_argv(self, options):
        return ["--input", options["input_dir"]] if options.get("input_dir") else []

    def handle_plot(self, ctx, options):
        data = validate_config(ReportPlotConfigSerializer, ctx.raw_config)
        directory = options.get("input_dir") or data.get("input")
        if not directory:
            raise ConfigurationError("no artifact directory given (--input or config 'input')", key="input")
        directory = Path(directory)

        rendered = []
        for csv_name, (svg_name, render) in RENDERERS.items():
            path = directory / csv_name
            if not path.exists():
                continue
            ctx.writer.write_svg(svg_name, render(read_frame(path), data["title"]))
            rendered.append(csv_name)
        if not rendered:
            raise ConfigurationError(f"{directory} holds none of {sorted(RENDERERS)}", key="input")
        logger.info(f"Rendered plots for {rendered} from {directory}")
        return {**data, "input": str(directory), "rendered": rendered}
