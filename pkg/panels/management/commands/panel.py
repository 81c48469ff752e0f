import logging

from config.serializers import validate_config
from panels.firms import FirmPanelConfig
from panels.io import generate_panel, write_panel
from panels.sectors import SectorTreeConfig
from panels.serializers import PanelGenerateConfigSerializer
from panels.workers import WorkerPanelConfig
from runs.command import IncidenceCommand

logger = logging.getLogger(__name__)


class Command(IncidenceCommand):
    help = "Generate a synthetic firm/worker panel with known effects (generate)."
    command_name = "panel"
    actions = ("generate",)

    def handle_generate(self, ctx, options):
        data = validate_config(PanelGenerateConfigSerializer, ctx.raw_config)
        dataset = generate_panel(
            SectorTreeConfig(**data["sectors"]),
            FirmPanelConfig(**data["firms"]),
            WorkerPanelConfig(**data["workers"]),
            seed=ctx.seed,
            with_workers=data["with_workers"],
        )
        write_panel(dataset, ctx.writer)
        ctx.manifest["truth"] = dataset.truth
        workers = 0 if dataset.workers is None else len(dataset.workers)
        logger.info(f"Generated {len(dataset.firms)} firm-years and {workers} worker-years")
        return {**dataset.config, "with_workers": data["with_workers"]}
