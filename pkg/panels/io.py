# panels/io.py
"""
Panel datasets on disk: firms.csv, workers.csv and dataset.json (ground
truth, generator configs and seed).
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from config.exceptions import ConfigurationError
from panels.firms import FIRM_COLUMNS, FirmPanelConfig, generate_firm_panel
from panels.sectors import SectorTreeConfig, generate_sector_tree
from panels.workers import WORKER_COLUMNS, WorkerPanelConfig, generate_worker_panel
from runs.artifacts import ArtifactWriter, read_frame

logger = logging.getLogger(__name__)

FIRMS_CSV = "firms.csv"
WORKERS_CSV = "workers.csv"
DATASET_JSON = "dataset.json"


@dataclass
class PanelDataset:
    firms: object
    workers: object = None
    truth: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    seed: int = 0
    sectors: object = None


def replication_seed(seed, rep):
    """Seed of replication rep, an independent stream derived from (seed, rep)."""
    return int(np.random.SeedSequence([int(seed), int(rep)]).generate_state(1, dtype=np.uint64)[0])


def generate_panel(sector_config=None, firm_config=None, worker_config=None, seed=0, with_workers=True):
    """Sector tree, firm panel and (optionally) worker panel from one seed."""
    sector_config = sector_config or SectorTreeConfig()
    firm_config = firm_config or FirmPanelConfig()
    worker_config = worker_config or WorkerPanelConfig()
    tree_seed, firm_seed, worker_seed = np.random.SeedSequence(seed).spawn(3)

    tree = generate_sector_tree(sector_config, tree_seed)
    firms, truth = generate_firm_panel(tree, firm_config, firm_seed)
    workers = None
    if with_workers:
        workers, worker_truth = generate_worker_panel(firms, worker_config, worker_seed)
        truth.update(worker_truth)
    config = {"sectors": sector_config.to_dict(), "firms": firm_config.to_dict()}
    if with_workers:
        config["workers"] = worker_config.to_dict()
    return PanelDataset(firms=firms, workers=workers, truth=truth, config=config, seed=seed, sectors=tree.frame)


def write_panel(dataset, out_dir):
    """
    Write the dataset into out_dir, or into an ArtifactWriter's staging area.

    A plain directory is written atomically through its own writer.
    """
    if isinstance(out_dir, ArtifactWriter):
        writer, owned = out_dir, False
    else:
        writer, owned = ArtifactWriter(out_dir), True
    try:
        writer.write_csv(FIRMS_CSV, dataset.firms[FIRM_COLUMNS])
        if dataset.workers is not None:
            writer.write_csv(WORKERS_CSV, dataset.workers[WORKER_COLUMNS])
        writer.write_json(DATASET_JSON, {"truth": dataset.truth, "config": dataset.config, "seed": dataset.seed})
        if owned:
            writer.commit()
    except BaseException:
        if owned:
            writer.discard()
        raise
    return writer


def read_panel(directory, with_workers=True):
    directory = Path(directory)
    firms_path = directory / FIRMS_CSV
    if not firms_path.exists():
        raise ConfigurationError(f"no {FIRMS_CSV} in {directory}", key="input")
    firms = read_frame(firms_path)
    missing = [c for c in FIRM_COLUMNS if c not in firms.columns]
    if missing:
        raise ConfigurationError(f"{FIRMS_CSV} lacks columns {missing}", key="input")

    workers = None
    workers_path = directory / WORKERS_CSV
    if with_workers and workers_path.exists():
        workers = read_frame(workers_path)

    meta = {}
    meta_path = directory / DATASET_JSON
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    logger.info(f"Read panel from {directory}: {len(firms)} firm-years")
    return PanelDataset(
        firms=firms,
        workers=workers,
        truth=meta.get("truth", {}),
        config=meta.get("config", {}),
        seed=meta.get("seed", 0),
    )
