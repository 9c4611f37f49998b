import sys
from pathlib import Path

import pytest

from csreuse.synthetic import synthetic_collection

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def synth():
    """8 systems, 3 teams, 10 conversations of depth 5, 200 passages."""
    return synthetic_collection(seed=0)


@pytest.fixture
def synth_dir(tmp_path, synth):
    paths = synth.write(tmp_path / "data")
    cfg = tmp_path / "experiment.yaml"
    cfg.write_text(
        "\n".join([
            "paths:",
            "  runs: data/runs",
            "  qrels: data/qrels.txt",
            "  topics: data/topics.json",
            "  passages: data/passages.tsv",
            "  team_map: data/teams.tsv",
            "  cache_dir: cache",
            "  output_dir: out",
            "pool:",
            f"  k_pool: {synth.k_pool}",
            "  k_eval: 10",
            "seed: 13",
            "",
        ]),
        encoding="utf-8",
    )
    return tmp_path, cfg, paths
