from typing import List

import numpy as np
import pytest

from tsrkit.parsers.otsl import otsl_parse, otsl_to_grid
from tsrkit.schemas import TableGrid
from tsrkit.synth.corpus import CorpusConfig, CorpusSample, generate_corpus, generate_grid
from tsrkit.synth.watermarks import WatermarkConfig


def grid_from_otsl(text: str) -> TableGrid:
    return otsl_to_grid(otsl_parse(text))


def random_grids(seed: int, n: int, max_rows: int = 20, max_cols: int = 20,
                 span_probability: float = 0.2, max_span: int = 4) -> List[TableGrid]:
    config = CorpusConfig(seed=seed, max_rows=max_rows, max_cols=max_cols,
                          span_probability=span_probability, max_span=max_span,
                          empty_cell_probability=0.0)
    rng = np.random.default_rng(seed)
    return [generate_grid(rng, config) for _ in range(n)]


@pytest.fixture
def grid_2x2() -> TableGrid:
    return grid_from_otsl("C C NL C C NL")


@pytest.fixture(scope="session")
def plain_corpus() -> List[CorpusSample]:
    return generate_corpus(CorpusConfig(seed=42, n_samples=60, max_rows=6, max_cols=6))


@pytest.fixture(scope="session")
def watermark_corpus() -> List[CorpusSample]:
    config = CorpusConfig(seed=3, n_samples=40, max_rows=6, max_cols=6,
                          watermark=WatermarkConfig(enabled=True, probability=0.2, min_iou=0.8))
    return generate_corpus(config)
