"""
pytest configuration

Created on:  10/19/26

Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.
"""

import logging
import os
from pathlib import Path

import numpy as np
import pytest

from definitions import PROJECT_ROOT
from mifs.mifs_model.cocycles import FlexiblePath, path_from_dict
from mifs.mifs_model.markov_ifs import Branch, MarkovIfs, RoundDisc
from mifs.mifs_model.planar_maps import Affine, MapChain

logger = logging.getLogger(__name__)

# set the target folder for output from testing
output_path = os.path.join(PROJECT_ROOT, 'tests', 'testing_log')
if not os.path.exists(output_path):
    os.mkdir(output_path)

# set up logger in conftest.py so that it is properly anchored in the test folder.
filename = 'testing.log'
logging.basicConfig(
    filename=os.path.join(output_path, filename),
    filemode='w',
    format='%(asctime)s | %(module)s | %(levelname)s | %(message)s',
    datefmt='%d-%b-%y %H:%M:%S',
    level=logging.DEBUG,  # <-- global change for testing activities is here
)

logging.getLogger('matplotlib').setLevel(logging.WARNING)

SCENARIO_PATH = Path(PROJECT_ROOT, 'data_files', 'scenarios')

# the flexible path of the toy fixed point: diag(0.5, 0.5) -> diag(0.5, 0.6) -> diag(0.5, 1)
TOY_PATH = {
    't': [-1.0, 0.0, 1.0],
    'matrices': [
        [[[0.5, 0.0], [0.0, 0.5]]],
        [[[0.5, 0.0], [0.0, 0.6]]],
        [[[0.5, 0.0], [0.0, 1.0]]],
    ],
    'epsilon': 0.55,
}


def build_toy_ifs() -> MarkovIfs:
    """
    D = B(1), f1 = diag(0.5, 0.6), f2 = 0.05 * p + (0.8, 0)
    q = 0 is the attracting fixed point of f1 and Q = (0.8, 0) = f2(q)
    """
    disc = RoundDisc(np.zeros(2), 1.0)
    f1 = MapChain((Affine(np.diag([0.5, 0.6]), np.zeros(2)),))
    f2 = MapChain((Affine(0.05 * np.eye(2), np.array([0.8, 0.0])),))
    return MarkovIfs((disc,), (Branch(0, 0, f1, label=0), Branch(0, 0, f2, label=1)))


@pytest.fixture()
def toy_ifs() -> MarkovIfs:
    return build_toy_ifs()


@pytest.fixture()
def toy_path() -> FlexiblePath:
    return path_from_dict(TOY_PATH)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20261019)
