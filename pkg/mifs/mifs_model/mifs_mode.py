"""
Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.

Created on:  10/19/26
"""

from enum import Enum, unique


@unique
class MifsMode(Enum):
    """The processing mode for a scenario"""

    VALIDATE = 1  # schema, IFS soundness and the homoclinic certificate only
    RUN = 2  # the weak curve pipeline over every requested depth
    RENDER = 3  # figures and curve dumps from an existing run report
