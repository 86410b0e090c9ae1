"""
Markov IFS workbench (mifs)

This program is free software; you can redistribute it and/or modify it under the terms of the
GNU General Public License as published by the Free Software Foundation; either version 2 of the
License, or (at your option) any later version.  See LICENSE.txt.

Created on:  10/19/26

Writing run reports and rendering them.

Reports are JSON with sorted keys and every float rounded to 12 significant digits, so identical
runs give identical files.  Non-finite floats are written as the strings 'inf', '-inf' and 'nan'.
Rendering reads the geometry block of each depth and draws one SVG per depth plus a CSV dump of
its curves.
"""

import csv
import json
import math
from logging import getLogger
from pathlib import Path
from typing import Any

import numpy as np
from matplotlib import pyplot as plt

from mifs.extensions.presolution.depth_sweep import DepthResult
from mifs.mifs_model.curves import CurveSample

logger = getLogger(__name__)

SIGNIFICANT_DIGITS = 12
REPORT_NAME = 'mifs_report.json'
# samples kept per curve and polyline in a report
GEOMETRY_SAMPLES = 256
SVG_SALT = 'mifs'
CSV_HEADER = ('curveId', 't', 'x', 'y', 'tx', 'ty')

# polyline name prefix -> (colour, line width)
_STYLES = {
    'Lambda': ('0.6', 0.5),
    'Delta': ('tab:red', 0.8),
    'Xi': ('tab:blue', 0.8),
    'Theta': ('tab:cyan', 0.6),
    'T': ('tab:green', 0.8),
    'S': ('tab:olive', 0.6),
    'R': ('tab:purple', 0.7),
    'A': ('tab:orange', 0.7),
}
_CURVE_STYLES = {'wss': ('black', 1.2), 'gamma': ('tab:brown', 1.0)}


def normalize(obj: Any) -> Any:
    """plain JSON types with floats at fixed precision"""
    match obj:
        case bool() | None | str():
            return obj
        case int() | np.integer():
            return int(obj)
        case float() | np.floating():
            x = float(obj)
            if math.isnan(x):
                return 'nan'
            if math.isinf(x):
                return 'inf' if x > 0 else '-inf'
            return float(f'{x:.{SIGNIFICANT_DIGITS}g}')
        case np.bool_():
            return bool(obj)
        case np.ndarray():
            return normalize(obj.tolist())
        case dict():
            return {str(k): normalize(v) for k, v in obj.items()}
        case list() | tuple():
            return [normalize(v) for v in obj]
        case _:
            raise TypeError(f'cannot write {type(obj).__name__} to a report')


def dumps(report: dict[str, Any]) -> str:
    return json.dumps(normalize(report), sort_keys=True, indent=1) + '\n'


def write_report(report: dict[str, Any], output_path: Path, name: str = REPORT_NAME) -> Path:
    target = Path(output_path) / name
    target.write_text(dumps(report), encoding='utf-8')
    logger.info('Report written to %s', target)
    return target


def read_report(report_file: Path) -> dict[str, Any]:
    report_file = Path(report_file)
    if not report_file.is_file():
        logger.error('Report file %s does not exist', report_file)
        raise FileNotFoundError(f'Invalid report file: {report_file}')
    try:
        return json.loads(report_file.read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        logger.error('Report file %s is not valid JSON: %s', report_file, e)
        raise ValueError(f'Report file is not valid JSON: {e}') from e


# ---- geometry


def _thin(points: np.ndarray, count: int = GEOMETRY_SAMPLES) -> np.ndarray:
    if len(points) <= count:
        return points
    keep = np.unique(np.linspace(0, len(points) - 1, count).round().astype(int))
    return points[keep]


def _curve_entry(curve: CurveSample, curve_id: str) -> dict[str, Any]:
    keep = np.unique(
        np.linspace(0, len(curve) - 1, min(len(curve), GEOMETRY_SAMPLES)).round().astype(int)
    )
    return {
        'curveId': curve_id,
        't': curve.parameters()[keep],
        'points': curve.points[keep],
        'tangents': curve.tangents[keep],
    }


def region_polylines(region, prefix: str) -> dict[str, np.ndarray]:
    """outlines of every piece of a piece region, keyed prefix.k.l"""
    lines = {}
    for k, piece in enumerate(getattr(region, 'pieces', ())):
        for j, line in enumerate(piece.outline(GEOMETRY_SAMPLES)):
            lines[f'{prefix}.{k}.{j}'] = line
    return lines


def depth_geometry(result: DepthResult, regions=None) -> dict[str, Any]:
    """
    the drawable sets of one depth: strata, obstructions and wells as closed polylines, the
    strong stable curve, gamma and the invariant curves as sampled curves
    :param regions: an optional repeller/attractor pair whose tubes are added as R and A
    """
    pre = result.presolution
    polylines = {
        name: line for name, line in pre.wells.boundary_polylines(GEOMETRY_SAMPLES).items()
    }
    if regions is not None:
        polylines.update(region_polylines(regions.repelling, 'R'))
        polylines.update(region_polylines(regions.attracting, 'A'))
    curves = []
    if not pre.curve.curve.is_empty and len(pre.curve.curve) > 1:
        curves.append(_curve_entry(pre.curve.curve, 'wss'))
    curves.append(_curve_entry(pre.gamma.curve, 'gamma'))
    if result.curves is not None:
        for word, curve in sorted(result.curves.curves.items()):
            if len(curve) > 1:
                curves.append(_curve_entry(curve, f'c{"".join(map(str, word))}'))
    return {
        'polylines': {k: _thin(np.asarray(v)) for k, v in sorted(polylines.items())},
        'curves': curves,
    }


# ---- rendering


def _style(name: str) -> tuple[str, float]:
    head = name.split('.')[0].rstrip('0123456789')
    return _STYLES.get(head, ('0.3', 0.5))


def render_depth(block: dict[str, Any], svg_file: Path) -> Path:
    """one SVG of the home disc with every set of a depth block"""
    geometry = block['geometry']
    plt.switch_backend('Agg')
    plt.rcParams['svg.hashsalt'] = SVG_SALT
    fig, ax = plt.subplots(figsize=(6, 6))
    for name, line in geometry['polylines'].items():
        pts = np.asarray(line, dtype=float).reshape(-1, 2)
        colour, width = _style(name)
        ax.plot(pts[:, 0], pts[:, 1], color=colour, lw=width)
    for curve in geometry['curves']:
        pts = np.asarray(curve['points'], dtype=float).reshape(-1, 2)
        colour, width = _CURVE_STYLES.get(curve['curveId'], ('tab:pink', 0.8))
        ax.plot(pts[:, 0], pts[:, 1], color=colour, lw=width)
    ax.set_aspect('equal')
    ax.set_title(f'depth {block["depth"]}')
    fig.savefig(svg_file, format='svg', metadata={'Date': None})
    plt.close(fig)
    return svg_file


def write_curves_csv(block: dict[str, Any], csv_file: Path) -> Path:
    with open(csv_file, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, delimiter=',')
        writer.writerow(CSV_HEADER)
        for curve in block['geometry']['curves']:
            for t, (x, y), (tx, ty) in zip(curve['t'], curve['points'], curve['tangents']):
                writer.writerow(normalize([curve['curveId'], t, x, y, tx, ty]))
    return csv_file


def render_report(report: dict[str, Any], svg_dir: Path) -> list[Path]:
    """
    draw every depth of a run report that carries geometry
    :return: the files written, SVG then CSV per depth
    """
    svg_dir = Path(svg_dir)
    svg_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for block in report.get('depths', []) or []:
        if 'geometry' not in block:
            logger.info('depth %s has no geometry, nothing drawn', block.get('depth'))
            continue
        depth = block['depth']
        written.append(render_depth(block, svg_dir / f'depth_{depth}.svg'))
        written.append(write_curves_csv(block, svg_dir / f'depth_{depth}_curves.csv'))
    logger.info('Rendered %d files into %s', len(written), svg_dir)
    return written
