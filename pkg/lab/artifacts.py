"""CSV tables and JSON documents written by the lab commands."""

import csv
import json
import logging
import math
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .models import RunManifest


logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.json'


def _plain(value):
    """numpy scalars and arrays to plain Python; non-finite floats to None."""
    if isinstance(value, dict):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _cell(value):
    value = _plain(value)
    if isinstance(value, float):
        return repr(value)
    return '' if value is None else value


def write_csv(path, rows, columns=None):
    """Write ``rows`` (dicts) with fixed ``repr`` float formatting; returns the path."""
    rows = list(rows)
    if columns is None:
        columns = list(rows[0]) if rows else []
    path = Path(path)
    with path.open('w', newline='') as handle:
        writer = csv.DictWriter(handle, fieldnames=columns, lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({column: _cell(row.get(column)) for column in columns})
    logger.debug('wrote %d rows to %s', len(rows), path)
    return path


def write_json(path, document):
    path = Path(path)
    path.write_text(json.dumps(_plain(document), sort_keys=True, indent=2) + '\n')
    logger.debug('wrote %s', path)
    return path


def _finish(manifest, out_dir, started):
    manifest.wall_clock = time.perf_counter() - started
    manifest.output_paths = [str(path) for path in manifest.output_paths] + [str(out_dir / MANIFEST_NAME)]
    write_json(out_dir / MANIFEST_NAME, manifest.as_document())
    manifest.save()
    missing = manifest.missing_outputs()
    if missing:
        logger.warning('%s run is missing outputs: %s', manifest.command, ', '.join(missing))
    logger.info('%s run finished in %.2fs: %s', manifest.command, manifest.wall_clock, manifest.verdict)


@contextmanager
def recorded_run(command, config, seed, out_dir, tolerances=None):
    """
    Create the output directory and a RunManifest, yield the manifest, then
    time the run, save it and write ``manifest.json`` next to the outputs.

    Errors inside the block mark the manifest as 'error' and are re-raised;
    a failure to record that error is logged and does not replace it.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(command=command, config=_plain(config), seed=seed, tolerances=_plain(tolerances or {}))
    started = time.perf_counter()
    try:
        yield manifest
    except Exception as exc:
        manifest.verdict = 'error'
        manifest.message = str(exc)
        try:
            _finish(manifest, out_dir, started)
        except Exception:
            logger.exception('could not record the failed %s run', command)
        raise
    _finish(manifest, out_dir, started)
