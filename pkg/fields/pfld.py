"""
PFLD v1 field files.

Layout (little-endian):

    magic    4 bytes  b'PFLD'
    version  u32      1
    rank     u8       tag from RANK_TAGS
    n        u32      grid points per dimension
    ncomp    u8       stored components (3**order; sym2/antisym2 keep all 9)
    ntime    u32      number of time samples
    data     f64      ntime * ncomp * n**3 values, time-major, then component,
                      then the grid with i (x1) fastest
"""

import logging
from pathlib import Path

import numpy as np

from .exceptions import FieldFormatError, GridError
from .grid import Grid, PeriodicField, Rank


logger = logging.getLogger(__name__)

MAGIC = b'PFLD'
VERSION = 1

HEADER = np.dtype([
    ('magic', 'S4'),
    ('version', '<u4'),
    ('rank', 'u1'),
    ('n', '<u4'),
    ('ncomp', 'u1'),
    ('ntime', '<u4'),
])

RANK_TAGS = {
    Rank.SCALAR: 0,
    Rank.VECTOR: 1,
    Rank.SYM2: 2,
    Rank.ANTISYM2: 3,
    Rank.RANK3: 4,
    Rank.TENSOR2: 5,
}
TAG_RANKS = {tag: rank for rank, tag in RANK_TAGS.items()}


def _component_count(rank):
    return int(np.prod(rank.component_shape, dtype=int))


def write_fields(path, fields):
    """Write one field or a time series of fields sharing grid and rank."""
    if isinstance(fields, PeriodicField):
        fields = [fields]
    fields = list(fields)
    if not fields:
        raise FieldFormatError('nothing to write')
    first = fields[0]
    for field in fields[1:]:
        if field.grid != first.grid or field.rank is not first.rank:
            raise GridError('a PFLD time series needs one grid and one rank')

    n, ncomp = first.n, _component_count(first.rank)
    header = np.array([(MAGIC, VERSION, RANK_TAGS[first.rank], n, ncomp, len(fields))], dtype=HEADER)
    data = np.stack([
        field.samples.reshape((ncomp, n, n, n)).transpose(0, 3, 2, 1)
        for field in fields
    ]).astype('<f8')

    path = Path(path)
    with path.open('wb') as handle:
        handle.write(header.tobytes())
        handle.write(np.ascontiguousarray(data).tobytes())
    logger.debug('wrote %d %s snapshot(s) on n=%d to %s', len(fields), first.rank.value, n, path)
    return path


def read_fields(path):
    """Read every time sample of a PFLD file as a list of PeriodicField."""
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.itemsize:
        raise FieldFormatError(f'{path}: file is shorter than the {HEADER.itemsize}-byte header')
    header = np.frombuffer(raw, dtype=HEADER, count=1)[0]
    if header['magic'] != MAGIC:
        raise FieldFormatError(f'{path}: bad magic {bytes(header["magic"])!r}')
    if header['version'] != VERSION:
        raise FieldFormatError(f'{path}: unsupported version {int(header["version"])}')
    try:
        rank = TAG_RANKS[int(header['rank'])]
    except KeyError:
        raise FieldFormatError(f'{path}: unknown rank tag {int(header["rank"])}') from None
    n, ncomp, ntime = int(header['n']), int(header['ncomp']), int(header['ntime'])
    if ncomp != _component_count(rank):
        raise FieldFormatError(f'{path}: {rank.value} needs {_component_count(rank)} components, header says {ncomp}')
    try:
        grid = Grid(n)
    except GridError as exc:
        raise FieldFormatError(f'{path}: {exc}') from None

    expected = HEADER.itemsize + 8 * ntime * ncomp * n ** 3
    if len(raw) != expected:
        raise FieldFormatError(f'{path}: expected {expected} bytes, found {len(raw)}')

    data = np.frombuffer(raw, dtype='<f8', offset=HEADER.itemsize).reshape((ntime, ncomp, n, n, n))
    try:
        return [
            PeriodicField(grid, rank, snapshot.transpose(0, 3, 2, 1).reshape(rank.component_shape + grid.shape))
            for snapshot in data
        ]
    except GridError as exc:
        raise FieldFormatError(f'{path}: {exc}') from None


def read_field(path):
    """Read a single-snapshot PFLD file."""
    fields = read_fields(path)
    if len(fields) != 1:
        raise FieldFormatError(f'{path}: expected one time sample, found {len(fields)}')
    return fields[0]
