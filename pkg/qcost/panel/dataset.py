'''
Bank-year panel of variable cost, outputs, input prices and quasi-fixed
controls, read from CSV and validated before any estimation.
'''
import logging
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from qcost.error import DuplicateObservationError, SchemaError, ValidationError

logger = logging.getLogger(__name__)

ID_COLUMNS = ('bank_id', 'year')
OUTPUTS = ('Y1', 'Y2', 'Y3')
PRICES = ('W1', 'W2', 'W3')
CONTROLS = ('K1', 'K2', 'K3')
REGRESSORS = OUTPUTS + PRICES + CONTROLS
NUMERIC = ('C',) + REGRESSORS
CANONICAL = ID_COLUMNS + NUMERIC
DEFAULT_SCHEMA = {name: name for name in CANONICAL}


@dataclass(frozen=True, eq=False)
class PanelDataset:
    '''
    Validated panel. `frame` holds the canonical columns sorted by bank_id
    then year; `rejections` lists dropped source rows as (row, reason),
    where `row` is the 1-based data row of the input file.
    '''
    frame: pd.DataFrame
    rejections: pd.DataFrame = field(
        default_factory=lambda: pd.DataFrame(columns=['row', 'reason']))

    @classmethod
    def from_frame(cls, frame, rejections=None):
        frame = frame.loc[:, list(CANONICAL)].copy()
        frame['bank_id'] = frame['bank_id'].astype(str)
        frame['year'] = frame['year'].astype(np.int64)
        for name in NUMERIC:
            frame[name] = frame[name].astype(np.float64)
        bad = (frame.loc[:, list(NUMERIC)] <= 0).any(axis=1)
        if bad.any():
            raise ValidationError(
                '{} rows carry non-positive values'.format(int(bad.sum())))
        _check_structure(frame)
        frame = frame.sort_values(['bank_id', 'year'], kind='mergesort')
        frame = frame.reset_index(drop=True)
        if rejections is None:
            rejections = pd.DataFrame(columns=['row', 'reason'])
        return cls(frame=frame, rejections=rejections)

    @property
    def bank_ids(self):
        return tuple(pd.unique(self.frame['bank_id']))

    @property
    def years(self):
        return tuple(range(int(self.frame['year'].min()),
            int(self.frame['year'].max()) + 1))

    @property
    def n_banks(self):
        return len(self.bank_ids)

    @property
    def T(self):
        return len(self.years)

    def __len__(self):
        return len(self.frame)

    def write_rejections(self, path):
        self.rejections.to_csv(path, index=False)


def load_panel(path, schema=None):
    '''
    Read a UTF-8 CSV panel and validate it.

    Parameters
    ----------
    path : str or path-like
        CSV file with a header row.
    schema : dict, optional
        Maps canonical names (bank_id, year, C, Y1..Y3, W1..W3, K1..K3) to
        CSV column names. Missing keys map to themselves.

    Returns
    -------
    PanelDataset
        Rows with missing, unparsable or non-positive values are dropped
        and reported in `rejections`.
    '''
    mapping = dict(DEFAULT_SCHEMA)
    if schema:
        unknown = set(schema) - set(CANONICAL)
        if unknown:
            raise SchemaError('unknown canonical names in schema: {}'.format(
                ', '.join(sorted(unknown))))
        mapping.update(schema)
    if not os.path.isfile(path):
        raise SchemaError('input file not found: {}'.format(path))

    raw = pd.read_csv(path, encoding='utf-8', dtype=str, keep_default_na=False)
    missing = [mapping[name] for name in CANONICAL if mapping[name] not in raw.columns]
    if missing:
        raise SchemaError('{}: missing column(s) {}'.format(
            path, ', '.join(missing)))

    frame = pd.DataFrame({name: raw[mapping[name]] for name in CANONICAL})
    frame['bank_id'] = frame['bank_id'].str.strip()
    reasons = pd.Series('', index=frame.index)

    for name in ('year',) + NUMERIC:
        parsed = pd.to_numeric(frame[name].str.strip(), errors='coerce')
        unparsed = parsed.isna() & (reasons == '')
        reasons[unparsed] = 'missing or non-numeric {}'.format(name)
        frame[name] = parsed
    for name in NUMERIC:
        nonpositive = (frame[name] <= 0) & (reasons == '')
        reasons[nonpositive] = 'non-positive {}'.format(name)
    empty_id = (frame['bank_id'] == '') & (reasons == '')
    reasons[empty_id] = 'missing bank_id'
    fractional = (frame['year'] % 1 != 0) & (reasons == '')
    reasons[fractional] = 'non-integer year'

    rejected = reasons != ''
    rejections = pd.DataFrame({
        'row': (frame.index[rejected] + 1).astype(np.int64),
        'reason': reasons[rejected].values})
    if rejected.any():
        logger.info('%s: rejected %d of %d rows', path, int(rejected.sum()), len(frame))

    return PanelDataset.from_frame(frame.loc[~rejected], rejections=rejections)


def _check_structure(frame):
    dup = frame.duplicated(['bank_id', 'year'], keep=False)
    if dup.any():
        pairs = frame.loc[dup, ['bank_id', 'year']].drop_duplicates()
        first = pairs.iloc[0]
        raise DuplicateObservationError(
            'duplicate observation for bank {} in year {}'.format(
                first['bank_id'], int(first['year'])),
            ids=[(b, int(y)) for b, y in pairs.itertuples(index=False)])

    counts = frame.groupby('bank_id', sort=True).size()
    singletons = counts.index[counts < 2].tolist()
    if singletons:
        raise ValidationError(
            'banks with a single observation: {}'.format(', '.join(singletons)),
            ids=singletons)

    years = np.unique(frame['year'].values)
    if len(years) < 2:
        raise ValidationError('panel needs at least two years')
    expected = np.arange(years[0], years[-1] + 1)
    if len(years) != len(expected):
        gaps = sorted(set(expected.tolist()) - set(years.tolist()))
        raise ValidationError(
            'years are not contiguous; missing {}'.format(
                ', '.join(str(y) for y in gaps)), ids=gaps)
