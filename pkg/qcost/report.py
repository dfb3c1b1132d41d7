'''
Summary tables and plot-data files built from measure tables: summary
statistics with bootstrap intervals and category shares, sorted
estimates, kernel densities, yearly box-plot summaries, the
off-balance-sheet output share and its median association with S*.
'''
import json
import logging
import os
import warnings

import numpy as np
import pandas as pd
from scipy import stats as ss
from statsmodels.regression.quantile_regression import QuantReg

from qcost.inference.intervals import LABELS, bc_intervals
from qcost.measures.core import SUMMARY_STATS, summary_statistics
from qcost.version import VERSION

logger = logging.getLogger(__name__)

SHARE_QUANTILES = (0.5, 0.75, 0.90, 0.99, 0.995)
DENSITY_POINTS = 512
DENSITY_PAD = 5.0


def _admissible(frame):
    return frame[frame['admissible'].astype(bool) & np.isfinite(frame['estimate'])]


def summary_table(frame, kind, replica_summaries=None, alpha=0.05):
    '''
    Mean and quartiles per tau, bias-corrected two-sided intervals of each
    statistic when replica summaries are given, and the percentage of
    classified observations in each category. Shares add to 100 within
    each binary pair.
    '''
    _, one_sided, two_sided = LABELS[kind]
    rows = []
    for tau, group in frame.groupby('tau', sort=True):
        ok = _admissible(group)
        stats = summary_statistics(ok['estimate'])
        row = {'tau': float(tau), 'n': len(ok), 'n_excluded': len(group) - len(ok)}
        row.update(dict(zip(SUMMARY_STATS, stats)))
        if replica_summaries is not None and float(tau) in replica_summaries:
            bounds = bc_intervals(replica_summaries[float(tau)], stats, alpha)
            for j, name in enumerate(SUMMARY_STATS):
                row[name + '_lower'] = bounds['lower_2s'][j]
                row[name + '_upper'] = bounds['upper_2s'][j]
        for column, labels in (('category', one_sided), ('category_2s', two_sided)):
            classified = ok[ok[column].isin(labels)]
            for label in labels:
                row['pct ' + label] = (100.0 * (classified[column] == label).mean()
                    if len(classified) else np.nan)
        rows.append(row)
    return pd.DataFrame(rows)


def sorted_estimates(frame):
    '''Estimates in ascending order per tau with their one-sided lower bounds.'''
    parts = []
    for tau, group in frame.groupby('tau', sort=True):
        ok = _admissible(group).sort_values('estimate', kind='mergesort')
        parts.append(pd.DataFrame({'tau': float(tau), 'rank': np.arange(1, len(ok) + 1),
            'bank_id': ok['bank_id'].to_numpy(), 'year': ok['year'].to_numpy(),
            'estimate': ok['estimate'].to_numpy(), 'lower_1s': ok['lower_1s'].to_numpy()}))
    return pd.concat(parts, ignore_index=True) if parts else pd.DataFrame()


def silverman_bandwidth(x):
    '''Gaussian-kernel bandwidth from Silverman's rule (scipy's factor).'''
    kde = ss.gaussian_kde(x, bw_method='silverman')
    return float(np.sqrt(kde.covariance[0, 0]))


def _density_grid(samples):
    usable = [x for x in samples if len(np.unique(x)) >= 2]
    if not usable:
        return None
    h = max(silverman_bandwidth(x) for x in usable)
    pooled = np.concatenate(usable)
    return np.linspace(pooled.min() - DENSITY_PAD * h, pooled.max() + DENSITY_PAD * h,
        DENSITY_POINTS), h


def density_table(samples):
    '''
    Gaussian kernel densities (Silverman bandwidth) of each sample on a
    shared grid of 512 points spanning the pooled range padded by five of
    the largest bandwidths.

    Parameters
    ----------
    samples : dict
        label -> values

    Returns
    -------
    (DataFrame with columns label, x, density; dict label -> bandwidth)
    '''
    cleaned = {label: np.asarray(x, dtype=np.float64)[np.isfinite(x)]
        for label, x in samples.items()}
    grid = _density_grid(list(cleaned.values()))
    if grid is None:
        message = 'fewer than two distinct values; no density computed'
        logger.warning(message)
        warnings.warn(message, RuntimeWarning)
        return pd.DataFrame(columns=['label', 'x', 'density']), {}
    grid, _ = grid
    parts = []
    bandwidths = {}
    for label, x in cleaned.items():
        if len(np.unique(x)) < 2:
            logger.warning('%s: fewer than two distinct values; no density', label)
            continue
        kde = ss.gaussian_kde(x, bw_method='silverman')
        bandwidths[label] = float(np.sqrt(kde.covariance[0, 0]))
        parts.append(pd.DataFrame({'label': label, 'x': grid, 'density': kde(grid)}))
    return pd.concat(parts, ignore_index=True), bandwidths


def five_number_summary(x):
    '''(min, q1, median, q3, max) of the finite values.'''
    x = np.asarray(x, dtype=np.float64)
    x = x[np.isfinite(x)]
    return tuple(float(q) for q in np.percentile(x, [0, 25, 50, 75, 100]))


def yearly_boxplot(frame):
    rows = []
    for (tau, year), group in frame.groupby(['tau', 'year'], sort=True):
        ok = _admissible(group)
        if len(ok) == 0:
            continue
        rows.append(dict(zip(('tau', 'year', 'min', 'q1', 'median', 'q3', 'max'),
            (float(tau), int(year)) + five_number_summary(ok['estimate']))))
    return pd.DataFrame(rows)


def obs_share(outputs):
    '''Y3 / (Y1 + Y2 + Y3).'''
    outputs = np.asarray(outputs, dtype=np.float64)
    return outputs[:, 2] / outputs.sum(axis=1)


def obs_share_series(design, quantiles=SHARE_QUANTILES):
    '''Mean and selected quantiles of the off-balance-sheet share per year.'''
    share = obs_share(design.outputs)
    years = design.row_years
    rows = []
    for year in design.years:
        x = share[years == year]
        if len(x) == 0:
            continue
        row = {'year': int(year), 'n': len(x), 'mean': float(x.mean())}
        row.update({'q{:g}'.format(q): float(np.quantile(x, q)) for q in quantiles})
        rows.append(row)
    return pd.DataFrame(rows)


def obs_share_density(design):
    '''Densities of the off-balance-sheet share in the first and the last year.'''
    share = obs_share(design.outputs)
    years = design.row_years
    first, last = design.years[0], design.years[-1]
    return density_table({str(first): share[years == first], str(last): share[years == last]})


def lad_association(frame, design):
    '''
    Median (LAD) regression of the estimate on the off-balance-sheet share
    per tau.
    '''
    share = pd.DataFrame({'bank_id': [design.bank_ids[g] for g in design.group],
        'year': design.row_years.astype(np.int64), 'share': obs_share(design.outputs)})
    rows = []
    for tau, group in frame.groupby('tau', sort=True):
        ok = _admissible(group).merge(share, on=['bank_id', 'year'], how='inner')
        if len(ok) < 3 or ok['share'].nunique() < 2:
            logger.warning('tau=%.2f: too few observations for the LAD association', tau)
            continue
        X = np.column_stack([np.ones(len(ok)), ok['share'].to_numpy()])
        result = QuantReg(ok['estimate'].to_numpy(), X).fit(q=0.5)
        rows.append({'tau': float(tau), 'n': len(ok), 'intercept': float(result.params[0]),
            'slope': float(result.params[1]), 'slope_se': float(result.bse[1])})
    return pd.DataFrame(rows)


def write_table(table, path):
    table.to_csv(path, index=False)
    logger.info('wrote %s', path)


def write_report(output_dir, frame, design):
    '''
    Plot-data files for one measure table (normally S*). Returns the paths
    written.
    '''
    os.makedirs(output_dir, exist_ok=True)
    samples = {'{:.2f}'.format(tau): _admissible(group)['estimate'].to_numpy()
        for tau, group in frame.groupby('tau', sort=True)}
    density, bandwidths = density_table(samples)
    share_density, share_bandwidths = obs_share_density(design)
    tables = {
        'sorted_estimates.csv': sorted_estimates(frame),
        'density.csv': density,
        'yearly_boxplot.csv': yearly_boxplot(frame),
        'obs_share_series.csv': obs_share_series(design),
        'obs_share_density.csv': share_density,
        'lad_association.csv': lad_association(frame, design),
    }
    paths = []
    for name, table in tables.items():
        path = os.path.join(output_dir, name)
        write_table(table, path)
        paths.append(path)
    metadata = {
        'qcost_version': VERSION,
        'kernel': 'gaussian',
        'bandwidth_rule': 'silverman',
        'grid_points': DENSITY_POINTS,
        'grid_padding_bandwidths': DENSITY_PAD,
        'bandwidths': bandwidths,
        'obs_share_bandwidths': share_bandwidths,
        'obs_share_quantiles': list(SHARE_QUANTILES),
    }
    path = os.path.join(output_dir, 'report_metadata.json')
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(metadata, handle, indent=1, sort_keys=True)
        handle.write('\n')
    paths.append(path)
    return paths
