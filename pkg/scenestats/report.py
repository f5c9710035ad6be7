"""
Per-sequence analysis, distribution summaries and report export.

`analyze_sequence` turns a manifest into one AnalysisRecord per sampled
frame; `summarize_records` reduces them to box-plot summaries; the export
helpers write the per-frame CSV, the summary JSON and grouped SVG box plots.
"""
import csv
import io
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import matplotlib
import numpy as np
from matplotlib.figure import Figure
from rest_framework.parsers import JSONParser
from rest_framework.renderers import JSONRenderer

from scenestats.exceptions import (
    AllMissing,
    EmptySequence,
    ExportError,
    InvalidValue,
)
from scenestats.reproject import reprojected_mse
from scenestats.sequence import load_sampled_frame, sampled_paths
from scenestats.serializers import (
    DistributionSummarySerializer,
    MissingSummarySerializer,
)
from scenestats.stats import (
    FrameStats,
    PairStats,
    frame_stats,
    intensity_histogram,
    kl_divergence,
    pair_deltas,
)
from scenestats.utils import get_feature_extractor, raise_for_errors

logger = logging.getLogger(__name__)

FRAME_FIELDS = ('luminance', 'rms_contrast', 'laplacian_variance')
PAIR_FIELDS = ('d_luminance', 'd_contrast', 'kl_divergence', 'match_count',
               'reproj_mse')
CSV_COLUMNS = ('dataset', 'pair_index') + FRAME_FIELDS + PAIR_FIELDS

# The six appearance statistics, then the absolute frame levels.
STATISTICS = ('d_luminance', 'd_contrast', 'kl_divergence',
              'laplacian_variance', 'match_count', 'reproj_mse')
SUMMARY_STATISTICS = STATISTICS + ('luminance', 'rms_contrast')

WHISKER_REACH = 1.5
SVG_RC = {
    'svg.hashsalt': 'scenestats',
    'svg.fonttype': 'none',
    'font.size': 8,
}


@dataclass(frozen=True)
class AnalysisRecord:
    """
    Statistics of one sampled frame and, except for the first frame, of the
    pair it forms with its predecessor.
    """
    dataset: str
    pair_index: int
    frame: FrameStats
    pair: Optional[PairStats] = None

    def value(self, statistic):
        if statistic in FRAME_FIELDS:
            return getattr(self.frame, statistic)
        if self.pair is None:
            return None
        return getattr(self.pair, statistic)


@dataclass(frozen=True)
class DistributionSummary:
    n: int
    min: float
    q1: float
    median: float
    q3: float
    max: float
    lower_whisker: float
    upper_whisker: float
    n_missing: int = 0

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class MissingSummary:
    """Placeholder summary of a statistic that has no present values."""
    n_missing: int

    def to_dict(self):
        return {'error': 'AllMissing', 'n_missing': self.n_missing}


def _present(value):
    return value is not None and not (isinstance(value, float) and math.isnan(value))  # noqa


def summarize(values):
    """
    Box-plot summary of the present values.

    Quartiles interpolate linearly between order statistics at p * (n - 1).
    Whiskers reach the most extreme values within 1.5 IQR of the box and
    never fall inside it.

    Raises:
        AllMissing: If no value is present.
    """
    values = list(values)
    present = np.array([v for v in values if _present(v)], dtype=np.float64)
    n_missing = len(values) - present.size
    if present.size == 0:
        raise AllMissing(f"No present values ({n_missing} missing)")

    q1, median, q3 = np.quantile(present, [0.25, 0.5, 0.75], method='linear')
    iqr = q3 - q1
    low = present[present >= q1 - WHISKER_REACH * iqr]
    high = present[present <= q3 + WHISKER_REACH * iqr]
    return DistributionSummary(
        n=int(present.size),
        min=float(present.min()),
        q1=float(q1),
        median=float(median),
        q3=float(q3),
        max=float(present.max()),
        lower_whisker=float(min(low.min(), q1)) if low.size else float(q1),
        upper_whisker=float(max(high.max(), q3)) if high.size else float(q3),
        n_missing=int(n_missing),
    )


def summarize_records(records, statistics=SUMMARY_STATISTICS):
    """
    Summaries per dataset and statistic.

    Pair statistics are summarized over pair records only; frame statistics
    over every record.

    Returns:
        dict: dataset -> statistic -> DistributionSummary | MissingSummary.
    """
    by_dataset = {}
    for record in records:
        by_dataset.setdefault(record.dataset, []).append(record)

    summaries = {}
    for dataset in sorted(by_dataset):
        rows = by_dataset[dataset]
        summaries[dataset] = {}
        for statistic in statistics:
            if statistic in PAIR_FIELDS:
                values = [r.value(statistic) for r in rows if r.pair is not None]  # noqa
            else:
                values = [r.value(statistic) for r in rows]
            try:
                summaries[dataset][statistic] = summarize(values)
            except AllMissing:
                logger.warning("%s: %s has no present values",
                               dataset, statistic)
                summaries[dataset][statistic] = MissingSummary(len(values))
    return summaries


# Analysis

@dataclass(frozen=True)
class _FrameResult:
    index_in_source: int
    frame: object
    stats: FrameStats
    histogram: object
    features: object


def _analyze_frame(task):
    path, index, manifest, config, extractor = task
    sampled = load_sampled_frame(path, index, manifest, config.normalize_mode)
    frame = sampled.frame
    return _FrameResult(
        index_in_source=index,
        frame=frame,
        stats=frame_stats(frame, config.laplacian_size),
        histogram=intensity_histogram(frame),
        features=extractor.extract(frame),
    )


def _analyze_pair(task):
    pair_index, prev, curr, config, extractor = task
    d_luminance, d_contrast = pair_deltas(prev.stats, curr.stats)
    matches = extractor.match(
        prev.features, curr.features, config.ratio_threshold)
    return PairStats(
        d_luminance=d_luminance,
        d_contrast=d_contrast,
        kl_divergence=kl_divergence(curr.histogram, prev.histogram),
        match_count=len(matches),
        reproj_mse=reprojected_mse(
            prev.frame, curr.frame, config, pair_index, extractor,
            features=(prev.features, curr.features), matches=matches),
    )


def analyze_sequence(manifest, config=None, extractor=None):
    """
    Compute every statistic of a dataset.

    Frames are processed in chunks; with ``config.jobs`` above 1 each chunk
    is fanned out over a process pool. Records always come back in frame
    order, and each pair draws its RANSAC samples from its own stream, so
    the output does not depend on the number of jobs.

    Args:
        manifest (DatasetManifest): The dataset.
        config (RunConfig | None): Run parameters; configured defaults
                                   when None.
        extractor (BaseFeatureExtractor | None): Overrides the configured
                                                 extractor.

    Returns:
        list[AnalysisRecord]: One record per sampled frame.

    Raises:
        EmptySequence: If fewer than 2 frames are sampled.
    """
    from scenestats.config import RunConfig

    config = config if config is not None else RunConfig.from_settings()
    extractor = extractor or get_feature_extractor(config)
    sampled = sampled_paths(manifest)
    if len(sampled) < 2:
        raise EmptySequence(
            f"{manifest.name}: {len(sampled)} sampled frame(s), "
            "at least 2 are needed")

    chunk_size = max(16, 4 * config.jobs)
    pool = ProcessPoolExecutor(max_workers=config.jobs) \
        if config.jobs > 1 else None
    mapper = pool.map if pool is not None else map

    records = []
    previous = None
    try:
        for start in range(0, len(sampled), chunk_size):
            chunk = sampled[start:start + chunk_size]
            results = list(mapper(_analyze_frame, [
                (path, index, manifest, config, extractor)
                for index, path in chunk
            ]))
            if previous is None:
                records.append(AnalysisRecord(
                    manifest.name, 0, results[0].stats))
                previous, results, start = results[0], results[1:], 1
            chain = [previous] + results
            pairs = list(mapper(_analyze_pair, [
                (start + i, chain[i], chain[i + 1], config, extractor)
                for i in range(len(results))
            ]))
            for i, (result, pair) in enumerate(zip(results, pairs)):
                records.append(AnalysisRecord(
                    manifest.name, start + i, result.stats, pair))
            previous = chain[-1]
            logger.info("%s: analysed %d/%d frames", manifest.name,
                        len(records), len(sampled))
    finally:
        if pool is not None:
            pool.shutdown()
    return records


# CSV

def format_value(value):
    if value is None:
        return ''
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f'{value:.9g}'


def render_csv(records):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(CSV_COLUMNS)
    for record in records:
        writer.writerow(
            [record.dataset, record.pair_index]
            + [format_value(record.value(name))
               for name in FRAME_FIELDS + PAIR_FIELDS])
    return buffer.getvalue()


def _write_text(path, text):
    if str(path) == '-':
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    path = Path(path)
    try:
        path.write_text(text, encoding='utf-8')
    except OSError as e:
        raise ExportError(f"{path}: {e.strerror or e}") from e


def write_csv(records, path):
    """Write records as CSV to `path`, or to standard output for '-'."""
    _write_text(path, render_csv(records))


def _parse_number(text, cast, path, lineno, column):
    if text == '':
        return None
    try:
        return cast(text)
    except ValueError:
        raise InvalidValue(
            f"{path}:{lineno}: invalid {column} value {text!r}")


def read_csv(path):
    """
    Read records back from an analysis CSV.

    Raises:
        ExportError: If the file cannot be read.
        InvalidValue: If the header or a value is malformed.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ExportError(f"{path}: {e.strerror or e}") from e

    rows = csv.reader(io.StringIO(text))
    header = next(rows, None)
    if header is None or tuple(header) != CSV_COLUMNS:
        raise InvalidValue(f"{path}: not an analysis CSV (unexpected header)")

    records = []
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != len(CSV_COLUMNS):
            raise InvalidValue(
                f"{path}:{lineno}: expected {len(CSV_COLUMNS)} fields")
        values = dict(zip(CSV_COLUMNS, row))
        number = {
            name: _parse_number(
                values[name], int if name in ('pair_index', 'match_count') else float,  # noqa
                path, lineno, name)
            for name in CSV_COLUMNS[1:]
        }
        frame = FrameStats(**{name: number[name] for name in FRAME_FIELDS})
        pair = None
        if any(number[name] is not None for name in PAIR_FIELDS):
            pair = PairStats(**{name: number[name] for name in PAIR_FIELDS})
        records.append(AnalysisRecord(
            values['dataset'], number['pair_index'], frame, pair))
    return records


# JSON

def summary_payload(summaries, metadata=None):
    return {
        'metadata': dict(sorted((metadata or {}).items())),
        'datasets': {
            dataset: {
                statistic: dict(sorted(summary.to_dict().items()))
                for statistic, summary in sorted(per_stat.items())
            }
            for dataset, per_stat in sorted(summaries.items())
        },
    }


def render_json(summaries, metadata=None):
    rendered = JSONRenderer().render(
        summary_payload(summaries, metadata),
        renderer_context={'indent': 2},
    )
    return rendered.decode('utf-8') + '\n'


def parse_json(text):
    """
    Parse a summary document back into (metadata, summaries).

    Raises:
        InvalidValue: If an entry is not a valid summary.
    """
    data = JSONParser().parse(io.BytesIO(
        text.encode('utf-8') if isinstance(text, str) else text))
    summaries = {}
    for dataset, per_stat in data.get('datasets', {}).items():
        summaries[dataset] = {}
        for statistic, entry in per_stat.items():
            if 'error' in entry:
                serializer = MissingSummarySerializer(data=entry)
                if not serializer.is_valid():
                    raise_for_errors(serializer.errors, InvalidValue)
                summaries[dataset][statistic] = MissingSummary(
                    serializer.validated_data['n_missing'])
            else:
                serializer = DistributionSummarySerializer(data=entry)
                if not serializer.is_valid():
                    raise_for_errors(serializer.errors, InvalidValue)
                summaries[dataset][statistic] = DistributionSummary(
                    **serializer.validated_data)
    return data.get('metadata', {}), summaries


def write_json(summaries, path, metadata=None):
    _write_text(path, render_json(summaries, metadata))


# SVG

def _bxp_stats(summary, label):
    return {
        'label': label,
        'med': summary.median,
        'q1': summary.q1,
        'q3': summary.q3,
        'whislo': summary.lower_whisker,
        'whishi': summary.upper_whisker,
        'fliers': [],
    }


def render_svg(summaries, statistics=SUMMARY_STATISTICS):
    """
    Grouped box plots: one panel per statistic, one box per dataset.

    Boxes are drawn from the summaries alone and carry the SVG id
    ``box-<statistic>-<dataset>``.
    """
    datasets = sorted(summaries)
    columns = 4
    rows = math.ceil(len(statistics) / columns)
    with matplotlib.rc_context(SVG_RC):
        figure = Figure(figsize=(3.0 * columns, 2.8 * rows))
        axes = figure.subplots(rows, columns, squeeze=False).ravel()
        for ax, statistic in zip(axes, statistics):
            present = [
                (position, dataset, summaries[dataset].get(statistic))
                for position, dataset in enumerate(datasets, start=1)
            ]
            present = [
                item for item in present
                if isinstance(item[2], DistributionSummary)
            ]
            ax.set_title(statistic)
            ax.set_xlim(0.5, len(datasets) + 0.5)
            ax.set_xticks(range(1, len(datasets) + 1), datasets, rotation=20)
            if not present:
                ax.text(0.5, 0.5, 'all missing', ha='center', va='center',
                        transform=ax.transAxes)
                continue
            artists = ax.bxp(
                [_bxp_stats(summary, dataset) for _, dataset, summary in present],  # noqa
                positions=[position for position, _, _ in present],
                showfliers=False,
                patch_artist=True,
                manage_ticks=False,
            )
            for box, (_, dataset, _) in zip(artists['boxes'], present):
                box.set_gid(f'box-{statistic}-{dataset}')
        for ax in axes[len(statistics):]:
            ax.set_visible(False)
        figure.tight_layout()

        buffer = io.StringIO()
        figure.savefig(buffer, format='svg', metadata={'Date': None})
    return buffer.getvalue()


def write_svg(summaries, path, statistics=SUMMARY_STATISTICS):
    _write_text(path, render_svg(summaries, statistics))


def export(records, summaries, fmt, path, metadata=None):
    """
    Write one artifact.

    Args:
        records (list[AnalysisRecord]): Rows for the CSV format.
        summaries (dict): dataset -> statistic -> summary, for JSON and SVG.
        fmt (str): 'csv', 'json' or 'svg'.
        path (str | Path): Destination; '-' writes to standard output.
        metadata (dict | None): Extra JSON metadata.

    Raises:
        ExportError: On write failure.
        ValueError: On an unknown format or empty input.
    """
    if fmt == 'csv':
        if not records:
            raise ValueError("No records to export")
        write_csv(records, path)
    elif fmt == 'json':
        if not summaries:
            raise ValueError("No summaries to export")
        write_json(summaries, path, metadata)
    elif fmt == 'svg':
        if not summaries:
            raise ValueError("No summaries to export")
        write_svg(summaries, path)
    else:
        raise ValueError(f"Unknown export format {fmt!r}")
    logger.info("Wrote %s report to %s", fmt, path)