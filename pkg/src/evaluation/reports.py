""" Result tables and the Recall@n figure. """

import pandas as pd
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .metrics import breakdown, records_frame

_PERCENT = "{:.1f}".format


def _hits_table(frame, column, title):
    table = breakdown(frame, column).rename(columns={"count": "Count", "hits1": "Hits@1", "hits10": "Hits@10"})
    if table.empty:
        return f"{title}\n(no records)"
    table[["Hits@1", "Hits@10"]] = table[["Hits@1", "Hits@10"]] * 100.0
    table.index.name = title
    return table.to_string(float_format=_PERCENT)


def results_tables(records, summary):
    """
    Renders the aligned-column result tables: overall and per-category
    Hits@k, answer-type and granularity breakdowns, tree efficiency and,
    when present, the Recall@n table.

    :type records: list[:class:`src.evaluation.metrics.EvalRecord`]
    :type summary: :class:`src.evaluation.metrics.EvalSummary`
    :rtype: str
    """
    frame = records_frame(records)
    overall = pd.DataFrame(
        [{"Count": summary.count, "Hits@1": summary.hits1 * 100.0, "Hits@10": summary.hits10 * 100.0}],
        index=pd.Index(["Overall"], name="Model"),
    )
    sections = [
        overall.to_string(float_format=_PERCENT),
        _hits_table(frame, "category", "Question Type"),
        _hits_table(frame, "complexity", "Complexity"),
        _hits_table(frame, "answer_type", "Answer Type"),
        _hits_table(frame, "granularity", "Time Granularity"),
        efficiency_table(summary),
    ]
    if summary.recall and summary.recall.get("recall"):
        sections.append(recall_table(summary.recall, summary.hits1))
    return "\n\n".join(sections) + "\n"


def efficiency_table(summary):
    table = pd.DataFrame(
        [{"Avg Depth": summary.avg_depth, "Avg Branch": summary.avg_branch, "Avg API Call": summary.avg_api_calls}],
        index=pd.Index(["Overall"], name="Dataset"),
    )
    return table.to_string(float_format="{:.2f}".format)


def recall_table(recall, hits1=None):
    """Context-limit layout: one row per n with its Recall@n."""
    rows = [{"n": int(n), "Recall@n": value * 100.0} for n, value in recall["recall"].items()]
    table = pd.DataFrame(rows).set_index("n").sort_index()
    if hits1 is not None:
        table["Hits@1 (run)"] = hits1 * 100.0
    return table.to_string(float_format="{:.2f}".format)


def plot_recall_curve(recall, path, dpi=100):
    """
    Saves the Recall@n curve as an image.

    :param recall: ``RecallCurve.to_dict()`` output.
    :type recall: dict
    :param path: Output image path.
    :type path: str or :class:`pathlib.Path`
    """
    points = sorted((int(n), value * 100.0) for n, value in recall["recall"].items())
    fig = Figure(dpi=dpi, tight_layout=True)
    FigureCanvasAgg(fig)
    axes = fig.add_subplot(111)
    axes.plot([n for n, _ in points], [v for _, v in points], marker="o", color="tab:blue")
    axes.set_xlabel("n (retrieved facts)")
    axes.set_ylabel("Recall@n (%)")
    axes.set_ylim(0, 100)
    axes.grid(True, linestyle=":")
    fig.savefig(path)
    return path
