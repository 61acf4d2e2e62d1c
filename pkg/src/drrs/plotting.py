"""
SVG figures for the experiment suites. Needs the ``plots`` extra
(matplotlib).
"""

import logging
import pathlib
from typing import Any, Dict, Final, List, Optional, Sequence, Union

from typing_extensions import Literal, TypeAlias

from .errors import DRRSException

try:
    import matplotlib

    matplotlib.use("Agg")
    from matplotlib import pyplot as plt
except ImportError:  # pragma: no cover
    matplotlib = None  # type: ignore[assignment]

__all__ = ("PlotKind", "emit_svg", "pics_floor")

logger = logging.getLogger(__name__)

PlotKind: TypeAlias = Literal["pics", "pcs", "allocation"]
_SVG_HASH_SALT: Final[str] = "drrs"


def pics_floor(replications: int) -> float:
    """
    Where zero PICS estimates are drawn on a log axis.
    """
    return 1.0 / (10.0 * replications)


def _series(rows: Sequence[Any], x_name: str) -> Dict[str, List[Any]]:
    grouped: Dict[str, List[Any]] = {}
    for row in rows:
        grouped.setdefault(row.procedure, []).append(row)
    for items in grouped.values():
        items.sort(key=lambda r: getattr(r, x_name))
    return grouped


def _estimate_plot(axes: Any, rows: Sequence[Any], kind: PlotKind) -> None:
    x_name = "budget" if kind == "pics" else "n1"
    floored = False
    for procedure, items in _series(rows, x_name).items():
        xs = [getattr(r, x_name) for r in items]
        if kind == "pics":
            ys = []
            for r in items:
                if r.pics_hat > 0:
                    ys.append(r.pics_hat)
                else:
                    ys.append(pics_floor(r.replications))
                    floored = True
        else:
            ys = [r.pcs_hat for r in items]
        errors = [2 * r.se for r in items]
        axes.errorbar(xs, ys, yerr=errors, marker="o", capsize=3, label=procedure)
    if kind == "pics":
        axes.set_yscale("log")
        axes.set_xlabel("total budget N")
        axes.set_ylabel("PICS")
        if floored:
            axes.annotate("zero estimates drawn at 1/(10R)", xy=(0.02, 0.02), xycoords="axes fraction", fontsize=8)
            logger.warning("zero PICS estimates plotted at the 1/(10R) floor")
    else:
        axes.set_xlabel("n1 (per-scenario budget beyond n0)")
        axes.set_ylabel("PCS")
    axes.legend()
    axes.grid(True, which="both", alpha=0.3)


def _allocation_plot(figure: Any, records: Sequence[Any]) -> None:
    axes_list = figure.subplots(len(records), 1, squeeze=False)[:, 0]
    for axes, record in zip(axes_list, records):
        labels, sizes, colors = [], [], []
        for i, row in enumerate(record.sizes, start=1):
            for j, n in enumerate(row, start=1):
                labels.append(f"{i},{j}")
                sizes.append(n)
                colors.append(f"C{(i - 1) % 10}")
        axes.bar(range(len(sizes)), sizes, color=colors)
        axes.set_xticks(range(len(sizes)))
        axes.set_xticklabels(labels, rotation=90, fontsize=6)
        axes.set_ylabel("sample size")
        axes.set_title(f"{record.procedure}, replication {record.replication}, N={record.budget}", fontsize=9)
    axes_list[-1].set_xlabel("scenario (i,j)")


def emit_svg(
    rows: Sequence[Any],
    kind: PlotKind,
    path: Union[str, pathlib.Path],
    *,
    title: Optional[str] = None,
) -> pathlib.Path:
    """
    Write a self-contained SVG.

    :param rows: estimate rows for ``"pics"`` (log-scale PICS against N)
        and ``"pcs"`` (PCS against n1), run records for ``"allocation"``
        (per-scenario sample-size bars)

    :raises ValueError: for no rows or an unknown kind
    :raises drrs.DRRSException: when matplotlib is missing or the path is
        not writable
    """
    if matplotlib is None:
        raise DRRSException("plots need matplotlib, install drrs[plots]")
    if not rows:
        raise ValueError("nothing to plot")
    if kind not in ("pics", "pcs", "allocation"):
        raise ValueError(f"unknown plot kind {kind!r}")
    path = pathlib.Path(path)
    with plt.rc_context({"svg.hashsalt": _SVG_HASH_SALT, "svg.fonttype": "none"}):
        if kind == "allocation":
            figure = plt.figure(figsize=(10, 2.5 * len(rows)), constrained_layout=True)
            _allocation_plot(figure, rows)
        else:
            figure, axes = plt.subplots(figsize=(7, 4.5), constrained_layout=True)
            _estimate_plot(axes, rows, kind)
        if title:
            figure.suptitle(title)
        try:
            figure.savefig(path, format="svg", metadata={"Date": None})
        except OSError as exc:
            raise DRRSException(f"cannot write {path}: {exc}") from exc
        finally:
            plt.close(figure)
    logger.info("wrote %s", path)
    return path
