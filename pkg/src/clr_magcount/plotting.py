"""Plot data for offline use: gnuplot-readable ``.dat`` files and an optional PNG."""

from __future__ import annotations

from pathlib import Path


def write_dat(path, columns: list[str], rows, comment: str = "") -> Path:
    """Whitespace-separated columns with a ``#`` header line."""
    path = Path(path)
    with path.open("w") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        fh.write("# " + " ".join(columns) + "\n")
        for row in rows:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")
    return path


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_png(path, x, ys: dict, xlabel: str, ylabel: str, loglog: bool = True) -> Path | None:
    """Line plot of ``ys`` against ``x``; returns None when matplotlib is missing."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return None
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for label, y in ys.items():
        ax.plot(x, y, marker="o", ms=3, lw=1, label=label)
    if loglog:
        ax.set_xscale("log")
        ax.set_yscale("symlog", linthresh=1.0)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
