"""Log-log convergence figure for a study (optional report artifact)."""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

SERIES = (("energy", "err_energy", "o-"), ("H1", "err_h1", "s-"), ("vertex max", "err_linf", "^-"))


def convergence_figure(study, path):
    """Write a log-log error-vs-h plot of ``study``.

    PNG and SVG metadata that would carry a timestamp or version string is
    suppressed, so the file is reproducible.
    """
    h = np.array([r.h for r in study.rows])
    rates = study.rates
    fig, ax = plt.subplots(figsize=(5.0, 4.0), dpi=100)
    for label, attr, style in SERIES:
        e = np.array([getattr(r, attr) for r in study.rows])
        key = {"energy": "energy", "H1": "h1", "vertex max": "linf"}[label]
        ax.loglog(h, e, style, label=f"{label} (rate {rates[key]:.2f})")
    # reference slopes anchored at the coarsest point
    e0 = study.rows[0].err_energy
    for p, ls in ((1, ":"), (2, "--")):
        ax.loglog(h, e0 * (h / h[0]) ** p, "k" + ls, lw=0.8, label=f"h^{p}")
    ax.set_xlabel("h")
    ax.set_ylabel("error")
    ax.set_title(f"{study.benchmark} ({study.method})")
    ax.grid(True, which="both", lw=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fmt = str(path).rsplit(".", 1)[-1].lower()
    meta = {"Software": None}
    if fmt == "svg":
        meta = {"Date": None, "Creator": None}
    elif fmt == "pdf":
        meta = {"CreationDate": None, "Producer": None, "Creator": None}
    fig.savefig(path, metadata=meta)
    plt.close(fig)
