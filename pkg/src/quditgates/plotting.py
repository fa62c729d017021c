"""Figures for the CLI report path; everything is written to files."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

GOLDEN = (np.sqrt(5) - 1) / 2
WIDTH = 6.0

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.0,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _figure(nrows=1, ncols=1, height=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(nrows, ncols, figsize=(WIDTH, height or WIDTH * GOLDEN))
    return fig, ax


def _save(fig, path):
    with plt.rc_context(STYLE):
        fig.savefig(path)
    plt.close(fig)
    return path


def plot_modes(modes, path):
    fig, (ax0, ax1) = _figure(1, 2)
    f_mhz = modes.frequencies / (2 * np.pi) / 1e6
    ax0.plot(np.arange(modes.num_modes), f_mhz, "o")
    ax0.set_xlabel("mode index")
    ax0.set_ylabel("frequency (MHz)")
    lim = np.max(np.abs(modes.lamb_dicke))
    im = ax1.imshow(modes.lamb_dicke, cmap="RdBu_r", vmin=-lim, vmax=lim)
    ax1.set_xlabel("ion")
    ax1.set_ylabel("mode")
    ax1.grid(False)
    fig.colorbar(im, ax=ax1, label="Lamb-Dicke parameter")
    fig.tight_layout()
    return _save(fig, path)


def plot_pulse(pulse, path, samples=4000):
    fig, (ax0, ax1) = _figure(2, 1, height=WIDTH * 0.8)
    t = np.linspace(0, pulse.duration, samples)
    ax0.plot(t * 1e6, pulse(t) / (2 * np.pi) / 1e3)
    ax0.set_xlabel("time (us)")
    ax0.set_ylabel("g(t) / 2pi (kHz)")
    mu_mhz = pulse.basis.detunings / (2 * np.pi) / 1e6
    ax1.plot(mu_mhz, pulse.amplitudes / (2 * np.pi) / 1e3, ".-", ms=2)
    ax1.set_xlabel("tone frequency (MHz)")
    ax1.set_ylabel("amplitude / 2pi (kHz)")
    fig.tight_layout()
    return _save(fig, path)


def plot_scan(table, path, labels=("|dchi_11|", "|dchi_12|", "|dchi_22|")):
    """Phase deviations against drift, split into positive and negative offsets."""
    fig, ax = _figure()
    off = table[:, 0]
    for col, lab in enumerate(labels, start=1):
        for sign, style in ((1, "-"), (-1, "--")):
            sel = sign * off > 0
            if sel.any():
                ax.loglog(sign * off[sel] / 1e3, table[sel, col], style,
                          label=lab if sign > 0 else None)
    ax.set_xlabel("|drift| of radial frequency (kHz)")
    ax.set_ylabel("phase deviation (rad)")
    ax.legend(title="solid: +drift, dashed: -drift")
    return _save(fig, path)


def plot_ledger(ledger, path):
    fig, ax = _figure(height=WIDTH * 0.8)
    im = ax.imshow(np.mod(ledger.entangling, 2 * np.pi), cmap="twilight", vmin=0, vmax=2 * np.pi)
    ax.set_xlabel("level of ion 2")
    ax.set_ylabel("level of ion 1")
    ax.grid(False)
    fig.colorbar(im, ax=ax, label="accumulated entangling phase mod 2pi")
    return _save(fig, path)
