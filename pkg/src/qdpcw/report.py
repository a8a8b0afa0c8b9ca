"""Markdown summary of a directory of result documents."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import plots, schema
from .analysis.budget import PhotonBudget
from .analysis.group_index import GroupIndexCurve

SECTIONS = (
    ("beta", "Beta factor"),
    ("group_index", "Group index"),
    ("g2", "Second-order correlation"),
    ("budget", "Photon budget"),
    ("decay_fit", "Decay fits"),
    ("peaks", "Spectral peaks"),
    ("simulation", "Simulations"),
    ("fp_simulation", "Fabry-Perot simulations"),
)
BETA_THRESHOLD = 0.9
# configuration files often sit beside their results; they are inputs, not results
CONFIG_KINDS = ("experiment", "fabry_perot")


def collect(run_dir):
    """Result documents by kind, manifests by output path, and unreadable files."""
    run_dir = Path(run_dir)
    docs = {kind: [] for kind, _ in SECTIONS}
    manifests = {}
    problems = []
    for path in sorted(run_dir.glob("*.json")):
        try:
            doc = json.loads(path.read_text())
            if isinstance(doc, dict) and doc.get("kind") in CONFIG_KINDS:
                continue
            schema.validate(doc)
        except Exception as exc:  # noqa: BLE001 - every failure is reported, none is fatal
            problems.append((path.name, str(exc).splitlines()[0]))
            continue
        kind = doc["kind"]
        if kind == "manifest":
            if doc["command"] != "report":
                for out in doc["output_files"]:
                    manifests[Path(out["path"]).name] = doc
        elif kind in docs:
            docs[kind].append((path, doc))
    return docs, manifests, problems


def _f(x, digits=4):
    return "n/a" if x is None else f"{x:.{digits}g}"


def _beta_section(items, run_dir, figures):
    lines = ["| file | wavelength (nm) | beta | sigma | eta | sigma |", "|---|---|---|---|---|---|"]
    for path, d in items:
        lines.append(f"| {path.name} | {_f(d.get('wavelength'), 6)} | {_f(d['beta'], 6)} | "
                     f"{_f(d['beta_sigma'], 2)} | {_f(d['eta'])} | {_f(d['eta_sigma'], 2)} |")
    beta = np.array([d["beta"] for _, d in items])
    lines.append("")
    noun = "emitter" if len(items) == 1 else "emitters"
    lines.append(f"{len(items)} {noun}; fraction with beta > {BETA_THRESHOLD}: "
                 f"{np.mean(beta > BETA_THRESHOLD):.3f} ({int(np.sum(beta > BETA_THRESHOLD))}"
                 f" of {len(items)}).")
    located = [(d["wavelength"], d["beta"], d["beta_sigma"]) for _, d in items
               if d.get("wavelength") is not None]
    if len(located) >= 2:
        wl, b, s = (np.array(v) for v in zip(*located))
        lines.append(f"Wavelength span: {wl.min():.2f}-{wl.max():.2f} nm.")
        fig = plots.plot_beta_scatter(wl, b, s, run_dir / "report_beta.svg", BETA_THRESHOLD)
        figures.append(fig)
        lines.append("")
        lines.append(f"![beta versus wavelength]({fig.name})")
    return lines


def _group_index_section(items, run_dir, figures):
    curves = [GroupIndexCurve.from_dict(d) for _, d in items]
    lines = []
    for (path, _), c in zip(items, curves):
        lines.append(f"- {path.name}: {c.section} section, {len(c)} points, "
                     f"{c.wavelength[0]:.2f}-{c.wavelength[-1]:.2f} nm, "
                     f"max n_g {c.n_g.max():.2f}")
    fig = plots.plot_group_index(curves, run_dir / "report_group_index.svg")
    figures.append(fig)
    lines += ["", f"![group index]({fig.name})"]
    return lines


def _g2_section(items, run_dir, figures):
    lines = ["| file | g2(0) | sigma | excitation efficiency | tau_b (ns) | degraded |",
             "|---|---|---|---|---|---|"]
    for path, d in items:
        lines.append(f"| {path.name} | {_f(d['g2_zero'])} | {_f(d.get('g2_sigma'), 2)} | "
                     f"{_f(d['excitation_efficiency'], 3)} | {_f(d['envelope']['tau_b'])} | "
                     f"{'yes' if d['degraded'] else 'no'} |")
    return lines


def _budget_section(items, run_dir, figures):
    lines = []
    for i, (path, d) in enumerate(items):
        budget = PhotonBudget(d["rep_rate"], tuple((s["name"], s["factor"]) for s in d["stages"]),
                              d["waveguide_rate"], d["emitted_rate"], d["detected_rate"])
        lines.append(f"{path.name}:")
        lines.append("")
        lines.append("| stage | factor | rate (1/s) |")
        lines.append("|---|---|---|")
        lines.append(f"| pulses | | {budget.rep_rate * 1e6:.4g} |")
        for (name, factor), (_, rate) in zip(budget.stages, budget.cumulative()[1:]):
            lines.append(f"| {name} | {factor:.4g} | {rate:.4g} |")
        fig = plots.plot_budget(budget, run_dir / f"report_budget_{i}.svg")
        figures.append(fig)
        lines += ["", f"![photon budget]({fig.name})", ""]
    return lines


def _decay_section(items, run_dir, figures):
    lines = ["| file | components | rates (1/ns) | reduced deviance |", "|---|---|---|---|"]
    for path, d in items:
        rates = ", ".join(f"{c['rate']:.4g}" for c in d["model"]["components"])
        lines.append(f"| {path.name} | {len(d['model']['components'])} | {rates} | "
                     f"{_f(d['fit'].get('goodness'))} |")
    return lines


def _peaks_section(items, run_dir, figures):
    lines = []
    for path, d in items:
        centers = [p["center"] for p in d["peaks"]]
        span = f", {min(centers):.2f}-{max(centers):.2f} nm" if centers else ""
        lines.append(f"- {path.name}: {len(centers)} peaks{span}")
    return lines


def _simulation_section(items, run_dir, figures):
    lines = []
    for path, d in items:
        if d["kind"] == "simulation":
            lines.append(f"- {path.name}: {d['n_photons']} photons, "
                         f"{d.get('n_waveguide_photons', 'n/a')} guided, "
                         f"seed {d['config'].get('rng_seed')}")
        else:
            lines.append(f"- {path.name}: section {d['excite_section']} excited, "
                         f"{len(d['truth']['center'])} resonances")
    return lines


_RENDER = {"beta": _beta_section, "group_index": _group_index_section, "g2": _g2_section,
           "budget": _budget_section, "decay_fit": _decay_section, "peaks": _peaks_section,
           "simulation": _simulation_section, "fp_simulation": _simulation_section}


def _provenance(items, manifests):
    lines = []
    for path, _ in items:
        m = manifests.get(path.name)
        if m is None:
            lines.append(f"- {path.name}: no manifest found")
            continue
        inputs = ", ".join(f"{Path(f['path']).name} ({f['digest'][:19]})"
                           for f in m["input_files"]) or "none"
        lines.append(f"- {path.name}: `{m['command']}` v{m['tool_version']}, seed "
                     f"{m['rng_seed']}, config {m['config_hash'][:19]}, inputs: {inputs}")
    return lines


def build_report(run_dir, figure_dir=None):
    """Markdown text of the report and the figure files it references.

    Figures are written to ``figure_dir`` (the run directory by default).
    """
    run_dir = Path(run_dir)
    figure_dir = run_dir if figure_dir is None else Path(figure_dir)
    if not run_dir.is_dir():
        raise ValueError(f"{run_dir} is not a directory")
    docs, manifests, problems = collect(run_dir)
    figures = []
    lines = [f"# Results in {run_dir.name or run_dir}", ""]
    present = [(k, t) for k, t in SECTIONS if docs[k]]
    for kind, title in (present or SECTIONS):
        lines += [f"## {title}", ""]
        if not docs[kind]:
            lines += ["No results.", ""]
            continue
        lines += _RENDER[kind](docs[kind], figure_dir, figures)
        lines += ["", "Provenance:", ""] + _provenance(docs[kind], manifests) + [""]
    if problems:
        lines += ["## Missing or unreadable inputs", ""]
        lines += [f"- {name}: {msg}" for name, msg in problems] + [""]
    return "\n".join(lines).rstrip() + "\n", figures


def write_report(run_dir, out_path) -> list:
    """Write the report to ``out_path``; returns every file written."""
    out_path = Path(out_path)
    text, figures = build_report(run_dir, out_path.parent)
    out_path.write_text(text)
    return [out_path, *figures]
