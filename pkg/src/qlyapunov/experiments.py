"""The four CLI experiments: check, simulate, census and track.

Each ``run_*`` function returns a JSON-ready report and, when ``out_dir``
is set, writes its files there.
"""
from __future__ import annotations

import csv
import gzip
import io
import json
import logging
from pathlib import Path

import numpy as np

from .batch import run_samples, verdict_counts
from .config import ExperimentConfig
from .dynamics import build_model, lasalle_membership
from .stability import (classify_stationary, enumerate_diagonal_stationary, example3_relations,
                        hessian_signature)
from .states import (count_diagonal_stationary, flag_manifold_dim, is_fully_connected,
                     is_pseudo_pure_exceptional, is_strongly_regular, spectrum_signature,
                     to_drift_eigenbasis)

log = logging.getLogger(__name__)


class ExperimentError(RuntimeError):
    pass


def _witness(w):
    # 0-based level pairs become 1-based for reports
    if w is None:
        return None
    if isinstance(w, list):
        return [[k + 1, l + 1] for k, l in w]
    kind, *rest = w
    out = {"kind": kind}
    if kind == "degenerate":
        out["pair"] = [rest[0][0] + 1, rest[0][1] + 1]
        out["omega"] = rest[1]
    else:
        out["pairs"] = [[p[0] + 1, p[1] + 1] for p in rest[:2]]
        out["omega"] = rest[2]
    return out


def _eigenbasis(cfg: ExperimentConfig):
    _, u, (h1e, rho_e) = to_drift_eigenbasis(cfg.h0, cfg.h1, cfg.rho_d0)
    return u, h1e, rho_e


def exceptionality_report(cfg: ExperimentConfig):
    sig = spectrum_signature(cfg.rho_d0)
    if not sig.is_pseudo_pure:
        return None
    _, _, rho_e = _eigenbasis(cfg)
    ex = is_pseudo_pure_exceptional(rho_e)
    return {
        "exceptional": ex.exceptional,
        "pair": [ex.pair[0] + 1, ex.pair[1] + 1] if ex.pair else None,
        "alpha": ex.alpha,
        "w": ex.w,
        "u": ex.u,
        "V_max": ex.v_max,
    }


def run_check(cfg: ExperimentConfig, out_dir: Path | None = None) -> dict:
    _, h1e, _ = _eigenbasis(cfg)
    sr = is_strongly_regular(cfg.h0)
    fc = is_fully_connected(h1e)
    sig = spectrum_signature(cfg.rho_d0)
    model = build_model(cfg.h0, cfg.h1, cfg.rho_d0)
    report = {
        "preset": cfg.preset,
        "n": cfg.n,
        "strongly_regular": sr.ok,
        "strongly_regular_witness": _witness(sr.witness),
        "fully_connected": fc.ok,
        "fully_connected_witness": _witness(fc.witness),
        "ideal": sr.ok and fc.ok,
        "target_stationary": model.target_stationary,
        "spectrum": {"values": list(sig.values), "multiplicities": list(sig.multiplicities),
                     "class": sig.kind},
        "flag_manifold_dim": flag_manifold_dim(sig),
        "stationary_count": count_diagonal_stationary(sig),
        "pseudo_pure": exceptionality_report(cfg),
    }
    if out_dir is not None:
        _write_json(Path(out_dir) / "check.json", report)
    return report


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _fmt(x: float) -> str:
    return repr(float(x))


def write_trajectories_csv(results, path: Path, compress: bool = False) -> Path:
    """Long format: sample_id, t, V, f."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sample_id", "t", "V", "f"])
    for r in results:
        if r.lyapunov is None:
            continue
        for t, v, f in zip(r.times, r.lyapunov, r.controls):
            w.writerow([r.sample_id, _fmt(t), _fmt(v), _fmt(f)])
    data = buf.getvalue().encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    if compress:
        path = path.with_suffix(path.suffix + ".gz")
        with open(path, "wb") as fh, gzip.GzipFile(fileobj=fh, mode="wb", mtime=0, filename="") as gz:
            gz.write(data)
    else:
        path.write_bytes(data)
    return path


def simulate_batch(cfg: ExperimentConfig, model=None, label: str = "simulate") -> tuple:
    """Run the Monte Carlo batch and assemble the summary (no file output)."""
    model = model or build_model(cfg.h0, cfg.h1, cfg.rho_d0)
    results = run_samples(model, cfg.samples, cfg.seed, cfg.integrator, cfg.jobs)
    u, _, rho_e = _eigenbasis(cfg)
    check_example3 = cfg.preset == "example3-qutrit" and np.allclose(np.diag(rho_e).real, [0, 1, 0]) \
        and np.allclose(rho_e, np.diag(np.diag(rho_e)))
    eig_model = build_model(u.conj().T @ cfg.h0 @ u, u.conj().T @ cfg.h1 @ u, rho_e)
    samples = []
    for r in results:
        entry = {"sample_id": r.sample_id, "verdict": r.verdict, "final_V": r.final_v,
                 "log10_slope": r.slope, "error": r.error}
        if r.lyapunov is not None:
            entry["max_V_increase"] = float(np.max(np.diff(r.lyapunov), initial=0.0))
            entry["spectrum_drift"] = r.stats["spectrum_drift"]
        if r.verdict == "flatlined":
            rho = u.conj().T @ r.final_state @ u
            rho_d = u.conj().T @ r.final_target @ u
            chk = lasalle_membership(rho, rho_d, eig_model, tol=1e-3)
            entry["lasalle"] = {"member": chk.member, "max_offdiag": chk.max_offdiag,
                                "exact_characterization": chk.exact}
            if check_example3:
                entry["example3_relations"] = example3_relations(rho)
        samples.append(entry)
    counts = verdict_counts(results)
    n = cfg.samples
    summary = {
        "command": label,
        "preset": cfg.preset,
        "n_samples": n,
        "seed": cfg.seed,
        "t_final": cfg.integrator.t_final,
        "target_stationary": model.target_stationary,
        "counts": counts,
        "converged_fraction": counts["converged"] / n,
        "flatlined_fraction": counts["flatlined"] / n,
        "meets_converged_threshold": counts["converged"] / n >= cfg.converged_fraction,
        "meets_flatlined_threshold": counts["flatlined"] / n >= cfg.flatlined_fraction,
        "samples": samples,
    }
    return results, summary


def _emit(cfg, results, summary, out_dir, stem):
    if out_dir is None:
        return
    out_dir = Path(out_dir)
    csv_path = write_trajectories_csv(results, out_dir / f"{stem}_trajectories.csv", cfg.gzip)
    summary["files"] = {"trajectories": csv_path.name}
    if cfg.plot:
        from .plotting import plot_lyapunov
        fig = out_dir / f"{stem}_V.png"
        plot_lyapunov(results, fig, title=f"{cfg.preset or 'custom model'}: {stem}")
        summary["files"]["figure"] = fig.name
    _write_json(out_dir / f"{stem}_summary.json", summary)


def run_simulate(cfg: ExperimentConfig, out_dir: Path | None = None) -> dict:
    results, summary = simulate_batch(cfg)
    _emit(cfg, results, summary, out_dir, "simulate")
    if counts_all_failed(summary):
        raise ExperimentError("every sample failed to integrate")
    return summary


def counts_all_failed(summary) -> bool:
    return summary["counts"]["failed"] == summary["n_samples"]


def run_census(cfg: ExperimentConfig, out_dir: Path | None = None) -> dict:
    u, h1e, rho_e = _eigenbasis(cfg)
    model = build_model(u.conj().T @ cfg.h0 @ u, h1e, rho_e)
    if not model.target_stationary:
        raise ExperimentError("census is defined only for stationary targets ([H0, rho_d] = 0)")
    rows = []
    for rho0 in enumerate_diagonal_stationary(model):
        cls = classify_stationary(rho0, model)
        rec = cls.to_record()
        rec["hessian_signature"] = list(hessian_signature(rho0, model.rho_d0, model.basis))
        rows.append(rec)
    verdicts = [r["verdict"] for r in rows]
    report = {
        "command": "census",
        "preset": cfg.preset,
        "ideal": model.ideal,
        "target_diag": [float(x) for x in np.diag(rho_e).real],
        "flag_manifold_dim": flag_manifold_dim(spectrum_signature(rho_e)),
        "n_stationary": len(rows),
        "n_sinks": verdicts.count("hyperbolic_sink"),
        "rows": rows,
    }
    if out_dir is not None:
        out_dir = Path(out_dir)
        _write_json(out_dir / "census.json", report)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["state", "V0", "n_stable", "n_unstable", "n_center", "verdict",
                    "hessian_plus", "hessian_minus", "hessian_zero"])
        for r in rows:
            state = ";".join(_fmt(x) for x in r["state_diag"]) if r["state_diag"] else "nondiagonal"
            w.writerow([state, _fmt(r["V0"]), r["n_stable"], r["n_unstable"], r["n_center"],
                        r["verdict"], *r["hessian_signature"]])
        (out_dir / "census.csv").write_text(buf.getvalue(), encoding="utf-8")
    return report


def run_track(cfg: ExperimentConfig, out_dir: Path | None = None) -> dict:
    ex = exceptionality_report(cfg)
    if ex is None:
        log.warning("target is not pseudo-pure; running a plain simulation")
    results, summary = simulate_batch(cfg, label="track")
    summary["exceptionality"] = ex
    if ex is not None:
        lo, hi = 0.01 * ex["V_max"], 0.99 * ex["V_max"]
        stalled = [s for s in summary["samples"] if s["error"] is None and lo < s["final_V"] < hi]
        summary["stalled_fraction"] = len(stalled) / cfg.samples
    _emit(cfg, results, summary, out_dir, "track")
    if counts_all_failed(summary):
        raise ExperimentError("every sample failed to integrate")
    return summary
