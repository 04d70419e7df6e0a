"""Command-line entry point: ``divbench {gen-data,train,run,sweep,report}``.

Exit codes: 0 success, 2 configuration error, 3 runtime abort.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from divbench import domains, harness, reducer

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

log = logging.getLogger("divbench")


def _bundle(cfg) -> Path:
    return Path(cfg["output"])


def _prepare_output(cfg) -> Path:
    out = _bundle(cfg)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise harness.ConfigError(f"output path {out} is not writable: {exc}") from exc
    return out


def cmd_gen_data(cfg) -> int:
    out = _prepare_output(cfg)
    domain = domains.make_domain(cfg["domain"])
    c = cfg["corpus"]
    corpus = harness.generate_corpus(domain, c["size"], c["generator"], c["seed"], harness._variation(cfg))
    meta = harness.write_corpus(out, cfg, corpus)
    (out / "config.json").write_text(harness.dump_json(cfg))
    print(f"corpus: {meta['size']} records ({meta['generator']}), "
          f"fitness range [{meta['fitness_min']:.4f}, {meta['fitness_max']:.4f}] -> {out}")
    return EXIT_OK


def cmd_train(cfg) -> int:
    out = _prepare_output(cfg)
    try:
        corpus, meta = harness.read_corpus(out)
    except harness.BundleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if meta["domain"] != cfg["domain"]:
        raise harness.ConfigError(f"corpus was generated for {meta['domain']}, config asks for {cfg['domain']}")
    model, head, spec, diag = harness.prepare_models(corpus, cfg)
    text = harness.model_document(model, head, spec, diag, cfg)
    (out / "model.json").write_text(text)
    (out / "config.json").write_text(harness.dump_json(cfg))
    print(f"final reconstruction loss {diag['final_loss']:.6f}, "
          f"reconstruction error {diag['reconstruction_error']:.6f}")
    print(f"head R^2 {diag['head_r2']:.6f} (held-out {diag['holdout_r2']:.6f})")
    print(f"model sha256 {reducer.checksum(text)}")
    return EXIT_OK


def _summary_table(summary) -> str:
    names = sorted(summary["checkpoints"], key=summary["checkpoints"].get)
    lines = ["algorithm".ljust(20) + "".join(n.rjust(14) for n in names) + "success".rjust(10)]
    for label, s in sorted(summary["algorithms"].items()):
        lines.append(label.ljust(20)
                     + "".join(f"{s['checkpoints'][n]['median']:14.4f}" for n in names)
                     + f"{s['success_rate']:10.2f}")
    return "\n".join(lines)


def cmd_run(cfg) -> int:
    out = _prepare_output(cfg)
    summary = harness.run_experiment(cfg, out)
    print(_summary_table(summary))
    failed = [k for k, v in summary["ground_truth_leakage_audit"].items() if v != "pass"]
    if failed:
        print(f"error: selection audit failed for {failed}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_sweep(cfg, sizes) -> int:
    out = _prepare_output(cfg)
    try:
        corpus, _ = harness.read_corpus(out)
    except harness.BundleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    rows = harness.latent_sweep(cfg, sizes, corpus)
    (out / "sweep.json").write_text(harness.dump_json(rows))
    print(f"{'latent_dim':>10} {'recon_error':>14} {'qd_score':>14} {'head_r2':>10}")
    for r in rows:
        flag = "  <- best" if r["best"] else ""
        print(f"{r['latent_dim']:>10} {r['reconstruction_error']:14.6f} {r['qd_score']:14.4f} "
              f"{r['head_r2']:10.4f}{flag}")
    return EXIT_OK


def cmd_report(bundle) -> int:
    bundle = Path(bundle)
    report, curves = harness.build_report(bundle)
    (bundle / "report.md").write_text(report)
    (bundle / "curves.csv").write_text(curves)
    print(report, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="divbench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", "-c", help="JSON config file (defaults are used for missing keys)")
        p.add_argument("--override", "-o", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted-path override, e.g. budget=1000 or algorithms.1.mu=100")
        p.add_argument("--verbose", "-v", action="count", default=0)

    common(sub.add_parser("gen-data", help="generate the pretraining corpus"))
    common(sub.add_parser("train", help="train the VAE and fitness head"))
    common(sub.add_parser("run", help="run every algorithm on every seed"))
    sweep = sub.add_parser("sweep", help="compare latent sizes by MAP-Elites QD-score")
    common(sweep)
    sweep.add_argument("--sizes", default="2,4,8", help="comma-separated latent sizes")
    rep = sub.add_parser("report", help="summarize a results bundle")
    rep.add_argument("bundle", nargs="?", help="bundle directory (default: config output)")
    common(rep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report" and args.bundle:
            return cmd_report(args.bundle)
        cfg = harness.load_config(args.config, args.override)
        if args.command == "gen-data":
            return cmd_gen_data(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "sweep":
            try:
                sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
            except ValueError:
                raise harness.ConfigError(f"--sizes must be integers, got {args.sizes!r}") from None
            if not sizes or min(sizes) < 1:
                raise harness.ConfigError("--sizes needs at least one positive size")
            return cmd_sweep(cfg, sizes)
        return cmd_report(_bundle(cfg))
    except (harness.ConfigError, domains.DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (harness.BundleError, reducer.ReducerError, RuntimeError, OSError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
