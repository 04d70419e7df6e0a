"""End-to-end protocol: corpus, model preparation, budget-matched runs, summaries.

A results bundle is a directory::

    config.json  corpus.meta.json  corpus/*.npy  model.json  runs/*.csv  summary.json
"""
from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from divbench import domains, moo, qd, reducer
from divbench.evaluation import Evaluated, LearnedEvaluator, RunLog, RunRecord
from divbench.variation import VariationConfig

log = logging.getLogger(__name__)

ALGORITHMS = ("map-elites", "nsga2", "lexicase", "single-objective")
CHECKPOINTS = (0.1, 0.25, 0.5, 1.0)

DEFAULT_CONFIG = {
    "domain": {"id": "maze-medium"},
    "corpus": {"size": 20000, "generator": "ga-mix", "seed": 1},
    "reducer": {
        "latent_dim": None,  # None picks the domain's default
        "hidden": [32, 32],
        "epochs": 40,
        "batch_size": 64,
        "learning_rate": 0.03,
        "beta_kl": 0.01,
        "seed": 2,
        "l2_ridge": 1e-6,
        "holdout_fraction": 0.2,
    },
    "archive": {"cells_per_dim": 10, "percentiles": [1.0, 99.0]},
    "variation": {"sigma": 0.1, "reset_prob": None, "crossover_rate": 0.9},
    "algorithms": [
        {"id": "map-elites", "init_count": 500, "quality": "ground_truth"},
        {"id": "nsga2", "mu": 200},
        {"id": "lexicase", "mu": 200, "epsilon": "mad"},
        {"id": "single-objective", "mu": 200, "tournament_size": 4},
    ],
    "budget": 50000,
    "seeds": [0, 1, 2, 3, 4, 5, 6, 7, 8, 9],
    "workers": 1,
    "audit_budget_generations": 5,
    "output": "results/default",
}

# tunables each algorithm accepts, besides "id"
ALGORITHM_PARAMS = {
    "map-elites": {"init_count", "quality", "label"},
    "nsga2": {"mu", "label"},
    "lexicase": {"mu", "epsilon", "label"},
    "single-objective": {"mu", "tournament_size", "label"},
}


class ConfigError(ValueError):
    pass


class BundleError(RuntimeError):
    pass


# -- configuration ---------------------------------------------------------

def _merge(base: dict, extra: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and key != "domain":
            if not isinstance(value, dict):
                raise ConfigError(f"{where!r} must be an object")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(cfg: dict, item: str) -> dict:
    """Apply one ``dotted.key=value`` override; list entries are addressed by index."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, raw = item.split("=", 1)
    parts = key.strip().split(".")
    cfg = copy.deepcopy(cfg)
    node = cfg
    for i, part in enumerate(parts):
        last = i == len(parts) - 1
        if isinstance(node, list):
            try:
                idx = int(part)
                node[idx]
            except (ValueError, IndexError):
                raise ConfigError(f"bad list index {part!r} in override {key!r}") from None
            if last:
                node[idx] = _parse_value(raw)
            else:
                node = node[idx]
            continue
        if not isinstance(node, dict):
            raise ConfigError(f"override {key!r} descends into a scalar")
        if part not in node and not (node is cfg.get("domain") or _is_algorithm_entry(cfg, node)):
            raise ConfigError(f"unknown config key {key!r}")
        if last:
            node[part] = _parse_value(raw)
        else:
            if part not in node:
                raise ConfigError(f"unknown config key {key!r}")
            node = node[part]
    return cfg


def _is_algorithm_entry(cfg, node) -> bool:
    return any(node is a for a in cfg.get("algorithms", []))


def validate_config(cfg: dict) -> dict:
    try:
        domain = domains.make_domain(cfg["domain"])
    except (domains.DomainError, TypeError, KeyError) as exc:
        raise ConfigError(f"invalid domain: {exc}") from exc
    if cfg["reducer"]["latent_dim"] is None:
        cfg["reducer"]["latent_dim"] = domain.default_latent_dim
    dz = cfg["reducer"]["latent_dim"]
    if not isinstance(dz, int) or dz < 1:
        raise ConfigError("reducer.latent_dim must be a positive integer")
    corpus = cfg["corpus"]
    if not isinstance(corpus["size"], int) or corpus["size"] < 1:
        raise ConfigError("corpus.size must be a positive integer")
    if corpus["generator"] not in ("random", "ga-mix"):
        raise ConfigError("corpus.generator must be 'random' or 'ga-mix'")
    try:
        _train_config(cfg)
    except (reducer.ReducerError, TypeError) as exc:
        raise ConfigError(f"invalid reducer settings: {exc}") from exc
    if not 0 < cfg["reducer"]["holdout_fraction"] < 1:
        raise ConfigError("reducer.holdout_fraction must be in (0, 1)")
    if cfg["archive"]["cells_per_dim"] < 1:
        raise ConfigError("archive.cells_per_dim must be >= 1")
    algs = cfg["algorithms"]
    if not algs:
        raise ConfigError("at least one algorithm is required")
    labels = []
    for a in algs:
        if a.get("id") not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {a.get('id')!r}; choose from {ALGORITHMS}")
        bad = set(a) - {"id"} - ALGORITHM_PARAMS[a["id"]]
        if bad:
            raise ConfigError(f"unknown parameters for {a['id']}: {sorted(bad)}")
        labels.append(algorithm_label(a))
        mu = a.get("mu")
        if mu is not None and (not isinstance(mu, int) or mu < 2 or mu % 2):
            raise ConfigError(f"{a['id']}.mu must be an even integer >= 2")
        if a["id"] != "map-elites" and a.get("mu", 200) > cfg["budget"]:
            raise ConfigError(f"budget is smaller than {a['id']} population size")
        if a["id"] == "map-elites" and not 1 <= a.get("init_count", 500) <= cfg["budget"]:
            raise ConfigError("map-elites.init_count must be in [1, budget]")
    if len(set(labels)) != len(labels):
        raise ConfigError("algorithm labels must be distinct")
    if not isinstance(cfg["budget"], int) or cfg["budget"] <= 0:
        raise ConfigError("budget must be a positive integer")
    seeds = cfg["seeds"]
    if not seeds or len(set(seeds)) != len(seeds) or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("seeds must be a non-empty list of distinct integers")
    return cfg


def load_config(path=None, overrides=()) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        cfg = _merge(cfg, user)
    for item in overrides:
        cfg = apply_override(cfg, item)
    return validate_config(cfg)


def algorithm_label(entry: dict) -> str:
    return entry.get("label", entry["id"])


def _train_config(cfg: dict) -> reducer.TrainConfig:
    r = cfg["reducer"]
    return reducer.TrainConfig(epochs=r["epochs"], batch_size=r["batch_size"],
                               learning_rate=r["learning_rate"], beta_kl=r["beta_kl"],
                               seed=r["seed"], l2_ridge=r["l2_ridge"])


def _variation(cfg: dict) -> VariationConfig:
    return VariationConfig(**cfg["variation"])


def worker_count(cfg: dict) -> int:
    env = os.environ.get("DIVBENCH_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"DIVBENCH_WORKERS={env!r} is not an integer") from None
    return max(1, int(cfg.get("workers", 1)))


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- corpus ----------------------------------------------------------------

class _Recorder(LearnedEvaluator):
    """Evaluator that keeps every (genotype, phenotype, fitness) it produces."""

    def __init__(self, domain):
        super().__init__(domain)
        self.rows = []

    def __call__(self, genotypes) -> Evaluated:
        genotypes = np.atleast_2d(np.asarray(genotypes, dtype=np.float64))
        phen, fit = self.domain.evaluate_many(genotypes)
        self.evaluations += len(genotypes)
        self.rows.extend(zip(genotypes, phen, fit))
        return Evaluated(genotypes, fit)


def generate_corpus(domain, size: int, generator: str = "random", seed: int = 0,
                    variation: VariationConfig | None = None):
    """Pretraining data as ``(genotypes, phenotypes, fitness)`` arrays of length ``size``."""
    if size < 1:
        raise ValueError("corpus size must be >= 1")
    ss = np.random.SeedSequence(seed)
    rand_seq, *burst_seqs = ss.spawn(6)
    rng = np.random.default_rng(rand_seq)
    if generator == "random":
        g = domain.random_genotypes(rng, size)
        p, f = domain.evaluate_many(g)
        return g, p, f
    if generator != "ga-mix":
        raise ValueError(f"unknown corpus generator {generator!r}")
    burst_evals = max(2, size // 10)
    mu = max(2, min(200, burst_evals - burst_evals % 2))
    rows, seen = [], set()
    for bs in burst_seqs:
        rec = _Recorder(domain)
        moo.single_objective_run(rec, mu, max(burst_evals, mu), variation,
                                 seed=int(bs.generate_state(1)[0]), algorithm="corpus-burst")
        for g, p, f in rec.rows:
            key = g.tobytes()
            if key not in seen:
                seen.add(key)
                rows.append((g, p, f))
    rows = rows[: size // 2]
    g_sel = np.array([r[0] for r in rows]).reshape(len(rows), domain.genotype_length)
    g_rand = domain.random_genotypes(rng, size - len(rows))
    p_rand, f_rand = domain.evaluate_many(g_rand)
    g = np.concatenate([g_rand, g_sel])
    p = np.concatenate([p_rand, np.array([r[1] for r in rows]).reshape(len(rows), domain.phenotype_dim)])
    f = np.concatenate([f_rand, np.array([r[2] for r in rows])])
    return g, p, f


def _array_digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


def write_corpus(bundle: Path, cfg: dict, corpus) -> dict:
    g, p, f = corpus
    cdir = bundle / "corpus"
    cdir.mkdir(parents=True, exist_ok=True)
    np.save(cdir / "genotypes.npy", g)
    np.save(cdir / "phenotypes.npy", p)
    np.save(cdir / "fitness.npy", f)
    meta = {
        "domain": cfg["domain"],
        "size": int(len(f)),
        "generator": cfg["corpus"]["generator"],
        "seed": cfg["corpus"]["seed"],
        "fitness_min": float(f.min()),
        "fitness_max": float(f.max()),
        "genotype_length": int(g.shape[1]),
        "phenotype_dim": int(p.shape[1]),
        "sha256": _array_digest(g, p, f),
    }
    (bundle / "corpus.meta.json").write_text(dump_json(meta))
    return meta


def read_corpus(bundle: Path):
    cdir = Path(bundle) / "corpus"
    meta_path = Path(bundle) / "corpus.meta.json"
    if not meta_path.exists() or not cdir.exists():
        raise BundleError(f"no corpus in {bundle}; run gen-data first")
    meta = json.loads(meta_path.read_text())
    g = np.load(cdir / "genotypes.npy")
    p = np.load(cdir / "phenotypes.npy")
    f = np.load(cdir / "fitness.npy")
    if _array_digest(g, p, f) != meta["sha256"]:
        raise BundleError(f"corpus files in {cdir} do not match corpus.meta.json")
    return (g, p, f), meta


# -- models ----------------------------------------------------------------

def prepare_models(corpus, cfg: dict):
    """Train the VAE on every phenotype, then fit the head with the encoder frozen.

    Returns ``(model, head, archive_spec, diagnostics)``.
    """
    _, p, f = corpus
    r = cfg["reducer"]
    tc = _train_config(cfg)
    arch = reducer.Architecture(p.shape[1], r["latent_dim"], tuple(r["hidden"]))
    model, trace = reducer.train_vae(p, arch, tc)
    head, r2_train = reducer.fit_fitness_head(model, p, f, tc.l2_ridge)

    # generalization check on a fixed 80/20 split, reusing the frozen encoder
    split_rng = np.random.default_rng([r["seed"], 7])
    order = split_rng.permutation(len(f))
    n_hold = max(1, int(round(r["holdout_fraction"] * len(f))))
    hold, fit_idx = order[:n_hold], order[n_hold:]
    split_head, r2_split_train = reducer.fit_fitness_head(model, p[fit_idx], f[fit_idx], tc.l2_ridge)
    r2_holdout = reducer.r2_score(f[hold], reducer.predict_fitness(model, split_head, p[hold]))

    m = reducer.measures(model, p)
    a = cfg["archive"]
    spec = qd.ArchiveSpec.from_measures(m, a["cells_per_dim"], tuple(a["percentiles"]))
    diagnostics = {
        "final_loss": trace[-1],
        "loss_trace": trace,
        "reconstruction_error": reducer.reconstruction_error(model, p),
        "head_r2": r2_train,
        "split_train_r2": r2_split_train,
        "holdout_r2": r2_holdout,
    }
    return model, head, spec, diagnostics


def model_document(model, head, spec, diagnostics, cfg) -> str:
    return reducer.dumps_model(model, head, archive=spec.to_dict(), domain=cfg["domain"],
                               diagnostics=diagnostics)


def read_model(bundle: Path):
    path = Path(bundle) / "model.json"
    if not path.exists():
        raise BundleError(f"no model in {bundle}; run train first")
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BundleError(f"{path} is not valid JSON: {exc}") from exc
    model, head = reducer.model_from_dict(doc)
    spec = qd.ArchiveSpec.from_dict(doc["archive"])
    return text, doc, model, head, spec


# -- runs ------------------------------------------------------------------

def _run_task(args):
    """Worker entry point: one (algorithm, seed) run against the serialized model."""
    model_text, entry, seed, cfg = args
    doc = json.loads(model_text)
    model, head = reducer.model_from_dict(doc)
    spec = qd.ArchiveSpec.from_dict(doc["archive"])
    domain = domains.make_domain(cfg["domain"])
    label = algorithm_label(entry)
    log_ = execute_algorithm(entry, domain, model, head, spec, cfg["budget"], _variation(cfg), seed, label)
    return label, seed, reducer.checksum(model_text), log_


def execute_algorithm(entry: dict, domain, model, head, spec, budget: int, variation, seed: int,
                      label: str | None = None) -> RunLog:
    label = label or algorithm_label(entry)
    kind = entry["id"]
    if kind == "map-elites":
        ev = LearnedEvaluator(domain, model, head)
        _, run_log = qd.map_elites_run(ev, spec, budget, entry.get("init_count", 500), variation, seed,
                                       quality=entry.get("quality", "ground_truth"), algorithm=label)
    elif kind == "nsga2":
        ev = LearnedEvaluator(domain, model, head)
        run_log = moo.nsga2_run(ev, entry.get("mu", 200), budget, variation, seed, algorithm=label).log
    elif kind == "lexicase":
        ev = LearnedEvaluator(domain, model, head)
        run_log = moo.lexicase_run(ev, entry.get("mu", 200), budget, variation, seed,
                                   epsilon=entry.get("epsilon", "mad"), algorithm=label).log
    elif kind == "single-objective":
        # measures are logged for analysis only; selection uses ground truth
        ev = LearnedEvaluator(domain, model)
        run_log = moo.single_objective_run(ev, entry.get("mu", 200), budget, variation, seed,
                                           entry.get("tournament_size", 4), algorithm=label).log
    else:
        raise ConfigError(f"unknown algorithm {kind!r}")
    if ev.evaluations != budget or len(run_log) != budget:
        raise RuntimeError(f"{label} seed {seed}: {ev.evaluations} evaluations for budget {budget}")
    return run_log


def csv_header(latent_dim: int) -> list[str]:
    return (["algorithm", "seed", "eval", "ground_truth"]
            + [f"m{j}" for j in range(latent_dim)] + [f"o{j}" for j in range(latent_dim)])


def write_run_csv(path: Path, run_log: RunLog, latent_dim: int):
    gt, m, o = run_log.arrays()
    blank = [""] * latent_dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(latent_dim))
        for i in range(len(gt)):
            row = [run_log.algorithm, run_log.seed, i + 1, repr(float(gt[i]))]
            row += blank if m is None else [repr(float(v)) for v in m[i]]
            row += blank if o is None else [repr(float(v)) for v in o[i]]
            w.writerow(row)


def read_run_csv(path: Path) -> list[RunRecord]:
    out = []
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[:4] != ["algorithm", "seed", "eval", "ground_truth"]:
                raise BundleError(f"{path}: unexpected header {header[:4]}")
            d = (len(header) - 4) // 2
            for row in reader:
                m = row[4:4 + d]
                o = row[4 + d:4 + 2 * d]
                out.append(RunRecord(
                    row[0], int(row[1]), int(row[2]), float(row[3]),
                    np.array([float(v) for v in m]) if m and m[0] != "" else None,
                    np.array([float(v) for v in o]) if o and o[0] != "" else None,
                ))
    except (OSError, ValueError, IndexError, StopIteration) as exc:
        if isinstance(exc, BundleError):
            raise
        raise BundleError(f"cannot parse run file {path}: {exc}") from exc
    return out


def checkpoint_evals(budget: int) -> dict[str, int]:
    return {f"{int(c * 100)}%": max(1, math.ceil(c * budget)) for c in CHECKPOINTS}


def summarize(best_curves: dict[str, dict[int, np.ndarray]], budget: int, domain) -> dict:
    """Checkpoint medians/IQR of best-so-far ground truth plus goal success rates."""
    out = {}
    for label, per_seed in best_curves.items():
        seeds = sorted(per_seed)
        cps = {}
        for name, k in checkpoint_evals(budget).items():
            vals = np.array([per_seed[s][k - 1] for s in seeds])
            q1, q3 = np.percentile(vals, [25, 75])
            cps[name] = {"eval": k, "median": float(np.median(vals)), "q1": float(q1),
                         "q3": float(q3), "iqr": float(q3 - q1)}
        finals = {s: float(per_seed[s][-1]) for s in seeds}
        success = {s: bool(domain.is_success(v)) for s, v in finals.items()}
        out[label] = {
            "checkpoints": cps,
            "success_rate": sum(success.values()) / len(seeds),
            "per_seed": {str(s): {"final_best": finals[s], "success": success[s]} for s in seeds},
            "records": int(sum(len(per_seed[s]) for s in seeds)),
        }
    return out


def audit_selection(cfg: dict, model, head, domain) -> dict:
    """Re-run NSGA-II and lexicase with scrambled ground truth; selection must not change."""
    results = {}
    variation = _variation(cfg)
    seed = cfg["seeds"][0]
    for entry in cfg["algorithms"]:
        if entry["id"] not in ("nsga2", "lexicase"):
            continue
        mu = entry.get("mu", 200)
        budget = min(cfg["budget"], mu * cfg["audit_budget_generations"])
        runs = []
        for scramble in (False, True):
            ev = _ScrambledEvaluator(domain, model, head, scramble)
            if entry["id"] == "nsga2":
                res = moo.nsga2_run(ev, mu, budget, variation, seed)
            else:
                res = moo.lexicase_run(ev, mu, budget, variation, seed, epsilon=entry.get("epsilon", "mad"))
            runs.append(res)
        a, b = runs
        same = (len(a.selection_trace) == len(b.selection_trace)
                and all(np.array_equal(x, y) for x, y in zip(a.selection_trace, b.selection_trace))
                and np.array_equal(np.asarray(a.log.objectives), np.asarray(b.log.objectives))
                and np.array_equal(a.population.genotypes, b.population.genotypes))
        results[algorithm_label(entry)] = "pass" if same else "fail"
    return results


class _ScrambledEvaluator(LearnedEvaluator):
    def __init__(self, domain, model, head, scramble: bool):
        super().__init__(domain, model, head)
        self.scramble = scramble
        self._noise = np.random.default_rng(12345)

    def __call__(self, genotypes) -> Evaluated:
        ev = super().__call__(genotypes)
        if self.scramble:
            ev.ground_truth = self._noise.normal(size=len(ev))
        return ev


def run_experiment(cfg: dict, bundle: Path, model_text: str | None = None) -> dict:
    """Execute every (algorithm, seed) pair with equal budget and write runs + summary."""
    bundle = Path(bundle)
    if model_text is None:
        model_text, doc, model, head, spec = read_model(bundle)
    else:
        doc = json.loads(model_text)
        model, head = reducer.model_from_dict(doc)
        spec = qd.ArchiveSpec.from_dict(doc["archive"])
    domain = domains.make_domain(cfg["domain"])
    if doc.get("domain") != cfg["domain"] or model.input_dim != domain.phenotype_dim:
        raise ConfigError(
            f"model was trained for domain {doc.get('domain')} but the config asks for {cfg['domain']}")
    if head is None:
        raise ConfigError("model.json has no fitness head")
    digest = reducer.checksum(model_text)

    tasks = [(model_text, entry, seed, cfg) for entry in cfg["algorithms"] for seed in cfg["seeds"]]
    workers = worker_count(cfg)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]
    results.sort(key=lambda r: (r[0], r[1]))

    runs_dir = bundle / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    for stale in runs_dir.glob("*.csv"):
        stale.unlink()
    curves: dict[str, dict[int, np.ndarray]] = {}
    for label, seed, task_digest, run_log in results:
        if task_digest != digest:
            raise RuntimeError("a worker loaded a different model than the bundle's")
        write_run_csv(runs_dir / f"{label}_seed{seed}.csv", run_log, model.latent_dim)
        curves.setdefault(label, {})[seed] = run_log.best_so_far()
        log.info("%s seed %d: best %.4f", label, seed, curves[label][seed][-1])

    summary = {
        "domain": cfg["domain"],
        "budget": cfg["budget"],
        "seeds": cfg["seeds"],
        "model_sha256": digest,
        "checkpoints": checkpoint_evals(cfg["budget"]),
        "algorithms": summarize(curves, cfg["budget"], domain),
        "ground_truth_leakage_audit": audit_selection(cfg, model, head, domain),
    }
    (bundle / "summary.json").write_text(dump_json(summary))
    (bundle / "config.json").write_text(dump_json(cfg))
    return summary


def latent_sweep(cfg: dict, sizes, corpus) -> list[dict]:
    """Train one model per latent size and score it by mean MAP-Elites QD-score."""
    if not sizes:
        raise ValueError("need at least one latent size")
    domain = domains.make_domain(cfg["domain"])
    me = next((a for a in cfg["algorithms"] if a["id"] == "map-elites"), {"id": "map-elites"})
    rows = []
    for dz in sizes:
        c = copy.deepcopy(cfg)
        c["reducer"]["latent_dim"] = int(dz)
        model, head, spec, diag = prepare_models(corpus, c)
        scores = []
        for seed in c["seeds"]:
            ev = LearnedEvaluator(domain, model, head)
            archive, _ = qd.map_elites_run(ev, spec, c["budget"], min(me.get("init_count", 500), c["budget"]),
                                           _variation(c), seed, quality=me.get("quality", "ground_truth"))
            scores.append(qd.qd_score(archive, domain.fitness_offset))
        rows.append({"latent_dim": int(dz), "reconstruction_error": diag["reconstruction_error"],
                     "qd_score": float(np.mean(scores)), "head_r2": diag["head_r2"], "best": False})
    best = max(range(len(rows)), key=lambda i: rows[i]["qd_score"])
    rows[best]["best"] = True
    return rows


# -- report ----------------------------------------------------------------

def load_bundle_runs(bundle: Path) -> dict[str, dict[int, list[RunRecord]]]:
    runs_dir = Path(bundle) / "runs"
    files = sorted(runs_dir.glob("*.csv")) if runs_dir.exists() else []
    if not files:
        raise BundleError(f"no run files under {runs_dir}")
    out: dict[str, dict[int, list[RunRecord]]] = {}
    for path in files:
        recs = read_run_csv(path)
        if not recs:
            raise BundleError(f"{path} contains no records")
        out.setdefault(recs[0].algorithm, {})[recs[0].seed] = recs
    return out


def curve_points(budget: int, n: int = 100) -> list[int]:
    return sorted({max(1, math.ceil(budget * i / n)) for i in range(1, n + 1)})


def build_report(bundle: Path) -> tuple[str, str]:
    """Markdown report and plot-ready CSV of best-so-far curves."""
    bundle = Path(bundle)
    try:
        summary = json.loads((bundle / "summary.json").read_text())
    except FileNotFoundError:
        raise BundleError(f"{bundle / 'summary.json'} is missing") from None
    except json.JSONDecodeError as exc:
        raise BundleError(f"{bundle / 'summary.json'} is not valid JSON: {exc}") from exc
    runs = load_bundle_runs(bundle)
    budget = summary["budget"]
    algs = summary["algorithms"]
    missing = set(algs) - set(runs)
    if missing:
        raise BundleError(f"summary lists algorithms without run files: {sorted(missing)}")

    lines = [f"# Results: {summary['domain'].get('id')}", "",
             f"Budget {budget} evaluations per run, {len(summary['seeds'])} seeds. "
             "Cells show median best-so-far ground truth [q1, q3].", ""]
    names = sorted(summary["checkpoints"], key=summary["checkpoints"].get)
    lines.append("| algorithm | " + " | ".join(f"{n} ({summary['checkpoints'][n]})" for n in names)
                 + " | success |")
    lines.append("|---" * (len(names) + 2) + "|")
    for label in sorted(algs):
        s = algs[label]
        cells = [f"{s['checkpoints'][n]['median']:.4f} [{s['checkpoints'][n]['q1']:.4f}, "
                 f"{s['checkpoints'][n]['q3']:.4f}]" for n in names]
        lines.append(f"| {label} | " + " | ".join(cells) + f" | {s['success_rate']:.2f} |")
    lines += ["", "## Per-seed outcome", "",
              "| algorithm | seed | final best | goal reached |", "|---|---|---|---|"]
    for label in sorted(algs):
        for seed, r in sorted(algs[label]["per_seed"].items(), key=lambda kv: int(kv[0])):
            lines.append(f"| {label} | {seed} | {r['final_best']:.4f} | {'yes' if r['success'] else 'no'} |")
    audit = summary.get("ground_truth_leakage_audit", {})
    if audit:
        lines += ["", "## Selection audit", ""]
        lines += [f"- {k}: {v}" for k, v in sorted(audit.items())]

    points = curve_points(budget)
    rows = ["eval,algorithm,median,q1,q3"]
    for label in sorted(runs):
        curves = []
        for seed in sorted(runs[label]):
            gt = np.array([r.ground_truth for r in runs[label][seed]])
            curves.append(np.maximum.accumulate(gt))
        mat = np.array([[c[k - 1] for k in points] for c in curves])
        med = np.median(mat, axis=0)
        q1, q3 = np.percentile(mat, [25, 75], axis=0)
        for k, a, b, c in zip(points, med, q1, q3):
            rows.append(f"{k},{label},{float(a)!r},{float(b)!r},{float(c)!r}")
    return "\n".join(lines) + "\n", "\n".join(rows) + "\n"
