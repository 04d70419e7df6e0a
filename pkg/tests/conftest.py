
import numpy as np
import pytest

from divbench import _pykernels, domains, harness, reducer

try:
    from divbench import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = [_pykernels] + ([_ckernels] if _ckernels is not None else [])


@pytest.fixture(params=BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def backend(request):
    return request.param


@pytest.fixture
def medium():
    return domains.builtin_maze("medium")


@pytest.fixture
def hard():
    return domains.builtin_maze("hard")


@pytest.fixture(scope="session")
def small_cfg():
    return harness.load_config(overrides=[
        "corpus.size=2000",
        "reducer.epochs=15",
        "budget=1200",
        "seeds=[0, 1]",
        "algorithms.0.init_count=200",
        "algorithms.1.mu=100",
        "algorithms.2.mu=100",
        "algorithms.3.mu=100",
    ])


@pytest.fixture(scope="session")
def small_models(small_cfg):
    domain = domains.make_domain(small_cfg["domain"])
    corpus = harness.generate_corpus(domain, 2000, "ga-mix", 1)
    model, head, spec, diag = harness.prepare_models(corpus, small_cfg)
    return domain, corpus, model, head, spec, diag


@pytest.fixture(scope="session")
def default_models():
    """Corpus and models under the shipped default configuration."""
    cfg = harness.load_config()
    domain = domains.make_domain(cfg["domain"])
    c = cfg["corpus"]
    corpus = harness.generate_corpus(domain, c["size"], c["generator"], c["seed"], harness._variation(cfg))
    model, head, spec, diag = harness.prepare_models(corpus, cfg)
    return cfg, domain, corpus, model, head, spec, diag


# -- acceptance summary: one line per criterion at the end of the session ---

_CRITERIA = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        detail = dict(report.user_properties).get("detail", "")
        _CRITERIA[name] = (report.outcome, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA, key=lambda n: int(n.split("_")[2])):
        outcome, detail = _CRITERIA[name]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  {name}  {detail}".rstrip())
