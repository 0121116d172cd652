import functools

from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


@functools.lru_cache(maxsize=None)
def cached_solution(name):
    from soliton_forge.scenarios import build_solution, load_scenario

    s = load_scenario(name)
    return s, build_solution(s)


@functools.lru_cache(maxsize=None)
def cached_report(name):
    """Full verification-plan run, shared between test modules."""
    from soliton_forge.scenarios import run_scenario

    s, _ = cached_solution(name)
    return run_scenario(s)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
