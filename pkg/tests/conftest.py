import pytest


@pytest.fixture
def announce(request):
    """Print one visible 'ACCEPTANCE <name>: PASS|FAIL (...)' line per
    criterion, bypassing output capture, then assert."""
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def _announce(criterion: str, passed: bool, detail: str):
        status = "PASS" if passed else "FAIL"
        line = f"ACCEPTANCE {criterion}: {status} ({detail})"
        if capman is not None:
            with capman.global_and_fixture_disabled():
                print(line, flush=True)
        else:
            print(line, flush=True)
        assert passed, f"{criterion}: {detail}"

    return _announce
