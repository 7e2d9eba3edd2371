import numpy as np
import pytest

from cosparse import make_dif, make_mix, make_rand
from cosparse.dictionary import from_matrix


@pytest.fixture(scope="session")
def dif():
    return make_dif(3)


@pytest.fixture(scope="session")
def mix():
    return make_mix(3, seed=0)


@pytest.fixture(scope="session")
def rand():
    return make_rand(18, 9, seed=0)


@pytest.fixture(scope="session")
def ident4():
    return from_matrix(np.eye(4))


@pytest.fixture(params=["dif", "mix", "rand"])
def desk_dict(request, dif, mix, rand):
    return {"dif": dif, "mix": mix, "rand": rand}[request.param]


# Acceptance criteria report: one line per criterion, printed after the run.
ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def acceptance():
    def record(cid: str, ok: bool, detail: str) -> bool:
        prev = ACCEPTANCE.get(cid)
        ok = bool(ok) and (prev is None or prev[0])
        detail = detail if prev is None else f"{prev[1]}; {detail}"
        ACCEPTANCE[cid] = (ok, detail)
        print(f"[{cid}] {'PASS' if ok else 'FAIL'}: {detail}", flush=True)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda c: int(c[1:])):
        ok, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"{cid:>4} {'PASS' if ok else 'FAIL'}  {detail}")
