"""The nine acceptance criteria, each at its stated threshold."""
import itertools
import json
import time

from smartml import ast as A
from smartml.cli import main
from smartml.interpreter import CallEnter, CallReturn, Machine, Next, Revert, Stuck
from smartml.monitor import UNSAFE, classify_trace, fuzz_cases, monitor_program
from smartml.parser import parse_program
from smartml.pretty import pretty_print
from smartml.progen import random_program
from smartml.runtime import Ref, canonical
from smartml.typesys import Checker, Ident, Top, check_contract, check_program, locs

from conftest import CORPUS, load_corpus, record
from oracles import add, from_list_int, index_of, locs_oracle, to_list_int


# 1 -------------------------------------------------------------------------

def test_criterion_1_case_study_rejected():
    r = load_corpus("store_attacker.sml")
    t0 = time.perf_counter()
    reports = check_program(r)
    elapsed = time.perf_counter() - t0
    f = reports["Store"].failures[0] if reports["Store"].failures else None
    ok = (not reports["Store"].ok and f is not None and (f.contract, f.method) == ("Attacker", "receive")
          and f.conflict is not None and f.conflict[0][1] == f.conflict[1][1] == "transfer"
          and elapsed < 1.0)
    record(1, ok, f"{f} in {elapsed:.3f}s")
    assert ok


# 2 -------------------------------------------------------------------------

def test_criterion_2_cei_accepted_via_call_safe():
    r = load_corpus("store_cei.sml")
    t0 = time.perf_counter()
    reports = check_program(r, explain=True)
    elapsed = time.perf_counter() - t0
    rules = []

    def walk(node):
        rules.append((node.rule, node.text))
        for c in node.children:
            walk(c)

    for d in reports["Store"].derivation:
        walk(d)
    via_safe = any(rule == "Call-Safe" and "receive" in text for rule, text in rules)
    ok = all(x.ok for x in reports.values()) and via_safe and elapsed < 1.0
    record(2, ok, f"accepted={all(x.ok for x in reports.values())} call-safe={via_safe} in {elapsed:.3f}s")
    assert ok


# 3 -------------------------------------------------------------------------

def test_criterion_3_accepted_programs_never_unsafe(fuzz_corpus, accepted_corpus):
    t0 = time.perf_counter()
    unsafe, traces = [], 0
    for seed, src, r, _ in accepted_corpus:
        for run, verdict in monitor_program(r, seed=seed, budget=100, fuel=2000):
            traces += 1
            if verdict.level == UNSAFE:
                unsafe.append((seed, run.case.describe()))
    elapsed = time.perf_counter() - t0
    ok = len(fuzz_corpus) >= 200 and len(accepted_corpus) >= 50 and not unsafe and elapsed < 300
    record(3, ok, f"{len(fuzz_corpus)} programs, {len(accepted_corpus)} accepted, {traces} traces, "
                  f"{len(unsafe)} Unsafe, {elapsed:.0f}s")
    assert ok, unsafe[:3]


# 4 / 5 ---------------------------------------------------------------------

def _runtime_theta(cfg, gamma, pm):
    """Alias sets built from the values the active frame actually holds."""
    idents = {}

    def ident(i):
        if i not in idents:
            idents[i] = Ident(1000 + i, pm.contract_of(i))
        return idents[i]

    theta = {}
    for name, t in gamma.items():
        v = cfg.volatile.get(name)
        if isinstance(t, A.ContractType) and isinstance(v, Ref) and v.id in pm:
            theta[("v", name)] = frozenset({ident(v.id)})
    return theta, frozenset({ident(cfg.active)})


def _residual_ok(checker, r, cfg):
    pm = cfg.permanent
    contract = pm.contract_of(cfg.active)
    owner, _ = r.lookup_method(contract, cfg.method)
    gamma = dict(r.locals[(owner, cfg.method)])
    gamma["$error"] = A.STRING
    theta, this_ids = _runtime_theta(cfg, gamma, pm)
    try:
        checker.check_residual(contract, cfg.method, cfg.cont, gamma, theta, this_ids)
        return None
    except Exception as exc:  # noqa: BLE001 - any failure is a counterexample
        return f"{contract}.{cfg.method}: {exc}"


def test_criterion_4_and_5_preservation_and_progress(accepted_corpus):
    steps, bad_pres, stuck = 0, [], []
    for seed, src, r, _ in accepted_corpus:
        checker = Checker(r)
        m = Machine(r)
        for case in fuzz_cases(r, seed=seed, budget=10):
            for before, res in m.iter_steps(case.config, fuel=300):
                steps += 1
                if isinstance(res, Stuck):
                    stuck.append((seed, case.describe(), res.reason))
                if isinstance(res, Next):
                    err = _residual_ok(checker, r, res.config)
                    if err:
                        bad_pres.append((seed, case.describe(), err))
    ok4 = steps >= 1000 and not bad_pres
    ok5 = steps >= 1000 and not stuck
    record(4, ok4, f"{steps} steps re-typed, {len(bad_pres)} failures")
    record(5, ok5, f"{steps} steps, {len(stuck)} stuck")
    assert ok4, bad_pres[:3]
    assert ok5, stuck[:3]


# 6 -------------------------------------------------------------------------

def _rollback_exact(m, cfg, fuel=400):
    """Check every snapshot/revert pairing along one run; returns (reverts, problems)."""
    snaps = [canonical(cfg.permanent.to_json())]
    kinds = [True]
    reverts, problems = 0, []
    for before, res in m.iter_steps(cfg, fuel):
        post = res.config
        for e in res.events:
            if isinstance(e, CallEnter):
                kinds.append(e.transactional)
                if e.transactional:
                    snaps.append(canonical(before.permanent.to_json()))
            elif isinstance(e, CallReturn):
                if kinds.pop() and e.ok:
                    snaps.pop()
                    if canonical(post.permanent.to_json()) == canonical(before.rollback[0].to_json()) \
                            and before.permanent != before.rollback[0]:
                        problems.append("success path lost callee effects")
            elif isinstance(e, Revert):
                reverts += 1
                expect = snaps.pop()
                if canonical(post.permanent.to_json()) != expect:
                    problems.append("revert did not restore the snapshot")
                if e.depth == 0 and not isinstance(res, Next):
                    kinds.pop() if kinds else None
    return reverts, problems


def test_criterion_6_rollback_exactness(fuzz_corpus):
    traces = reverts = 0
    problems = []
    for seed, src, r, _ in fuzz_corpus:
        m = Machine(r)
        for case in fuzz_cases(r, seed=seed, budget=5):
            n, p = _rollback_exact(m, case.config)
            traces += 1
            reverts += n
            problems += [(seed, case.describe(), x) for x in p]
    r = load_corpus("store_attacker.sml")
    m = Machine(r)
    for case in fuzz_cases(r, seed=0, budget=50):
        n, p = _rollback_exact(m, case.config)
        traces += 1
        reverts += n
        problems += [("store", case.describe(), x) for x in p]
    ok = reverts > 0 and not problems
    record(6, ok, f"{traces} traces, {reverts} reverts checked, {len(problems)} mismatches")
    assert ok, problems[:3]


# 7 -------------------------------------------------------------------------

def test_criterion_7_locs_against_oracle(fuzz_corpus):
    checked = mismatches = 0
    for seed, src, r, _ in fuzz_corpus:
        assert len(r.contracts) <= 3
        for c, decl in r.contracts.items():
            assert len(decl.methods) <= 3
            for ids in ({Ident(1, c)}, {Top(c)}, {Ident(1, c), Top(c)}):
                for m in decl.methods:
                    checked += 1
                    if locs(r, ids, m.body, c) != locs_oracle(r, ids, m.body, c):
                        mismatches += 1
    ok = checked > 0 and mismatches == 0
    record(7, ok, f"{checked} bodies, {mismatches} mismatches")
    assert ok


# 8 -------------------------------------------------------------------------

def test_criterion_8_adt_conformance():
    m = Machine(load_corpus("lists.sml"))
    alphabet = (-10, -1, 0, 4, 10)
    cases = bad = 0
    for length in range(6):
        for xs in itertools.product(alphabet, repeat=length):
            lst = to_list_int(xs)
            for n in range(-10, 11):
                cases += 1
                if m.eval_adt("ListInt", "indexOf", (lst, n)) != index_of(list(xs), n):
                    bad += 1
                if from_list_int(m.eval_adt("ListInt", "add", (lst, n))) != add(xs, n):
                    bad += 1
    nil = m.eval_adt("ListInt", "indexOf", (to_list_int([]), 5))
    ok = bad == 0 and nil == -1
    record(8, ok, f"{cases} (list, n) cases, {bad} mismatches, indexOf(nil, n) = {nil}")
    assert ok


# 9 -------------------------------------------------------------------------

def test_criterion_9_round_trip_and_determinism(capsys):
    sources = [p.read_text() for p in sorted(CORPUS.glob("*.sml"))]
    sources += [random_program(s) for s in range(100)]
    broken = 0
    for src in sources:
        prog = parse_program(src)
        if parse_program(pretty_print(prog)) != prog:
            broken += 1
    outs = []
    for _ in range(2):
        main(["monitor", str(CORPUS / "store_cei.sml"), "--fuzz", "--seed", "9", "--budget", "25",
              "--format", "json"])
        outs.append(capsys.readouterr().out)
    same = outs[0] == outs[1] and json.loads(outs[0])["runs"]
    ok = broken == 0 and bool(same)
    record(9, ok, f"{len(sources)} programs round-tripped, {broken} broken, monitor reports identical={bool(same)}")
    assert ok
