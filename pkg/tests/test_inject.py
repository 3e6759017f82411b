import pytest

import builders as b
from dormant.archive import NameCollision, build_artifact, is_injection_candidate, load_artifact, parse_classes
from dormant.catalog import PlatformCatalog
from dormant.classfile import max_stack_depth, parse_class
from dormant.classfile.constpool import ConstantKind
from dormant.classfile.model import ACC_FINAL, ACC_PRIVATE, ACC_PUBLIC
from dormant.hierarchy import build_graph, serializability
from dormant.inject import (
    DEFAULT_CALLER, Pattern, apply_all, build_caller, inject, pattern_final_properties,
    pattern_interface_reachability, pattern_transitive_serializable,
)

CATALOG = PlatformCatalog.builtin()

FIXTURES = {
    "spring": b.spring_beans,
    "openjpa": b.openjpa,
    "listing7": b.listing7,
    "runnable_iterator": b.runnable_iterator,
    "two_stage": b.two_stage,
    "serializable_free": b.serializable_free,
    "class_for_name": b.class_for_name,
    "not_vuln": lambda: b.jar(b.not_vuln()),
    "branchy": lambda: b.jar(b.branchy()),
    "py4j": lambda: load_artifact(b.PY4J),
    "rustls_aar": lambda: load_artifact(b.RUSTLS_AAR),
}


def _class(a, name):
    return parse_class(a.entries[name + ".class"])


def _non_class(a):
    return {p: v for p, v in a.entries.items() if not p.endswith(".class")}


# -- pattern 1 -------------------------------------------------------------------------------

@pytest.mark.parametrize("fixture", sorted(FIXTURES))
def test_pattern1_postcondition_and_idempotence(fixture):
    a = FIXTURES[fixture]()
    out, report = pattern_transitive_serializable(a, CATALOG)
    view = serializability(build_graph(out, CATALOG))
    parsed, _ = parse_classes(out)
    lacking = [cf.name for path, cf in parsed.items()
               if is_injection_candidate(path) and (cf.is_interface or cf.is_abstract)
               and not view.is_serializable(cf.name)]
    assert lacking == []
    assert _non_class(out) == _non_class(a)
    assert dict(out.outer) == dict(a.outer)
    again, report2 = pattern_transitive_serializable(out, CATALOG)
    assert report2.classes_modified == []
    assert dict(again.entries) == dict(out.entries)
    untouched = set(a.entries) - {n + ".class" for n in report.classes_modified}
    assert all(out.entries[p] == a.entries[p] for p in untouched)


def test_pattern1_skips_types_made_serializable_earlier_in_pass():
    out, report = pattern_transitive_serializable(b.openjpa(), CATALOG)
    # Result extends Closeable, so marking Closeable covers it
    assert b.CLOSEABLE in report.classes_modified
    assert b.RESULT not in report.classes_modified
    assert b.COMPARATOR_ITF in report.classes_modified
    assert b.CONFIGURABLE in report.classes_modified


def test_pattern1_never_touches_concrete_classes():
    a = b.listing7()
    out, report = pattern_transitive_serializable(a, CATALOG)
    assert report.classes_modified == []
    assert dict(out.entries) == dict(a.entries)


# -- pattern 2 -------------------------------------------------------------------------------

def _const_loads(cf, method):
    pool = cf.constant_pool
    return [i for i in cf.find_method(method).code.instructions
            if i.name in ("ldc", "ldc_w") and pool.kind(i.operands[0]) in (ConstantKind.STRING, ConstantKind.CLASS)]


def test_pattern2_not_vuln_becomes_vuln_shape():
    a = b.jar(b.not_vuln())
    before = _class(a, b.NOT_VULN)
    out, report = pattern_final_properties(a, CATALOG)
    cf = _class(out, b.NOT_VULN)
    new_fields = [f for f in cf.fields if f not in before.fields]
    assert len(new_fields) == 2
    assert all(f.access_flags == ACC_PRIVATE | ACC_FINAL for f in new_fields)
    assert sorted(cf.member_descriptor(f) for f in new_fields) == ["Ljava/lang/Class;", "Ljava/lang/String;"]
    assert _const_loads(cf, "method") == []
    assert {(c.kind, c.value) for c in report.constants_extracted} == {("String", "m"), ("Class", b.OTHER)}

    names = {cf.member_name(f) for f in new_fields}
    pool = cf.constant_pool
    ctor = cf.find_method("<init>").code
    stored = {pool.member_ref(i.operands[0])[1] for i in ctor.instructions if i.name == "putfield"}
    assert stored == names
    loads = {pool.member_ref(i.operands[0])[1] for i in cf.find_method("method").code.instructions
             if i.name == "getfield"}
    assert loads == names

    old_m, new_m = before.find_method("method").code, cf.find_method("method").code
    assert new_m.max_stack == old_m.max_stack
    assert max_stack_depth(new_m, pool) <= new_m.max_stack
    assert max_stack_depth(ctor, pool) <= ctor.max_stack


def test_pattern2_branch_and_handler_fixup():
    a = b.jar(b.branchy())
    before = _class(a, b.BRANCHY).find_method("check").code
    out, report = pattern_final_properties(a, CATALOG)
    cf = _class(out, b.BRANCHY)
    after = cf.find_method("check").code
    ifnull_before = next(i for i in before.instructions if i.name == "ifnull")
    ifnull_after = next(i for i in after.instructions if i.name == "ifnull")
    assert ifnull_before.targets() == (10,)
    assert ifnull_after.targets() == (10 + 2 * 2,)  # two constant loads inside the branch
    h0, h1 = before.exception_handlers[0], after.exception_handlers[0]
    assert (h1.start, h1.end, h1.handler) == (h0.start, h0.end + 3 * 2, h0.handler + 3 * 2)
    assert _const_loads(cf, "check") == []
    # the static method keeps its constant and is reported
    assert len(_const_loads(cf, "describe")) == 1
    assert any("static method" in w for w in report.warnings)


def test_pattern2_ignores_non_serializable_classes():
    spec = b.simple_class("org/example/Plain", methods=[b.void_method("m", [("ldc", "x"), ("pop",), ("return",)])])
    a = b.jar(spec)
    out, report = pattern_final_properties(a, CATALOG)
    assert report.classes_modified == [] and dict(out.entries) == dict(a.entries)


# -- pattern 3 -------------------------------------------------------------------------------

def _caller(a):
    return _class(a, DEFAULT_CALLER)


def _invoked(cf, method):
    pool = cf.constant_pool
    return [pool.member_ref(i.operands[0]) for i in cf.find_method(method).code.instructions
            if i.name.startswith("invoke")]


def test_caller_shape_for_runnable_iterator():
    out, report = pattern_interface_reachability(b.runnable_iterator(), CATALOG)
    assert report.caller_interfaces == ["java/lang/Runnable", "java/util/Iterator"]
    cf = _caller(out)
    assert "java/io/Serializable" in cf.interface_names
    fields = {(cf.member_name(f), cf.member_descriptor(f), f.access_flags) for f in cf.fields}
    assert fields == {("iterator", "Ljava/util/Iterator;", ACC_PUBLIC),
                      ("runnable", "Ljava/lang/Runnable;", ACC_PUBLIC),
                      ("object", "Ljava/lang/Object;", ACC_PUBLIC)}
    assert [cf.member_descriptor(m) for m in cf.methods if cf.member_name(m) == "<init>"] == [
        "(Ljava/lang/Runnable;Ljava/util/Iterator;Ljava/lang/Object;)V"]
    assert sorted(_invoked(cf, "hashCode")) == [
        ("java/lang/Runnable", "run", "()V"),
        ("java/util/Iterator", "hasNext", "()Z"),
        ("java/util/Iterator", "next", "()Ljava/lang/Object;"),
    ]
    h = cf.find_method("hashCode").code
    assert max_stack_depth(h, cf.constant_pool) <= h.max_stack


def test_caller_calls_every_catalogued_method():
    cf, _ = build_caller(["java/util/Comparator", "java/lang/Comparable", "java/util/Map"], CATALOG)
    called = set(_invoked(cf, "hashCode"))
    for itf in ("java/util/Comparator", "java/lang/Comparable", "java/util/Map"):
        for name, desc in CATALOG.interface_methods(itf):
            assert (itf, name, desc) in called
    h = cf.find_method("hashCode").code
    assert max_stack_depth(h, cf.constant_pool) <= h.max_stack


def test_listing7_houses_inherited_runnable():
    _, report = pattern_interface_reachability(b.listing7(), CATALOG)
    assert report.caller_interfaces == ["java/lang/Runnable"]


def test_serializable_free_artifact_houses_nothing():
    out, report = pattern_interface_reachability(b.serializable_free(), CATALOG)
    assert report.caller_interfaces == []
    assert DEFAULT_CALLER + ".class" in out.entries


def test_caller_name_collision():
    a, _ = pattern_interface_reachability(b.listing7(), CATALOG)
    with pytest.raises(NameCollision):
        pattern_interface_reachability(a, CATALOG)
    out, report = pattern_interface_reachability(a, CATALOG, "org/example/Caller2")
    assert report.caller_class == "org/example/Caller2"


# -- combined ----------------------------------------------------------------------------------

def test_two_stage_adds_interfaces():
    _, single = pattern_interface_reachability(b.two_stage(), CATALOG)
    _, combined = apply_all(b.two_stage(), CATALOG)
    assert single.caller_interfaces == ["java/lang/Runnable"]
    assert set(combined.caller_interfaces) > set(single.caller_interfaces)
    assert "java/util/function/Function" in combined.caller_interfaces
    assert [s.pattern for s in combined.stages] == [
        Pattern.TRANSITIVE_SERIALIZABLE, Pattern.FINAL_PROPERTIES, Pattern.INTERFACE_REACHABILITY]


@pytest.mark.parametrize("pattern", list(Pattern))
def test_inject_dispatch_and_validity(pattern):
    for name in ("spring", "openjpa", "branchy"):
        a = FIXTURES[name]()
        out, report = inject(a, pattern, CATALOG)
        assert report.pattern is pattern
        for path in out.class_entries:
            data = out.entries[path]
            cf = parse_class(data)
            for m in cf.methods:
                if m.code is not None:
                    assert max_stack_depth(m.code, cf.constant_pool) <= m.code.max_stack


def test_signed_artifact_warns():
    a = build_artifact({**b.listing7().entries, "META-INF/SIGNER.SF": b"x"})
    _, report = pattern_interface_reachability(a, CATALOG)
    assert any("sign" in w.lower() for w in report.warnings)


def test_report_json_counts():
    _, report = apply_all(b.openjpa(), CATALOG)
    data = report.to_json()
    assert data["pattern"] == "all"
    assert data["classes_modified"]["count"] == len(data["classes_modified"]["items"])
    assert data["caller_interfaces"]["items"] == ["java/lang/Comparable", "java/util/Comparator",
                                                  "java/util/Iterator"]
