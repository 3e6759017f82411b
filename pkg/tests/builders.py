"""Synthetic artifacts assembled from class descriptions.

Each builder returns an :class:`Artifact`; the shapes follow well-known
library code (spring-beans, OpenJPA) reduced to the instructions that
matter for serializability and reachability.
"""

from __future__ import annotations

from pathlib import Path

from dormant.archive import Artifact, build_artifact, class_path, load_artifact, write_artifact
from dormant.classfile import ClassConst, ClassSpec, FieldSpec, Label, MethodSpec, assemble_class, emit_class
from dormant.classfile import default_constructor as ctor
from dormant.classfile.model import ACC_ABSTRACT, ACC_FINAL, ACC_INTERFACE, ACC_PRIVATE, ACC_PUBLIC, ACC_STATIC

SER = "java/io/Serializable"
OBJ = "java/lang/Object"
ITF = ACC_PUBLIC | ACC_INTERFACE | ACC_ABSTRACT
ABSTRACT_METHOD = ACC_PUBLIC | ACC_ABSTRACT
METHOD = "java/lang/reflect/Method"
INVOKE = (METHOD, "invoke", "(Ljava/lang/Object;[Ljava/lang/Object;)Ljava/lang/Object;")
GET_METHOD = ("java/lang/Class", "getMethod", "(Ljava/lang/String;[Ljava/lang/Class;)Ljava/lang/reflect/Method;")


def jar(*specs: ClassSpec, extra: dict[str, bytes] | None = None) -> Artifact:
    entries = {class_path(s.name): emit_class(assemble_class(s)) for s in specs}
    entries.update(extra or {})
    return build_artifact(entries)


def interface(name, methods=(), extends=()) -> ClassSpec:
    return ClassSpec(name, OBJ, list(extends), ITF, [],
                     [MethodSpec(n, d, ABSTRACT_METHOD) for n, d in methods])


def simple_class(name, super_name=OBJ, interfaces=(), methods=(), abstract=False, fields=()) -> ClassSpec:
    access = ACC_PUBLIC | 0x0020 | (ACC_ABSTRACT if abstract else 0)
    return ClassSpec(name, super_name, list(interfaces), access, list(fields), [ctor(super_name), *methods])


def void_method(name, code=None, desc="()V", access=ACC_PUBLIC) -> MethodSpec:
    return MethodSpec(name, desc, access, code if code is not None else [("return",)])


# -- spring-beans motivating example ---------------------------------------------------

DBA = "org/springframework/beans/factory/support/DisposableBeanAdapter"
HOLDER = "org/springframework/beans/factory/support/HashCodeHolder"


def disposable_bean_adapter() -> ClassSpec:
    names = "[Ljava/lang/String;"
    destroy = [
        ("aload_0",), ("getfield", DBA, "destroyMethodNames", names), ("ifnull", "end"),
        ("aload_0",), ("getfield", DBA, "destroyMethodNames", names), ("astore_1",),
        ("aload_1",), ("arraylength",), ("istore_2",), ("iconst_0",), ("istore_3",),
        Label("loop"),
        ("iload_3",), ("iload_2",), ("if_icmpge", "end"),
        ("aload_1",), ("iload_3",), ("aaload",), ("astore", 4),
        ("aload_0",), ("aload", 4),
        ("invokespecial", DBA, "determineDestroyMethod", f"(Ljava/lang/String;)L{METHOD};"),
        ("astore", 5),
        ("aload", 5), ("ifnull", "next"),
        ("aload_0",), ("aload", 5), ("invokespecial", DBA, "invokeCustomDestroyMethod", f"(L{METHOD};)V"),
        Label("next"),
        ("iinc", 3, 1), ("goto", "loop"),
        Label("end"),
        ("return",),
    ]
    determine = [
        ("aload_0",), ("getfield", DBA, "bean", f"L{OBJ};"),
        ("invokevirtual", OBJ, "getClass", "()Ljava/lang/Class;"),
        ("aload_1",), ("iconst_0",), ("anewarray", "java/lang/Class"),
        ("invokevirtual", *GET_METHOD), ("areturn",),
    ]
    invoke_custom = [
        ("aload_1",), ("invokevirtual", METHOD, "getParameterCount", "()I"),
        ("anewarray", OBJ), ("astore_2",),
        ("aload_1",), ("invokestatic", "org/springframework/util/ReflectionUtils", "makeAccessible",
                       f"(L{METHOD};)V"),
        ("aload_1",), ("aload_0",), ("getfield", DBA, "bean", f"L{OBJ};"), ("aload_2",),
        ("invokevirtual", *INVOKE), ("pop",), ("return",),
    ]
    return ClassSpec(DBA, OBJ, ["java/lang/Runnable", SER], 0x0020, [
        FieldSpec("bean", f"L{OBJ};", ACC_PRIVATE | ACC_FINAL),
        FieldSpec("beanName", "Ljava/lang/String;", ACC_PRIVATE | ACC_FINAL),
        FieldSpec("destroyMethodNames", names, ACC_PRIVATE),
    ], [
        ctor(),
        void_method("run", [("aload_0",), ("invokevirtual", DBA, "destroy", "()V"), ("return",)]),
        void_method("destroy", destroy),
        MethodSpec("determineDestroyMethod", f"(Ljava/lang/String;)L{METHOD};", ACC_PRIVATE, determine),
        MethodSpec("invokeCustomDestroyMethod", f"(L{METHOD};)V", ACC_PRIVATE, invoke_custom),
    ])


def hash_code_holder(serializable: bool) -> list[ClassSpec]:
    """A class whose hashCode runs a Runnable field, plus its anonymous
    Runnable; only an entry point when the holder is serializable."""
    anon = HOLDER + "$1"
    holder = ClassSpec(HOLDER, OBJ, [SER] if serializable else [], 0x0020, [
        FieldSpec("hashCode", "I"),
        FieldSpec("hashCodeGen", "Ljava/lang/Runnable;", ACC_PRIVATE | ACC_FINAL),
    ], [
        MethodSpec("<init>", "()V", ACC_PUBLIC, [
            ("aload_0",), ("invokespecial", OBJ, "<init>", "()V"),
            ("aload_0",), ("new", anon), ("dup",), ("invokespecial", anon, "<init>", "()V"),
            ("putfield", HOLDER, "hashCodeGen", "Ljava/lang/Runnable;"),
            ("return",),
        ]),
        MethodSpec("hashCode", "()I", ACC_PUBLIC, [
            ("aload_0",), ("getfield", HOLDER, "hashCode", "I"), ("ifne", "done"),
            ("aload_0",), ("getfield", HOLDER, "hashCodeGen", "Ljava/lang/Runnable;"),
            ("invokeinterface", "java/lang/Runnable", "run", "()V"),
            Label("done"),
            ("aload_0",), ("getfield", HOLDER, "hashCode", "I"), ("ireturn",),
        ]),
    ])
    runnable = simple_class(anon, interfaces=["java/lang/Runnable"], methods=[void_method("run")])
    return [holder, runnable]


def spring_beans(holder_serializable: bool = False) -> Artifact:
    return jar(disposable_bean_adapter(), *hash_code_holder(holder_serializable),
               extra={"META-INF/MANIFEST.MF": b"Manifest-Version: 1.0\r\n\r\n"})


# -- constant extraction -----------------------------------------------------------------

NOT_VULN = "org/example/NotVuln"
OTHER = "org/example/OtherClass"


def not_vuln() -> ClassSpec:
    method = [
        ("ldc", ClassConst(OTHER)), ("ldc", "m"), ("iconst_0",), ("anewarray", "java/lang/Class"),
        ("invokevirtual", *GET_METHOD), ("astore_2",),
        ("aload_2",), ("aload_1",), ("iconst_0",), ("anewarray", OBJ),
        ("invokevirtual", *INVOKE), ("pop",), ("return",),
    ]
    return simple_class(NOT_VULN, interfaces=[SER], methods=[void_method("method", method, f"(L{OBJ};)V")])


BRANCHY = "org/example/Branchy"


def branchy() -> ClassSpec:
    """A forward branch spans two constant loads; the handler range covers them."""
    code = [
        Label("start"),
        ("aload_1",), ("ifnull", "skip"),
        ("ldc", "first"), ("pop",),
        ("ldc", "second"), ("pop",),
        Label("skip"),
        ("ldc", ClassConst(OTHER)), ("pop",),
        Label("end"),
        ("return",),
        Label("handler"),
        ("pop",), ("return",),
    ]
    m = MethodSpec("check", f"(L{OBJ};)V", ACC_PUBLIC, code, [("start", "end", "handler", "java/lang/Exception")])
    static = MethodSpec("describe", "()Ljava/lang/String;", ACC_PUBLIC | ACC_STATIC, [("ldc", "static"), ("areturn",)])
    return ClassSpec(BRANCHY, OBJ, [SER], ACC_PUBLIC | 0x0020, [], [ctor(), m, static])


# -- Caller synthesis ----------------------------------------------------------------------

TASK = "org/example/Task"


def runnable_iterator() -> Artifact:
    task = simple_class(TASK, interfaces=["java/lang/Runnable", "java/util/Iterator", SER], methods=[
        void_method("run"),
        MethodSpec("hasNext", "()Z", ACC_PUBLIC, [("iconst_0",), ("ireturn",)]),
        MethodSpec("next", f"()L{OBJ};", ACC_PUBLIC, [("aconst_null",), ("areturn",)]),
    ])
    return jar(task)


BASE = "org/example/Base"
CHILD = "org/example/Child"


def listing7() -> Artifact:
    base = simple_class(BASE, interfaces=["java/lang/Runnable"], methods=[void_method("run")])
    child = simple_class(CHILD, BASE, [SER])
    return jar(base, child)


def serializable_free() -> Artifact:
    return jar(simple_class("org/example/Plain", interfaces=["java/lang/Runnable"], methods=[void_method("run")]),
               interface("org/example/Api", [("call", "()V")]))


# -- two-stage combination -------------------------------------------------------------

def two_stage() -> Artifact:
    """``Mapper`` is serializable only once its abstract base gets the marker,
    so Function joins the Caller only under the combined application."""
    base = simple_class("org/example/AbstractMapper", interfaces=["java/util/function/Function"], abstract=True)
    mapper = simple_class("org/example/Mapper", "org/example/AbstractMapper", methods=[
        MethodSpec("apply", f"(L{OBJ};)L{OBJ};", ACC_PUBLIC, [("aload_1",), ("areturn",)]),
    ])
    task = simple_class(TASK, interfaces=["java/lang/Runnable", SER], methods=[void_method("run")])
    return jar(base, mapper, task)


# -- OpenJPA case study ---------------------------------------------------------------------

J = "org/apache/openjpa/"
CLOSEABLE = J + "lib/util/Closeable"
CONFIGURABLE = J + "lib/conf/Configurable"
RESULT = J + "jdbc/sql/Result"
MERGED = J + "jdbc/sql/MergedResult"
COMPARATOR_ITF = J + "jdbc/sql/MergedResult$ResultComparator"
UNION_CMP = J + "jdbc/sql/LogicalUnion$ResultComparator"
RS_RESULT = J + "jdbc/sql/ResultSetResult"
DICT = J + "jdbc/sql/DBDictionary"
PG_DICT = J + "jdbc/sql/PostgresDictionary"
RESULT_ITER = J + "jdbc/meta/strats/LRSPProxyMap$ResultIterator"
OPENJPA_ID = J + "util/OpenJPAId"
RS = "java/sql/ResultSet"
GET_OBJECT = f"(L{RS};ILjava/util/Map;)L{OBJ};"
ORDERING = f"(L{RESULT};I)L{OBJ};"
ORDERING_PRIVATE = f"(L{RS};L{OBJ};)L{OBJ};"


def openjpa() -> Artifact:
    closeable = interface(CLOSEABLE, [("close", "()V")])
    configurable = interface(CONFIGURABLE, [("startConfiguration", "()V")])
    result = interface(RESULT, [("next", "()Z")], [CLOSEABLE])
    comparator = interface(COMPARATOR_ITF, [("getOrderingValue", ORDERING)], ["java/util/Comparator"])

    result_iter = simple_class(RESULT_ITER, interfaces=["java/util/Iterator", CLOSEABLE], fields=[
        FieldSpec("_res", f"[L{RESULT};", ACC_PRIVATE | ACC_FINAL),
        FieldSpec("_next", "Ljava/lang/Boolean;", ACC_PRIVATE),
    ], methods=[
        MethodSpec("hasNext", "()Z", ACC_PUBLIC, [
            ("aload_0",), ("getfield", RESULT_ITER, "_next", "Ljava/lang/Boolean;"), ("ifnonnull", "ret"),
            ("aload_0",),
            ("aload_0",), ("getfield", RESULT_ITER, "_res", f"[L{RESULT};"), ("iconst_0",), ("aaload",),
            ("invokeinterface", RESULT, "next", "()Z"),
            ("invokestatic", "java/lang/Boolean", "valueOf", "(Z)Ljava/lang/Boolean;"),
            ("putfield", RESULT_ITER, "_next", "Ljava/lang/Boolean;"),
            Label("ret"),
            ("aload_0",), ("getfield", RESULT_ITER, "_next", "Ljava/lang/Boolean;"),
            ("invokevirtual", "java/lang/Boolean", "booleanValue", "()Z"), ("ireturn",),
        ]),
        MethodSpec("next", f"()L{OBJ};", ACC_PUBLIC, [("aconst_null",), ("areturn",)]),
        void_method("close"),
    ])

    merged = simple_class(MERGED, interfaces=[RESULT], fields=[
        FieldSpec("_res", f"[L{RESULT};", ACC_PRIVATE | ACC_FINAL),
        FieldSpec("_status", "[B", ACC_PRIVATE | ACC_FINAL),
        FieldSpec("_order", f"[L{OBJ};", ACC_PRIVATE | ACC_FINAL),
        FieldSpec("_comp", f"L{COMPARATOR_ITF};", ACC_PRIVATE | ACC_FINAL),
        FieldSpec("_pushedBack", "Z", ACC_PRIVATE),
    ], methods=[
        MethodSpec("next", "()Z", ACC_PUBLIC, [
            ("aload_0",), ("getfield", MERGED, "_pushedBack", "Z"), ("ifeq", "start"),
            ("iconst_1",), ("ireturn",),
            Label("start"),
            ("iconst_0",), ("istore_1",),
            Label("loop"),
            ("iload_1",), ("aload_0",), ("getfield", MERGED, "_status", "[B"), ("arraylength",),
            ("if_icmpge", "done"),
            ("aload_0",), ("getfield", MERGED, "_status", "[B"), ("iload_1",), ("baload",),
            ("lookupswitch", {0: "next"}, "step"),
            Label("next"),
            ("aload_0",), ("getfield", MERGED, "_res", f"[L{RESULT};"), ("iload_1",), ("aaload",),
            ("invokeinterface", RESULT, "next", "()Z"), ("ifeq", "step"),
            ("aload_0",), ("getfield", MERGED, "_order", f"[L{OBJ};"), ("iload_1",),
            ("aload_0",), ("getfield", MERGED, "_comp", f"L{COMPARATOR_ITF};"),
            ("aload_0",), ("getfield", MERGED, "_res", f"[L{RESULT};"), ("iload_1",), ("aaload",),
            ("iload_1",),
            ("invokeinterface", COMPARATOR_ITF, "getOrderingValue", ORDERING),
            ("aastore",),
            Label("step"),
            ("iinc", 1, 1), ("goto", "loop"),
            Label("done"),
            ("iconst_1",), ("ireturn",),
        ]),
        void_method("close"),
    ])

    rs_result = simple_class(RS_RESULT, interfaces=[RESULT], fields=[FieldSpec("_rs", f"L{RS};")], methods=[
        MethodSpec("next", "()Z", ACC_PUBLIC, [
            ("aload_0",), ("getfield", RS_RESULT, "_rs", f"L{RS};"),
            ("invokeinterface", RS, "next", "()Z"), ("ireturn",),
        ]),
        MethodSpec("getResultSet", f"()L{RS};", ACC_PUBLIC, [
            ("aload_0",), ("getfield", RS_RESULT, "_rs", f"L{RS};"), ("areturn",),
        ]),
        void_method("close"),
    ])

    union_cmp = simple_class(UNION_CMP, interfaces=[COMPARATOR_ITF], fields=[
        FieldSpec("_orders", "[Ljava/util/List;", ACC_PRIVATE | ACC_FINAL),
        FieldSpec("_dict", f"L{DICT};", ACC_PRIVATE | ACC_FINAL),
    ], methods=[
        MethodSpec("getOrderingValue", ORDERING, ACC_PUBLIC, [
            ("aload_1",), ("checkcast", RS_RESULT), ("invokevirtual", RS_RESULT, "getResultSet", f"()L{RS};"),
            ("astore_3",),
            ("aload_0",), ("getfield", UNION_CMP, "_orders", "[Ljava/util/List;"), ("iload_2",), ("aaload",),
            ("invokeinterface", "java/util/List", "size", "()I"), ("iconst_1",), ("if_icmpne", "other"),
            ("aload_0",), ("aload_3",),
            ("aload_0",), ("getfield", UNION_CMP, "_orders", "[Ljava/util/List;"), ("iload_2",), ("aaload",),
            ("iconst_0",), ("invokeinterface", "java/util/List", "get", f"(I)L{OBJ};"),
            ("invokespecial", UNION_CMP, "getOrderingValue", ORDERING_PRIVATE), ("areturn",),
            Label("other"),
            ("aconst_null",), ("areturn",),
        ]),
        MethodSpec("getOrderingValue", ORDERING_PRIVATE, ACC_PRIVATE, [
            ("aload_0",), ("getfield", UNION_CMP, "_dict", f"L{DICT};"), ("aload_1",),
            ("aload_2",), ("checkcast", "java/lang/Integer"),
            ("invokevirtual", "java/lang/Integer", "intValue", "()I"), ("iconst_1",), ("iadd",),
            ("aconst_null",), ("invokevirtual", DICT, "getObject", GET_OBJECT), ("areturn",),
        ]),
        MethodSpec("compare", f"(L{OBJ};L{OBJ};)I", ACC_PUBLIC, [("iconst_0",), ("ireturn",)]),
    ])

    dictionary = simple_class(DICT, interfaces=[CONFIGURABLE], methods=[
        MethodSpec("getObject", GET_OBJECT, ACC_PUBLIC, [
            ("aload_1",), ("iload_2",), ("invokeinterface", RS, "getObject", f"(I)L{OBJ};"), ("areturn",),
        ]),
        void_method("startConfiguration"),
    ])

    pg = simple_class(PG_DICT, DICT, methods=[
        MethodSpec("getObject", GET_OBJECT, ACC_PUBLIC, [
            ("aload_0",), ("aload_1",), ("iload_2",), ("aload_3",),
            ("invokespecial", DICT, "getObject", GET_OBJECT), ("astore", 4),
            ("aload", 4), ("invokevirtual", OBJ, "getClass", "()Ljava/lang/Class;"),
            ("invokevirtual", "java/lang/Class", "getName", "()Ljava/lang/String;"),
            ("ldc", "org.postgresql.util.PGobject"),
            ("invokevirtual", "java/lang/String", "equals", f"(L{OBJ};)Z"), ("ifeq", "out"),
            Label("try"),
            ("aload", 4), ("invokevirtual", OBJ, "getClass", "()Ljava/lang/Class;"),
            ("ldc", "getType"), ("aconst_null",), ("checkcast", "[Ljava/lang/Class;"),
            ("invokevirtual", *GET_METHOD), ("astore", 5),
            ("aload", 5), ("aload", 4), ("aconst_null",), ("checkcast", f"[L{OBJ};"),
            ("invokevirtual", *INVOKE), ("pop",),
            Label("tryEnd"),
            ("goto", "out"),
            Label("catch"),
            ("astore", 5),
            Label("out"),
            ("aload", 4), ("areturn",),
        ]),
    ])
    pg.methods[1].handlers = [("try", "tryEnd", "catch", "java/lang/Throwable")]

    openjpa_id = simple_class(OPENJPA_ID, interfaces=["java/lang/Comparable", SER], methods=[
        MethodSpec("compareTo", f"(L{OBJ};)I", ACC_PUBLIC, [("iconst_0",), ("ireturn",)]),
        MethodSpec("hashCode", "()I", ACC_PUBLIC, [("iconst_1",), ("ireturn",)]),
    ])
    return jar(closeable, configurable, result, comparator, result_iter, merged, rs_result,
               union_cmp, dictionary, pg, openjpa_id)


OPENJPA_CHAIN = (
    "org/example/Caller.hashCode()I",
    f"{RESULT_ITER}.hasNext()Z",
    f"{MERGED}.next()Z",
    f"{UNION_CMP}.getOrderingValue{ORDERING}",
    f"{UNION_CMP}.getOrderingValue{ORDERING_PRIVATE}",
    f"{PG_DICT}.getObject{GET_OBJECT}",
    f"{METHOD}.invoke(L{OBJ};[L{OBJ};)L{OBJ};",
)

SPRING_CHAIN = (
    "org/example/Caller.hashCode()I",
    f"{DBA}.run()V",
    f"{DBA}.destroy()V",
    f"{DBA}.invokeCustomDestroyMethod(L{METHOD};)V",
    f"{METHOD}.invoke(L{OBJ};[L{OBJ};)L{OBJ};",
)


# -- filtered-sink case -----------------------------------------------------------------

LOADER = "org/example/Loader"


def class_for_name() -> Artifact:
    """A serializable class whose readObject ends in Class.forName."""
    loader = simple_class(LOADER, interfaces=[SER], fields=[FieldSpec("type", "Ljava/lang/String;")], methods=[
        MethodSpec("readObject", "(Ljava/io/ObjectInputStream;)V", ACC_PRIVATE, [
            ("aload_1",), ("invokevirtual", "java/io/ObjectInputStream", "defaultReadObject", "()V"),
            ("aload_0",), ("getfield", LOADER, "type", "Ljava/lang/String;"),
            ("invokestatic", "java/lang/Class", "forName", "(Ljava/lang/String;)Ljava/lang/Class;"),
            ("pop",), ("return",),
        ]),
    ])
    return jar(loader)


# -- serializability change causes -------------------------------------------------------

def fig2_pair(case: int) -> tuple[Artifact, Artifact]:
    """Version pairs for the three ways serializable classes appear."""
    base = simple_class("org/example/Base")
    child = simple_class("org/example/Child", "org/example/Base")
    grandchild = simple_class("org/example/GrandChild", "org/example/Child")
    stable = simple_class("org/example/Stable", interfaces=[SER])
    if case == 1:
        old = jar(base, stable)
        new = jar(base, stable, simple_class("org/example/Added", interfaces=[SER]))
    elif case == 2:
        old = jar(base, stable)
        new = jar(simple_class("org/example/Base", interfaces=[SER]), stable)
    elif case == 3:
        old = jar(base, child, grandchild, stable)
        new = jar(simple_class("org/example/Base", interfaces=[SER]), child, grandchild, stable)
    else:
        raise ValueError(case)
    return old, new


# -- real compiled samples -------------------------------------------------------------------

FIXTURES = Path(__file__).parent / "fixtures"
PY4J = FIXTURES / "py4j-0.10.9.9.jar"
RUSTLS_AAR = FIXTURES / "rustls-platform-verifier-0.1.1.aar"


def real_classes() -> list[tuple[str, bytes]]:
    out = []
    for path in (PY4J, RUSTLS_AAR):
        a = load_artifact(path)
        out += [(f"{path.name}!{p}", a.entries[p]) for p in a.class_entries]
    return out


def assembled_classes() -> list[tuple[str, bytes]]:
    specs = [disposable_bean_adapter(), *hash_code_holder(True), not_vuln(), branchy()]
    out = [(s.name, emit_class(assemble_class(s))) for s in specs]
    for a in (openjpa(), listing7(), runnable_iterator(), two_stage(), class_for_name()):
        out += [(p, a.entries[p]) for p in a.class_entries]
    return out


def save(a: Artifact, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(write_artifact(a))
    return path
