from importlib import resources

from nested_sessions.syntax import parse_program, parse_type

CORPUS = ["queue", "squeue", "list", "dyck", "dyck_noeq", "expr", "tree", "tries", "l3"]


def corpus_text(name: str) -> str:
    return resources.files("nested_sessions").joinpath("corpus", name).read_text()


def corpus_path(name: str) -> str:
    return str(resources.files("nested_sessions").joinpath("corpus", name))


def load(name: str):
    return parse_program(corpus_text(name + ".nst"), name + ".nst")[0]


def ty(sig, text: str):
    return parse_type(text, typenames=sig.typedefs)
