"""Scan src/ and tests/ for syntax that needs Python 3.10+.

Only annotations are checked for PEP 604 unions and PEP 585 generics, since
`a | b` on numpy boolean masks is ordinary code.
"""

import ast
import sys
from pathlib import Path
from typing import List, Tuple

BUILTIN_GENERICS = {"list", "dict", "tuple", "set", "frozenset", "type"}

Finding = Tuple[int, str]


def _annotation_errors(annotation: ast.AST) -> List[Finding]:
    errors = []
    for node in ast.walk(annotation):
        if isinstance(node, ast.BinOp) and isinstance(node.op, ast.BitOr):
            errors.append((node.lineno, "PEP 604 union (X | Y) in an annotation; use typing.Union/Optional."))
        if isinstance(node, ast.Subscript) and isinstance(node.value, ast.Name) \
                and node.value.id in BUILTIN_GENERICS:
            errors.append((node.lineno, f"PEP 585 generic '{node.value.id}[...]'; use typing.{node.value.id.capitalize()}."))
    return errors


class Python39Validator(ast.NodeVisitor):
    def __init__(self) -> None:
        self.errors: List[Finding] = []

    def _check(self, annotation) -> None:
        if annotation is not None:
            self.errors.extend(_annotation_errors(annotation))

    def visit_FunctionDef(self, node) -> None:
        args = node.args
        for arg in args.posonlyargs + args.args + args.kwonlyargs:
            self._check(arg.annotation)
        for arg in (args.vararg, args.kwarg):
            if arg is not None:
                self._check(arg.annotation)
        self._check(node.returns)
        self.generic_visit(node)

    visit_AsyncFunctionDef = visit_FunctionDef

    def visit_AnnAssign(self, node) -> None:
        self._check(node.annotation)
        self.generic_visit(node)

    def generic_visit(self, node) -> None:
        if type(node).__name__ == "Match":
            self.errors.append((node.lineno, "match/case needs Python 3.10."))
        super().generic_visit(node)


def scan_file(filepath: Path) -> List[Finding]:
    try:
        tree = ast.parse(filepath.read_text(encoding="utf-8"), filename=str(filepath))
    except SyntaxError as e:
        return [(e.lineno or 0, f"Syntax error: {e.msg}")]

    validator = Python39Validator()
    validator.visit(tree)
    return validator.errors


def scan_tree(repo_root: Path) -> List[Tuple[Path, int, str]]:
    findings = []
    for folder in ("src", "tests", "scripts"):
        for py_file in sorted((repo_root / folder).rglob("*.py")):
            findings.extend((py_file, line, msg) for line, msg in scan_file(py_file))
    return findings


def main() -> None:
    repo_root = Path(__file__).resolve().parent.parent
    findings = scan_tree(repo_root)
    for path, line, msg in findings:
        print(f"❌ {path.relative_to(repo_root)}:{line}: {msg}")
    if findings:
        print(f"\n⚠️ Found {len(findings)} compatibility issue(s).")
        sys.exit(1)
    print("✅ All scanned files are compatible with Python 3.9.")


if __name__ == "__main__":
    main()
