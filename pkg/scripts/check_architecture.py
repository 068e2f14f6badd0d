#!/usr/bin/env python
"""Architecture validation script"""

import ast
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent

LAYERS = ("presentation", "services", "data_access", "shared")

# Valid dependencies (layer -> allowed dependencies)
ALLOWED_DEPS = {
    "presentation": ["services", "data_access", "shared"],
    "services": ["data_access", "shared"],
    "data_access": ["shared"],
    "shared": [],
}


def analyze_imports(file_path):
    """Analyze imports in a Python file"""
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            tree = ast.parse(f.read())
    except (OSError, SyntaxError) as e:
        print(f"Error analyzing {file_path}: {e}")
        return []

    imports = []
    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            imports.extend(alias.name for alias in node.names)
        elif isinstance(node, ast.ImportFrom) and node.module:
            imports.append(node.module)
    return imports


def check_layer_violations(root=ROOT):
    """Check for architectural violations"""
    violations = []
    for layer_name in LAYERS:
        layer_dir = Path(root) / "src" / layer_name
        if not layer_dir.exists():
            continue
        for py_file in sorted(layer_dir.rglob("*.py")):
            for imp in analyze_imports(py_file):
                parts = imp.split(".")
                if parts[0] != "src" or len(parts) < 2:
                    continue
                imported_layer = parts[1]
                if imported_layer in LAYERS and imported_layer != layer_name \
                        and imported_layer not in ALLOWED_DEPS[layer_name]:
                    violations.append({
                        "file": str(py_file.relative_to(root)),
                        "layer": layer_name,
                        "violates": imported_layer,
                        "import": imp,
                    })
    return violations


def layer_distribution(root=ROOT):
    return {layer: len(list((Path(root) / "src" / layer).rglob("*.py"))) for layer in LAYERS}


def main():
    print("Architecture Analysis")
    print("=" * 50)

    violations = check_layer_violations()
    if violations:
        print("Architecture violations found:")
        for v in violations:
            print(f"  {v['file']}")
            print(f"    Layer '{v['layer']}' should not import from '{v['violates']}'")
            print(f"    Import: {v['import']}")
            print()
    else:
        print("No architecture violations found")

    print("\nLayer Distribution:")
    for layer, count in layer_distribution().items():
        print(f"  {layer}: {count} files")

    return 1 if violations else 0


if __name__ == "__main__":
    sys.exit(main())
