"""Plain-text config format used by the bundled data files.

The format is deliberately small so the data files stay readable in a diff:

    # comment
    base_kva = 5000
    [limits]
    vmin = 0.95
    [branches]
    from_bus to_bus r_pu x_pu s_max_kva
    0 1 0.004 0.010 1500

Top-level ``key = value`` pairs may appear before the first section header.
A section whose first content line contains ``=`` is a mapping; otherwise the
first line names the table columns and every following line is a row. Values
are auto-typed (int, then float, then string). Loaders reject unknown keys so
a typo in a config fails loudly instead of silently using a default.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Raised for malformed or out-of-contract config content."""


def _autotype(token: str):
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        pass
    return token


@dataclass
class Table:
    columns: list[str]
    rows: list[dict] = field(default_factory=list)

    def column(self, name: str) -> list:
        if name not in self.columns:
            raise ConfigError(f"table has no column {name!r} (has {self.columns})")
        return [row[name] for row in self.rows]


@dataclass
class Document:
    scalars: dict = field(default_factory=dict)
    sections: dict = field(default_factory=dict)

    def mapping(self, name: str) -> dict:
        sec = self.sections.get(name)
        if not isinstance(sec, dict):
            raise ConfigError(f"expected mapping section [{name}]")
        return sec

    def table(self, name: str) -> Table:
        sec = self.sections.get(name)
        if not isinstance(sec, Table):
            raise ConfigError(f"expected table section [{name}]")
        return sec


def parse_text(text: str, *, source: str = "<string>") -> Document:
    doc = Document()
    current: str | None = None
    pending_table: Table | None = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"

        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if not current:
                raise ConfigError(f"{where}: empty section name")
            if current in doc.sections:
                raise ConfigError(f"{where}: duplicate section [{current}]")
            doc.sections[current] = None  # type: ignore[assignment]
            pending_table = None
            continue

        if "=" in line:
            key, _, value = line.partition("=")
            key = key.strip()
            if not key:
                raise ConfigError(f"{where}: missing key before '='")
            target = doc.scalars if current is None else doc.sections.get(current)
            if current is not None:
                if isinstance(target, Table):
                    raise ConfigError(f"{where}: key=value line inside table section [{current}]")
                if target is None:
                    target = {}
                    doc.sections[current] = target
            if key in target:
                raise ConfigError(f"{where}: duplicate key {key!r}")
            target[key] = _autotype(value.strip())
            continue

        # Bare row: either a table header (first content line of a section)
        # or a data row of the current table.
        if current is None:
            raise ConfigError(f"{where}: unexpected content outside a section: {raw.strip()!r}")
        tokens = line.split()
        if doc.sections[current] is None:
            pending_table = Table(columns=tokens)
            doc.sections[current] = pending_table
            continue
        if pending_table is None or doc.sections[current] is not pending_table:
            raise ConfigError(f"{where}: row in mapping section [{current}]")
        if len(tokens) != len(pending_table.columns):
            raise ConfigError(
                f"{where}: expected {len(pending_table.columns)} values "
                f"for columns {pending_table.columns}, got {len(tokens)}"
            )
        pending_table.rows.append(
            {col: _autotype(tok) for col, tok in zip(pending_table.columns, tokens)}
        )

    empty = [name for name, sec in doc.sections.items() if sec is None]
    if empty:
        raise ConfigError(f"{source}: empty section(s): {empty}")
    return doc


def parse_file(path) -> Document:
    # Accepts filesystem paths and importlib.resources traversables alike.
    if hasattr(path, "read_text"):
        return parse_text(path.read_text(encoding="utf-8"), source=str(path))
    with open(path, "r", encoding="utf-8") as fh:
        return parse_text(fh.read(), source=str(path))


def take(mapping: dict, allowed: dict, *, context: str) -> dict:
    """Validate ``mapping`` against ``allowed`` (key -> required flag).

    Returns the mapping itself. Unknown keys and missing required keys raise
    ConfigError naming the offending keys and where they came from.
    """
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(f"{context}: unknown key(s) {unknown}; allowed: {sorted(allowed)}")
    missing = sorted(k for k, required in allowed.items() if required and k not in mapping)
    if missing:
        raise ConfigError(f"{context}: missing required key(s) {missing}")
    return mapping
