"""TOML reading/writing for scenario files.

Parsing uses the stdlib tomllib (tomli on 3.10).  Writing covers exactly the
value shapes scenarios contain -- strings, bools, ints, floats, flat lists,
and one level of tables/inline tables -- which keeps the emitter tiny and the
parse -> dump -> parse round trip exact.
"""

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - version dependent
    import tomli as tomllib

from .errors import ConfigError


def load_toml(path):
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def loads_toml(text):
    return tomllib.loads(text)


def _fmt_scalar(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        r = repr(v)
        # repr() may omit the decimal point ("1e-07" is fine, "1" is not)
        if "e" not in r and "E" not in r and "." not in r and "inf" not in r and "nan" not in r:
            r += ".0"
        return r
    if isinstance(v, str):
        escaped = v.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    raise ConfigError(f"cannot serialize TOML value {v!r}")


def _fmt_value(v):
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt_value(x) for x in v) + "]"
    if isinstance(v, dict):
        inner = ", ".join(f"{k} = {_fmt_value(x)}" for k, x in v.items())
        return "{ " + inner + " }"
    return _fmt_scalar(v)


def dumps_toml(data):
    """Serialize a {key: scalar-or-list-or-table} mapping."""
    lines = []
    tables = []
    for k, v in data.items():
        if isinstance(v, dict):
            tables.append((k, v))
        else:
            lines.append(f"{k} = {_fmt_value(v)}")
    for name, tbl in tables:
        lines.append("")
        lines.append(f"[{name}]")
        for k, v in tbl.items():
            lines.append(f"{k} = {_fmt_value(v)}")
    return "\n".join(lines) + "\n"


def parse_toml_literal(text):
    """Parse a single TOML value literal, e.g. for --override key=val."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        # bare words act as strings so `--override model.kind=poly` works
        return text
