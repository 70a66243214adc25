"""Analysis reports in two formats.

The machine format is a deterministic sequence of ``key = value`` lines:
command, system, and seed first, the analysis items in a fixed order,
status last.  No timing, no environment data: the same file and seed
produce byte-identical output, and ``parse_machine(emit_machine(r))``
returns an equal report.

The text format is for reading and carries the same items plus elapsed
time; nothing round-trips through it.
"""

from dataclasses import dataclass

DECIDED = "decided"
UNDECIDED = "undecided"

_HEAD = ("command", "system", "seed")


class ReportError(Exception):
    pass


@dataclass(frozen=True)
class Report:
    command: str
    system: str
    seed: int
    items: tuple
    status: str = DECIDED

    def value(self, key: str):
        for k, v in self.items:
            if k == key:
                return v
        raise KeyError(key)

    def values(self, key: str) -> list:
        return [v for k, v in self.items if k == key]


def emit_machine(rep: Report) -> str:
    lines = [
        f"command = {rep.command}",
        f"system = {rep.system}",
        f"seed = {rep.seed}",
    ]
    for k, v in rep.items:
        if "\n" in f"{v}":
            raise ReportError(f"value for {k!r} spans lines")
        lines.append(f"{k} = {v}")
    lines.append(f"status = {rep.status}")
    return "\n".join(lines) + "\n"


def parse_machine(text: str) -> Report:
    pairs = []
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if " = " not in line:
            raise ReportError(f"line {n}: expected 'key = value'")
        k, v = line.split(" = ", 1)
        pairs.append((k, v))
    if len(pairs) < 4:
        raise ReportError("truncated report")
    head, tail = pairs[:3], pairs[3:]
    if tuple(k for k, _ in head) != _HEAD:
        raise ReportError("report must open with command, system, seed")
    if tail[-1][0] != "status":
        raise ReportError("report must close with status")
    status = tail[-1][1]
    if status not in (DECIDED, UNDECIDED):
        raise ReportError(f"unknown status {status!r}")
    return Report(
        command=head[0][1],
        system=head[1][1],
        seed=int(head[2][1]),
        items=tuple(tail[:-1]),
        status=status,
    )


def emit_text(rep: Report, elapsed: float | None = None) -> str:
    lines = [f"{rep.command} report for {rep.system}", "-" * 40]
    width = max((len(k) for k, _ in rep.items), default=0)
    for k, v in rep.items:
        lines.append(f"  {k.ljust(width)}  {v}")
    lines.append("-" * 40)
    foot = f"status: {rep.status} (seed {rep.seed}"
    if elapsed is not None:
        foot += f", {elapsed:.3f}s"
    lines.append(foot + ")")
    return "\n".join(lines) + "\n"


# -- shared value formatting -------------------------------------------------


def fmt_bool(b) -> str:
    return "true" if b else "false"


def fmt_rdt(rdt) -> str:
    return "[" + ",".join("[" + ",".join(str(x) for x in row) + "]" for row in rdt) + "]"


def fmt_kappa(kappa) -> str:
    return "<" + ",".join(str(x) for x in kappa) + ">"
