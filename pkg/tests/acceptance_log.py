import re

RESULTS: dict[str, tuple[bool, str, str]] = {}


def record(label, title: str, ok: bool, detail: str) -> None:
    RESULTS[str(label)] = (bool(ok), title, detail)


def ordered_labels():
    def key(label):
        m = re.match(r"(\d+)(.*)", label)
        return (int(m.group(1)), m.group(2))

    return sorted(RESULTS, key=key)
