"""Per-criterion pass/fail summary for the acceptance suite."""

from collections import OrderedDict

_RESULTS: "OrderedDict[str, dict]" = OrderedDict()


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when == "teardown":
        return
    if call.when == "setup" and call.excinfo is None:
        return
    cid, title = marker.args
    entry = _RESULTS.setdefault(cid, {"title": title, "ok": True, "notes": [], "seconds": 0.0})
    entry["ok"] &= call.excinfo is None
    entry["seconds"] += call.duration
    entry["notes"] += [v for k, v in item.user_properties if k == "note"]


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid, entry in sorted(_RESULTS.items(), key=lambda kv: _order(kv[0])):
        status = "PASS" if entry["ok"] else "FAIL"
        tr.write_line(f"criterion {cid:<3} {status}  {entry['title']}  ({entry['seconds']:.1f} s)")
        for note in entry["notes"]:
            tr.write_line(f"              {note}")


def _order(cid: str):
    digits = "".join(c for c in cid if c.isdigit())
    return int(digits), cid
