"""One PASS/FAIL line per acceptance criterion, shared by pytest and script runs."""

RESULTS = []


def record(cid, title, passed, detail=""):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {cid}: {title}" + (f" -- {detail}" if detail else "")
    RESULTS.append(line)
    print(line, flush=True)
    return passed
