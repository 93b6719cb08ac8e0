"""Replay a saved session journal against the same case and check that
the reconstructed final segments match the saved snapshot exactly.
Usage: verify_replay.py CASE_DIR JOURNAL_PATH SNAPSHOT_PATH"""

import json
import sys
from pathlib import Path

from scribeloop import harness
from scribeloop.session import Journal, replay_journal


def main() -> None:
    case_dir, journal_path, snapshot_path = sys.argv[1:4]
    case = harness.load_cases(case_dir, case_dir)[0]
    events = Journal.parse_jsonl(Path(journal_path).read_text(encoding="utf-8"))
    session = replay_journal(case.features, case.vocab, events)
    got = [list(seg) for seg in session.hypothesis_segments().segments]
    snap = json.loads(Path(snapshot_path).read_text(encoding="utf-8"))
    want = [list(seg) for seg in snap["segments"]]
    if got != want:
        print(json.dumps({"got": got, "want": want}))
        sys.exit(1)
    print("replay-ok")


if __name__ == "__main__":
    main()
