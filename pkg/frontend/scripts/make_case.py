"""Write a synthetic case (features + labels) into a directory for the
frontend end-to-end tests. Prints the case name."""

import sys
from pathlib import Path

from scribeloop import harness
from scribeloop.features import write_features
from scribeloop.labels import save_labeling


def main() -> None:
    out = Path(sys.argv[1])
    out.mkdir(parents=True, exist_ok=True)
    case = harness.make_synthetic_case("demo", num_frames=240, num_boundaries=4, seed=7)
    write_features(out / "demo.fts", case.features)
    save_labeling(out / "demo.json", case.vocab, case.gt)
    print(case.name)


if __name__ == "__main__":
    main()
