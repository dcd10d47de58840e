"""Short training runs for every method and a relative-objective report.

Uses the random agent and a one-day evaluation so it finishes in a few
minutes; pass --td3 to train TD3 agents instead (much slower).
"""

import sys
import tempfile
from pathlib import Path

from greyshield.cli import main

agent = "td3" if "--td3" in sys.argv else "random"
root = Path(tempfile.mkdtemp(prefix="greyshield_"))
cfg = root / "demo.ini"
cfg.write_text("[run]\neval_horizon = 96\neval_interval = 500\n"
               "[surrogate]\nmax_epochs = 50\n")
runs = []
for method in ("unsafe", "optlayer", "safefallback", "optlayerpolicy", "greyoptlayerpolicy"):
    out = root / method
    main(["run", "--config", str(cfg), "--method", method, "--agent", agent,
          "--seeds", "1", "--steps", "1000", "--out", str(out)])
    runs.append(str(out))
main(["report", "--runs", *runs, "--reference", runs[0]])
