# Datasets on disk and the command line
#
# A synthetic sequence is written in the TUM layout, run through the CLI and
# evaluated. The same commands work on TUM RGB-D and ICL-NUIM folders.

# In[1]:

import json
import tempfile
from pathlib import Path

from nivo import cli
from nivo.io import load_sequence, read_trajectory

work = Path(tempfile.mkdtemp())
(work / "corner.json").write_text(json.dumps({"preset": "room_corner", "n_frames": 200, "seed": 0}))
cli.main(["synth", str(work / "corner.json"), str(work / "seq"), "--max-frames", "10"])
print(sorted(p.name for p in (work / "seq").iterdir()))

# In[2]:

seq = load_sequence(work / "seq")
f = seq.load_frame(0)
print(len(seq), "frames;", f.color.shape, f.depth.data.dtype, f.intrinsics)

# In[3]:

cli.main(["run", str(work / "seq"), str(work / "est.txt"), "--diagnostics", str(work / "diag.csv")])
print((work / "est.txt").read_text().splitlines()[:3])
cli.main(["eval", str(work / "est.txt"), str(work / "seq" / "groundtruth.txt")])

# In[4]:

# The diagnostics header is a config file: replaying it reproduces the run.

cli.main(["run", str(work / "seq"), str(work / "again.txt"), "--config", str(work / "diag.csv")])
print((work / "est.txt").read_bytes() == (work / "again.txt").read_bytes())
print(len(read_trajectory(work / "again.txt")), "poses")
