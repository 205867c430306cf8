# Running the odometry and scoring it
#
# The three stages (normals, rotation, translation) run as a threaded
# pipeline. The result is identical to a single-threaded run and is scored
# against ground truth with the absolute trajectory error.

# In[1]:

import time

import numpy as np

from nivo.evaluation import drift_rotation_deg, evaluate, format_report
from nivo.pipeline import run_pipeline
from nivo.synthetic import SyntheticSequence, room_corner_spec

spec = room_corner_spec(n_frames=200, depth_noise=0.005, seed=0)
seq = SyntheticSequence(spec)
frames = [seq.load_frame(i) for i in range(40)]

# In[2]:

t0 = time.perf_counter()
res = run_pipeline(frames)
print("%.1f frames/s" % (len(frames) / (time.perf_counter() - t0)))
single = run_pipeline(frames, single_thread=True)
print("identical to single-thread:",
      all(np.array_equal(a.matrix, b.matrix) for a, b in zip(res.trajectory.poses, single.trajectory.poses)))

# In[3]:

for d in res.diagnostics[:5]:
    print(d.frame_id, d.case_tag, d.modes, "PSR %.1f" % d.psr)

# In[4]:

gt = spec.groundtruth
print(format_report(evaluate(res.trajectory, gt)))
print("rotation drift %.3f deg" % drift_rotation_deg(res.trajectory.poses[0], res.trajectory.poses[-1],
                                                      gt.poses[0], gt.poses[39]))
