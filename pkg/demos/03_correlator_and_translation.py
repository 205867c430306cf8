# Kernel cross-correlation and translation
#
# The correlator is trained once on a keyframe and then locates any circular
# shift of it with a single FFT. On axonometric (metric, top-down) projections
# the shift is the camera's in-plane translation.

# In[1]:

import numpy as np

from nivo import kcc
from nivo.geometry import DepthImage, PointCloud, backproject
from nivo.synthetic import TUM_INTRINSICS, render_view, room_corner_spec
from nivo.translation import estimate_translation, project_axonometric, train_keyframe

rng = np.random.default_rng(0)
x = kcc.normalize_image(rng.random((64, 64)))
model = kcc.train(x)
res = kcc.detect(model, np.roll(x, (3, 5), axis=(0, 1)))
print("peak shift:", res.peak_shift, "PSR: %.1f" % res.psr)

# Unrelated input: the response has no clear peak.
print("PSR on noise: %.1f" % kcc.detect(model, kcc.normalize_image(rng.random((64, 64)))).psr)

# In[2]:

# Axonometric projection of the corner, then the same cloud moved by 4 cm / 2 cm / 5 cm.

spec = room_corner_spec(n_frames=1)
depth, gray, _ = render_view(spec, spec.poses[0])
cloud = backproject(DepthImage.from_meters(depth), TUM_INTRINSICS)
key = project_axonometric(cloud, gray)
print("occupied cells:", key.valid.sum(), "of", key.valid.size)

moved = PointCloud(cloud.points + [0.04, 0.02, 0.05], cloud.valid)
est = estimate_translation(key, project_axonometric(moved, gray), train_keyframe(key))
print("displacement:", est.displacement, "PSR: %.1f" % est.psr)
