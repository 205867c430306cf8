# Geometry and normal maps
#
# A synthetic room corner is rendered, lifted to an organized point cloud and
# turned into a per-pixel normal map. Larger smoothing cells trade edge detail
# for noise suppression.

# In[1]:

import numpy as np

from nivo.geometry import DepthImage, PoseSE3, backproject, compose
from nivo.normals import NormalMapParams, angular_error, compute_normal_map
from nivo.synthetic import TUM_INTRINSICS, render_view, room_corner_spec

# Poses compose like 4x4 matrices: apply b first, then a.

a = PoseSE3.from_rt(np.eye(3), [1.0, 0, 0])
b = PoseSE3.from_rt([[0, -1, 0], [1, 0, 0], [0, 0, 1]], [0, 2.0, 0])
print(compose(a, b))
print(np.allclose(compose(a, b).matrix, a.matrix @ b.matrix))

# In[2]:

# Render the first frame of the noisy corner orbit and back-project it.

spec = room_corner_spec(n_frames=2, depth_noise=0.005, seed=0)
depth, gray, ids = render_view(spec, spec.poses[0])
noise = np.random.default_rng(0).normal(0, 0.005, depth.shape)
cloud = backproject(DepthImage.from_meters(depth + noise), TUM_INTRINSICS)
print("valid points:", cloud.valid.sum())

# In[3]:

# The true normal of every pixel is its plane normal (which faces into the room) in camera axes.

R_wc = spec.poses[0].rotation
truth = np.array([R_wc.T @ p.normal for p in spec.planes])[ids]
for cell in (1, 5, 10):
    nm = compute_normal_map(cloud, NormalMapParams(cell_size=cell))
    err = np.rad2deg(angular_error(nm, truth))
    print(f"cell {cell:2d}: median error {np.median(err):5.2f} deg over {nm.valid.sum()} pixels")
