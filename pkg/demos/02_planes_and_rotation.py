# Plane tracking and closed-form rotation
#
# Two views of the corner are compared pixel by pixel. Pixels whose normals
# barely changed are grouped into Modes (one per plane), and any two
# non-parallel Modes fix the rotation in closed form.

# In[1]:

import numpy as np

from nivo.geometry import DepthImage, backproject, compose, geodesic_distance
from nivo.normals import compute_normal_map
from nivo.planes import track_planes
from nivo.rotation import estimate_rotation, rotation_from_pair
from nivo.synthetic import TUM_INTRINSICS, render_view, room_corner_spec

spec = room_corner_spec(n_frames=200)


def normals_at(i):
    depth, _, _ = render_view(spec, spec.poses[i])
    return compute_normal_map(backproject(DepthImage.from_meters(depth), TUM_INTRINSICS))


ref, cur = normals_at(0), normals_at(6)

# In[2]:

modes = track_planes(ref, cur)
for m in modes:
    print(m)

# In[3]:

# Rotation mapping the current camera into the reference camera.

est = estimate_rotation(modes)
truth = compose(spec.poses[0].inverse(), spec.poses[6]).rotation
print("case:", est.case_tag, "pair:", est.pair_used)
print("error: %.2e deg" % np.rad2deg(geodesic_distance(est.rotation, truth)))

# In[4]:

# The formula itself, on a hand-made pair: 10 degrees about z, z stays fixed.

z, x = np.array([0, 0, 1.0]), np.array([1.0, 0, 0])
a = np.deg2rad(10)
R = rotation_from_pair(z, z, np.array([np.cos(a), np.sin(a), 0]), x)
print(np.round(R, 6))
