"""holosim: a desk-scale shared AR workspace simulator.

A human avatar and a mobile robot share one scene of virtual holograms.
The robot knows where every hologram is (frame graph), sees them (sampled
point clouds and image overlays), infers how hard each one is for the
human to see (view-angle cost, raycast occlusion, Focusing/Transition/
Blocked regions), and proactively fetches the hard ones. A deterministic
engine reproduces the resource-collection game headlessly; a WebSocket
sync server streams state to live clients.
"""

__version__ = "0.1.0"
