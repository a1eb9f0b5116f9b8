"""Clean a speckled material mask with instance shape cues.

Per-pixel material classifiers label each pixel independently, so one
physical object often comes back as a mix of classes. Instance masks give
the object outlines; flattening every instance to its majority class
removes the speckle without touching pixels outside any instance.
"""
import numpy as np

from matsplat import InstanceSet, MaterialMap, refine_labels, remove_overlaps

CONCRETE = 2
ASPHALT = 3
UNLABELED = 255

rng = np.random.default_rng(7)

# A 24x32 view of a wall above a road. Ground truth: rows 2-11 are a
# concrete wall, rows 12-21 an asphalt road, the rest unlabeled sky.
height, width = 24, 32
truth = np.full((height, width), UNLABELED, dtype=np.uint8)
truth[2:12, :] = CONCRETE
truth[12:22, :] = ASPHALT

# The "classifier output": 15% of all pixels flipped to a random class,
# sky included.
noisy = truth.copy()
flip = rng.random(truth.shape) < 0.15
noisy[flip] = rng.choice([0, 1, 4, 5], size=int(flip.sum()))

# Instance proposals as a detector would emit them: the road proposal
# sloppily extends two rows up into the wall.
wall = np.zeros((height, width), dtype=bool)
wall[2:12, :] = True
road = np.zeros((height, width), dtype=bool)
road[10:22, :] = True
instances = InstanceSet(masks=np.stack([wall, road]))

# Overlapping proposals would double-count votes, so contested pixels go
# to the smaller instance first (the wall here).
disjoint = remove_overlaps(instances)
print(f"instances: {len(instances)} proposals, "
      f"{int((wall & road).sum())} contested pixels -> "
      f"{int(disjoint.masks[1].sum())} px left in the road instance")

refined = refine_labels(MaterialMap(class_ids=noisy), disjoint)

inside = wall | road
for name, region in (("inside instances", inside), ("sky", ~inside)):
    before = int((noisy != truth)[region].sum())
    after = int((refined.class_ids != truth)[region].sum())
    print(f"{name}: {before} wrong pixels before, {after} after")

# All speckle inside the proposals is gone; the sky flips survive because
# refinement never invents labels outside an instance.
assert (refined.class_ids[inside] == truth[inside]).all()
assert (refined.class_ids[~inside] == noisy[~inside]).all()
print("refinement fixed every instance pixel and left the sky alone")
