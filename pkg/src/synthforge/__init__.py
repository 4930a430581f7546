"""synthforge: procedural synthetic datasets for object detection and 6D pose estimation.

Typical flow: load an assembly export (:mod:`synthforge.assembly`), compose
randomized scenes (:mod:`synthforge.scene`), render them
(:mod:`synthforge.render`), write annotated datasets
(:mod:`synthforge.annotate`), mix them (:mod:`synthforge.mixer`), check the
ground truth visually (:mod:`synthforge.gtviz`) and score detectors
(:mod:`synthforge.metrics`). :mod:`synthforge.pipeline` ties these together.
"""

__version__ = "0.1.0"
