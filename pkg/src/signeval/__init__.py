"""signeval: evaluation toolkit and baseline pipeline for navigational
sign understanding.

Submodules:
    model      domain vocabulary (cues, directions, boxes, config)
    dataset    dataset/prediction file I/O, validation, sign cropping
    matching   equivalence predicates and bipartite/box matching
    metrics    recognition, detection (COCO AP/AR) and end-to-end metrics
    pipeline   detector + VLM inference with caching
    cli        the `signeval` command
"""

__version__ = "0.1.0"
