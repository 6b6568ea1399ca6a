"""Matrix Market reading and writing for matrices, score vectors and sketches."""
import json
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .matrix import SparseRowMatrix


def write_matrix(path, A, dense=False, comment=""):
    """Write ``A`` as ``coordinate real general`` (or ``array real general`` when ``dense``)."""
    path = _mtx_path(Path(path))
    if isinstance(A, SparseRowMatrix):
        A = A.csr
    if dense:
        A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=np.float64)
        if A.ndim == 1:
            A = A[:, None]
    else:
        A = sp.coo_matrix(A)
    # scipy ignores unwritable paths; opening here surfaces the OSError
    with open(path, "wb") as fh:
        scipy.io.mmwrite(fh, A, comment=comment, field="real", symmetry="general")
    return path


def read_matrix(path):
    M = scipy.io.mmread(_existing(path))
    return SparseRowMatrix(sp.csr_array(M) if sp.issparse(M) else np.asarray(M, dtype=np.float64))


def write_scores(path, scores, comment=""):
    """
    Write a score vector (or an n-by-k array of score columns) as an
    ``array real general`` file. Infinite scores use the ``inf`` token.
    """
    path = _mtx_path(Path(path))
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim == 1:
        scores = scores[:, None]
    lines = ["%%MatrixMarket matrix array real general"]
    for line in comment.splitlines():
        lines.append("%" + line)
    lines.append(f"{scores.shape[0]} {scores.shape[1]}")
    # array format is column-major
    lines.extend("inf" if np.isposinf(s) else repr(float(s)) for s in scores.T.ravel())
    path.write_text("\n".join(lines) + "\n")
    return path


def read_scores(path):
    M = np.asarray(scipy.io.mmread(_existing(path)), dtype=np.float64)
    return M.ravel() if M.shape[1] == 1 else M


def write_sketch(stem, sketch):
    """
    Write a ``DiagonalSketch`` as ``<stem>.mtx`` (diagonal entries, coordinate
    format) plus ``<stem>.json`` with probabilities and factor indices.
    """
    stem = Path(stem)
    n = sketch.space_n
    idx, scales = sketch.indices, sketch.scales
    D = sp.coo_matrix((scales, (idx, idx)), shape=(n, n))
    mtx = write_matrix(stem.with_suffix(".mtx"), D)
    side = stem.with_suffix(".json")
    side.write_text(json.dumps(sketch.to_dict(), sort_keys=True, indent=1) + "\n")
    return mtx, side


def _mtx_path(path):
    return path if path.suffix == ".mtx" else path.with_name(path.name + ".mtx")


def _existing(path):
    path = _mtx_path(Path(path))
    if not path.is_file():
        raise FileNotFoundError(f"no such Matrix Market file: {path}")
    return path
