"""Python bindings for the tdbgan pipeline.

Configs are plain dicts using the same keys as the JSON run configs."""
import json as _json

from . import _tdbgan
from ._tdbgan import (  # noqa: F401
    ConfigError,
    ParseError,
    RuntimeFailure,
    ShapeError,
    compare_curves,
    edit,
    integrate_deformation,
    verification_metrics,
    warp,
)

__version__ = _tdbgan.__version__


def _doc(config, base_dir):
    return _json.dumps(config or {}), base_dir or "."


def synth_data(config=None, base_dir=None):
    """Render the synthetic dataset; returns the data directory."""
    return _tdbgan.synth_data(*_doc(config, base_dir))


def train(config=None, base_dir=None, stages=None, use_dae=True, use_identity_loss=True, resume="", quiet=True):
    """Run the staged plan; returns the output directory."""
    return _tdbgan.train(*_doc(config, base_dir), stages or [], not use_dae, not use_identity_loss, resume, quiet)


def eval_verify(config=None, base_dir=None, checkpoint="", manifest="", out_dir=""):
    """Verification report as a dict of the summary metrics."""
    return _tdbgan.eval_verify(*_doc(config, base_dir), checkpoint, manifest, out_dir)


def eval_cls(config=None, base_dir=None, checkpoint="", manifest="", out_dir=""):
    """Classification accuracy of the transferred test images."""
    return _tdbgan.eval_cls(*_doc(config, base_dir), checkpoint, manifest, out_dir)


def resolve_config(config=None, base_dir=None):
    """The full config after defaults are merged in."""
    return _json.loads(_tdbgan.resolve_config(*_doc(config, base_dir)))
