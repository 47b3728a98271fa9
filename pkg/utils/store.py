import json
from pathlib import Path

from src.morita.codec import decode_bundle, encode_bundle
from src.morita.errors import BundleNotFoundError

from .config import ALG_TOL, INSTANCE_DIR
from .logger import logger

REPORT_FILE = "validation.json"


def bundle_dir(name, root=None):
    return Path(root or INSTANCE_DIR) / name


def write_documents(name, docs, root=None):
    """Write each document as <stem>.json under the bundle directory."""
    path = bundle_dir(name, root)
    path.mkdir(parents=True, exist_ok=True)
    for stem, doc in docs.items():
        with open(path / f"{stem}.json", "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
    logger.info(f"Wrote bundle '{name}' to {path} ({len(docs)} documents)")
    return path


def read_documents(name, root=None):
    """All <stem>.json documents of a bundle except its validation report."""
    path = bundle_dir(name, root)
    if not path.is_dir():
        raise BundleNotFoundError(f"no bundle '{name}' under {path.parent}")
    docs = {}
    for file in sorted(path.glob("*.json")):
        if file.name == REPORT_FILE:
            continue
        with open(file, encoding="utf-8") as fh:
            docs[file.stem] = json.load(fh)
    return docs


def save_report(doc, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
    logger.info(f"Saved report to {path}")
    return path


def load_report(path):
    path = Path(path)
    if path.is_dir():
        path = path / REPORT_FILE
    if not path.exists():
        raise FileNotFoundError(f"no report at {path}")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def list_bundles(root=None):
    base = Path(root or INSTANCE_DIR)
    if not base.is_dir():
        return []
    return sorted(p.name for p in base.iterdir() if p.is_dir() and (p / "scenario.json").exists())


def save_bundle(bundle, root=None):
    return write_documents(bundle.name, encode_bundle(bundle), root)


def load_bundle(name, root=None, tol=ALG_TOL):
    """Read and re-validate a bundle; corrupted documents raise ValidationError."""
    docs = read_documents(name, root)
    missing = {"scenario", "inclusion", "pair", "map"} - set(docs)
    if missing:
        raise BundleNotFoundError(f"bundle '{name}' lacks {', '.join(sorted(missing))}")
    bundle = decode_bundle(name, docs, tol)
    logger.info(f"Loaded bundle '{name}'")
    return bundle
