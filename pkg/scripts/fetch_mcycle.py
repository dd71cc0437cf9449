"""Download the motorcycle crash data (MASS ``mcycle``) into a cache directory.

The package ships a copy; this refreshes it from the ``pydataset`` source
distribution on PyPI, which bundles R dataset CSVs. The file is written to
``$DLGP_CACHE_DIR/mcycle.csv`` (or ``--out``), where ``load_motorcycle``
picks it up.

    python scripts/fetch_mcycle.py [--out PATH]
"""
import argparse
import io
import os
import subprocess
import sys
import tarfile
import tempfile
from pathlib import Path

SDIST = "pydataset==0.2.0"
MEMBER = "resources/rdata/csv/MASS/mcycle.csv"


def fetch(dest: Path) -> Path:
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps", "--no-binary", ":all:",
                        "--quiet", "-d", tmp, SDIST], check=True)
        sdist = next(Path(tmp).glob("pydataset-*.tar.gz"))
        with tarfile.open(sdist) as outer:
            inner_info = next(m for m in outer.getmembers() if m.name.endswith("resources.tar.gz"))
            inner_bytes = outer.extractfile(inner_info).read()
        with tarfile.open(fileobj=io.BytesIO(inner_bytes)) as inner:
            member = next(m for m in inner.getmembers() if m.name.endswith(MEMBER))
            data = inner.extractfile(member).read()
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_bytes(data)
    return dest


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", help="destination file (default $DLGP_CACHE_DIR/mcycle.csv)")
    args = ap.parse_args()
    if args.out:
        dest = Path(args.out)
    elif os.environ.get("DLGP_CACHE_DIR"):
        dest = Path(os.environ["DLGP_CACHE_DIR"]) / "mcycle.csv"
    else:
        ap.error("give --out or set DLGP_CACHE_DIR")
    path = fetch(dest)
    n = sum(1 for line in path.read_text().splitlines()[1:] if line.strip())
    print(f"wrote {n} rows to {path}")


if __name__ == "__main__":
    main()
