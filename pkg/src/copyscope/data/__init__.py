"""Bundled datasets.

MONALISA_FID_TABLE is the Mona Lisa case study: measured distribution
distances for all 32 coalitions of five workflow components (a base-model
replacement, a depth ControlNet, a style LoRA, and two key prompts), with
the plain SDv1-5 pipeline as the baseline row.
"""

from pathlib import Path

DATA_DIR = Path(__file__).resolve().parent
MONALISA_FID_TABLE = DATA_DIR / "monalisa_fid.csv"

__all__ = ["DATA_DIR", "MONALISA_FID_TABLE"]
