#!/usr/bin/env python3
"""Drive the whole toolkit end to end against the shipped fixtures, offline.

Ingests the fixture corpus, builds the index with scripted providers, asks a
retrieval-augmented question, generates a tiny instruction dataset, runs the
exam bank, and produces a five-role proposal. Everything lands in a scratch
directory (default: ./_demo).
"""

import argparse
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"


def run(*argv):
    print(f"\n$ razewright {' '.join(argv)}")
    proc = subprocess.run([sys.executable, "-m", "razewright.cli", *argv], cwd=ROOT)
    if proc.returncode != 0:
        sys.exit(proc.returncode)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="_demo")
    args = parser.parse_args()
    work = Path(args.workdir).resolve()
    work.mkdir(parents=True, exist_ok=True)

    chunks = work / "chunks.jsonl"
    index_dir = work / "index"
    mock = str(FIXTURES / "mock_graph.jsonl")

    run("ingest", "--corpus", str(FIXTURES / "corpus"), "--out", str(chunks),
        "--size", "300", "--overlap", "60")
    run("index", "--chunks", str(chunks), "--out", str(index_dir), "--mock", mock)
    run("query", "--index", str(index_dir),
        "--text", "how should chords near the south bearing be removed",
        "--mock", mock, "--transcript", str(work / "query_transcript.json"))
    run("dataset", "gen", "--chunks", str(chunks), "--out", str(work / "dataset.jsonl"),
        "--rejects", str(work / "rejects.jsonl"), "--mock", str(FIXTURES / "mock_basic.jsonl"))
    run("exam", "run", "--bank", str(FIXTURES / "bank.jsonl"),
        "--mock", str(FIXTURES / "exam_script.jsonl"), "--out", str(work / "exam_report.json"))
    run("propose", "--precondition", str(FIXTURES / "precondition.txt"),
        "--index", str(index_dir), "--mock", mock,
        "--out", str(work / "proposal.txt"), "--transcript", str(work / "proposal_bundle.json"))
    run("lora-config", "emit", "--out", str(work / "finetune.cfg"))
    print(f"\nall artifacts in {work}")


if __name__ == "__main__":
    main()
