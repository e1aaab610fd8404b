import sys
from pathlib import Path
from typing import List

from tsrkit.errors import TsrKitError
from tsrkit.schemas import validate_annotations
from tsrkit.synth.corpus import CorpusSample
from tsrkit.synth.corpus_io import corpus_digest, read_corpus


def check_sample(sample: CorpusSample) -> List[str]:
    """标签自洽：目标指向非空单元格、空标签与“无框指向”一致、单元格文本等于其框文本拼接。"""
    errors: List[str] = []
    try:
        validate_annotations(sample.annotations, sample.grid)
    except TsrKitError as e:
        return [str(e)]

    boxes = sample.annotations.boxes
    pointed = {box.target for box in boxes if box.target is not None}
    for m, (cell, empty) in enumerate(zip(sample.grid.cells, sample.empty_labels)):
        if empty == (m in pointed):
            errors.append(f"cell {m}: empty={empty} but {'has' if m in pointed else 'no'} boxes")
        texts = [box.text for box in boxes if box.target == m]
        expected = " ".join(texts) if texts else None
        if (cell.content or None) != expected:
            errors.append(f"cell {m}: text {cell.content!r} != boxes {expected!r}")

    real = sample.annotations.real_boxes
    if sample.annotations.distractors and min(sample.annotations.distractors) < len(real):
        errors.append("distractors must follow all real boxes")
    return errors


def main(corpus_path: str) -> int:
    path = Path(corpus_path)
    try:
        samples = read_corpus(path)
    except TsrKitError as e:
        print(f"❌ {type(e).__name__}: {e}")
        return 1

    bad = 0
    for sample in samples:
        errors = check_sample(sample)
        if errors:
            bad += 1
            print(f"-- sample {sample.index}")
            for e in errors:
                print(f"  error: {e}")

    print("=== 语料检查 ===")
    print(f"样本数: {len(samples)}")
    print(f"干扰框: {sum(s.n_distractors for s in samples)}")
    print(f"sha256: {corpus_digest(path)}")
    if bad:
        print(f"❌ {bad} 个样本标签不自洽")
        return 1
    print("✅ 全部样本标签自洽")
    return 0


if __name__ == "__main__":
    if len(sys.argv) < 2:
        print("Usage: python scripts/validate_corpus.py <corpus.jsonl>")
        sys.exit(2)
    sys.exit(main(sys.argv[1]))
