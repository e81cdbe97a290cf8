"""Release gate. One test per externally visible guarantee; each prints its
own PASS/FAIL line (see conftest). These intentionally overlap the unit
suites: they must stay green as a set before anything ships.
"""

import json
import random
import time
from pathlib import Path

import numpy as np

from paramine.aligner import AlignerConfig, align
from paramine.analysis import lm_similarity_matrix, train_lm
from paramine.cleaning import (DetectorConfig, NOISE_LABEL, detect_language,
                               profile_for)
from paramine.cli import main
from paramine.corpus import (Corpus, Document, DocumentPair, mix_corpora,
                             oversample_factor)
from paramine.embeddings import EmbeddingTable
from paramine.similarity import (IdentityProvider, MtBleuMeasure,
                                 make_measure, score_matrix, sim_bleu)
from paramine.splitbuilder import (CandidatePair, RankedDocument, SplitConfig,
                                   SplitSession, build_manifest)

from oracles import best_monotone_total


def doc_of_lengths(doc_id, lengths):
    return Document.from_lines(doc_id, "en",
                               [" ".join(["tok"] * n) for n in lengths])


def test_alignment_total_score_matches_exhaustive_search():
    # scores on a 1/1024 grid so every partial sum is exact in binary
    # floating point and the comparison below can demand equality
    rng = random.Random(20260817)
    th, k = 0.5, 2.0
    start = time.monotonic()
    for trial in range(1000):
        n, m = rng.randint(1, 8), rng.randint(1, 8)
        scores = [[rng.randrange(0, 1025) / 1024 for _ in range(m)]
                  for _ in range(n)]
        src_len = [rng.randint(1, 4) for _ in range(n)]
        tgt_len = [rng.randint(1, 4) for _ in range(m)]
        band = rng.choice([None, None, 1, 2])

        slope = m / n
        mask = [[scores[i][j] >= th
                 and max(src_len[i], tgt_len[j]) < k * min(src_len[i], tgt_len[j])
                 and (band is None or abs(i * slope - j) <= band)
                 for j in range(m)] for i in range(n)]

        pair = DocumentPair(f"t{trial}", doc_of_lengths("s", src_len),
                            doc_of_lengths("t", tgt_len))
        cfg = AlignerConfig(th=th, k=k, band_width=band)
        result = align(pair, np.array(scores, dtype=float), cfg)

        got = sum(match.score for match in result.matches)
        want = best_monotone_total(scores, mask)
        assert got == want, f"trial {trial}: {got} != {want}"
    assert time.monotonic() - start < 60.0


def test_emitted_matches_never_violate_threshold_or_length_ratio():
    vocab = "alpha bravo charlie delta echo foxtrot golf hotel".split()
    rng = random.Random(404)

    def rand_doc(doc_id):
        lines = [" ".join(rng.choice(vocab) for _ in range(rng.randint(1, 6)))
                 for _ in range(rng.randint(1, 9))]
        return Document.from_lines(doc_id, "en", lines)

    measure = MtBleuMeasure(IdentityProvider())
    checked = 0
    for run in range(300):
        pair = DocumentPair(f"r{run}", rand_doc("src"), rand_doc("tgt"))
        cfg = AlignerConfig(th=rng.uniform(0.05, 0.9),
                            k=rng.uniform(1.05, 3.0),
                            band_width=rng.choice([None, 1, 2, 3]))
        matrix = score_matrix(pair, measure)
        result = align(pair, matrix, cfg)

        n, m = matrix.shape
        prev_src, prev_tgt = -1, -1
        for match in result.matches:
            i, j = match.src_index, match.tgt_index
            assert match.score == matrix[i, j]
            assert match.score >= cfg.th
            li = len(pair.source.sentences[i].tokens)
            lj = len(pair.target.sentences[j].tokens)
            assert max(li, lj) < cfg.k * min(li, lj)
            if cfg.band_width is not None:
                assert abs(i * (m / n) - j) <= cfg.band_width
            assert i > prev_src and j > prev_tgt
            prev_src, prev_tgt = i, j
            checked += 1
    assert checked > 200  # the property must not pass vacuously


def test_planted_alignments_recovered_perfectly_after_deletions():
    rng = random.Random(31)
    doc_gids = []
    gid = 0
    for _ in range(20):
        size = rng.randint(8, 14)
        doc_gids.append(list(range(gid, gid + size)))
        gid += size

    table = EmbeddingTable(gid, [f"s{g}" for g in range(gid)],
                           np.eye(gid, dtype=np.float32))
    measure = make_measure("mt-cosine", provider=IdentityProvider(), table=table)
    cfg = AlignerConfig(th=0.5, k=2.0)

    tp = fp = fn = 0
    for d, gids in enumerate(doc_gids):
        src_keep = [g for g in gids if rng.random() >= 0.10]
        tgt_keep = [g for g in gids if rng.random() >= 0.10]
        assert src_keep and tgt_keep
        pair = DocumentPair(
            f"doc{d}",
            Document.from_lines("s", "en", [f"s{g}" for g in src_keep]),
            Document.from_lines("t", "en", [f"s{g}" for g in tgt_keep]),
        )
        src_pos = {g: i for i, g in enumerate(src_keep)}
        tgt_pos = {g: j for j, g in enumerate(tgt_keep)}
        gold = {(src_pos[g], tgt_pos[g]) for g in gids
                if g in src_pos and g in tgt_pos}

        result = align(pair, score_matrix(pair, measure), cfg)
        got = {(m.src_index, m.tgt_index) for m in result.matches}
        tp += len(got & gold)
        fp += len(got - gold)
        fn += len(gold - got)

    assert tp > 100
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    f1 = 2 * precision * recall / (precision + recall)
    assert f1 == 1.0


def test_language_detector_unanimous_and_split_documents():
    cfg = DetectorConfig(n=10, m=8, profiles=(profile_for("en"), profile_for("ja")),
                         rng_seed=7)
    en_lines = [f"plain english sentence number {i}." for i in range(10)]
    ja_lines = ["これは短い日本語の文です。", "データを確認します。",
                "アルゴリズムを実行する。", "結果を保存しました。",
                "つぎの文に進みます。"] * 2

    # unanimous documents take the matching label
    assert detect_language(Document.from_lines("e", "und", en_lines), cfg) == "en"
    assert detect_language(Document.from_lines("j", "und", ja_lines), cfg) == "ja"

    # an even split reaches neither quorum
    mixed = Document.from_lines("m", "und", en_lines[:5] + ja_lines[:5])
    assert detect_language(mixed, cfg) == NOISE_LABEL

    # sampling is a pure function of (seed, doc_id)
    interleaved = [s for pair in zip(en_lines + en_lines, ja_lines + ja_lines)
                   for s in pair]
    big = Document.from_lines("long-doc", "und", interleaved)
    first = detect_language(big, cfg)
    assert detect_language(big, cfg) == first
    fresh = DetectorConfig(n=10, m=8,
                           profiles=(profile_for("en"), profile_for("ja")),
                           rng_seed=7)
    assert detect_language(big, fresh) == first


def make_ranked(plan):
    """plan: list of (pair_id, n_candidates, n_good); good pairs come first."""
    docs = []
    for rank, (pair_id, total, _) in enumerate(plan):
        cands = tuple(
            CandidatePair(pair_id, i, i, 1.0, f"src {pair_id} {i}",
                          f"tgt {pair_id} {i}")
            for i in range(total)
        )
        docs.append(RankedDocument(pair_id, 0.9 - rank * 0.1, cands))
    return docs


def test_judged_split_strict_acceptance_overshoot_and_replay(tmp_path):
    plan = [
        ("docA", 8, 5),    # majority good, accepted
        ("docB", 6, 3),    # exactly half good: not strictly more, rejected
        ("docC", 10, 9),   # accepted
        ("docD", 9, 7),    # accepted; crosses the volume, kept whole
        ("docE", 4, 0),    # below the cut once volume is reached: never judged
    ]
    good_counts = {pair_id: good for pair_id, _, good in plan}
    cfg = SplitConfig(volume_test=20, volume_dev=0, ratio=0.50)
    log = tmp_path / "log.jsonl"
    session = SplitSession(make_ranked(plan), cfg, log)

    while True:
        cand = session.next_unjudged()
        if cand is None:
            break
        verdict = "good" if cand.src_index < good_counts[cand.pair_id] else "bad"
        session.record_judgment(cand.pair_id, cand.src_index, cand.tgt_index,
                                verdict, "oracle")

    state = session.state()
    assert state.complete
    assert len(state.accepted_test) == 21  # overshoot past 20 keeps the whole doc
    assert state.judged_count == 8 + 6 + 10 + 9
    assert not any(key[0] == "docE" for key in session.judgments)

    by_id = {o.pair_id: o for o in state.outcomes}
    assert set(by_id) == {"docA", "docB", "docC", "docD"}
    assert not by_id["docB"].accepted
    assert by_id["docB"].good * 2 == by_id["docB"].judged
    for outcome in state.outcomes:
        assert outcome.good + outcome.bad == outcome.judged

    manifest, _ = build_manifest(session)
    assert manifest.counts["test"] == {"documents": 3, "kept_pairs": 21,
                                       "deleted_pairs": 6}
    assert manifest.assignments["docB"] == "train"
    assert manifest.assignments["docE"] == "train"

    # a fresh process reading the same log lands in the identical state
    replayed = SplitSession(make_ranked(plan), cfg, log)
    assert replayed.state() == state
    assert replayed.judgments == session.judgments

    # a write torn mid-record is dropped with a warning, nothing else is lost
    lines = log.read_text(encoding="utf-8").splitlines()
    torn = tmp_path / "torn.jsonl"
    torn.write_text("\n".join(lines[:-1]) + "\n" + lines[-1][:10],
                    encoding="utf-8")
    survivor = SplitSession(make_ranked(plan), cfg, torn)
    assert len(survivor.replay_warnings) == 1
    trimmed = tmp_path / "trimmed.jsonl"
    trimmed.write_text("\n".join(lines[:-1]) + "\n", encoding="utf-8")
    assert survivor.state() == SplitSession(make_ranked(plan), cfg, trimmed).state()


def test_corpus_mixing_repeats_smaller_corpora_exactly():
    def flat(name, size):
        return Corpus(name=name, pairs=((name, name),) * size,
                      doc_boundaries=((f"{name}-doc", 0, size),))

    assert oversample_factor(1_000_000, 1_000_000) == 1
    assert oversample_factor(1_000_000, 200_000) == 5
    assert oversample_factor(1_000_000, 40_000) == 25

    mixed = mix_corpora([flat("big", 1_000_000), flat("mid", 200_000),
                         flat("small", 40_000)])
    assert len(mixed) == 3_000_000
    for name in ("big", "mid", "small"):
        assert mixed.pairs.count((name, name)) == 1_000_000


def test_lm_self_likelihood_dominates_and_distributions_normalize():
    rng = random.Random(11)

    def synth(prefix):
        vocab = [f"{prefix}{i}" for i in range(20)]
        return [[rng.choice(vocab) for _ in range(8)] for _ in range(150)]

    corpora = [("legal", synth("legal")), ("bio", synth("bio")),
               ("news", synth("news"))]
    names, rows = lm_similarity_matrix(corpora, order=4)
    assert names == ["legal", "bio", "news"]
    for i in range(3):
        for j in range(3):
            if i != j:
                assert rows[i][i] > rows[i][j]

    lm = train_lm(corpora[0][1], order=4)
    outcomes = sorted(lm.vocab)
    pool = outcomes + ["<s>", "never-seen-token"]
    for _ in range(100):
        history = tuple(lm.map_token(rng.choice(pool))
                        for _ in range(rng.randint(0, 3)))
        total = sum(lm.prob(w, history) for w in outcomes)
        assert abs(total - 1.0) <= 1e-9, f"sum {total} for history {history}"


def test_sentence_bleu_matches_frozen_values():
    pins = [
        ("a b c d", "a b c d", 1.0),
        ("a b", "c d", 0.0),
        ("a b c d", "a b c e", 0.6580370064762462),
        ("a b c", "a b c d", 0.7165313105737893),
        ("a a a a", "a a", 0.4518010018049224),
    ]
    for hyp, ref, want in pins:
        assert sim_bleu(hyp.split(), ref.split()) == want


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr().out


def full_run(workdir, lecture5, capsys, monkeypatch):
    """clean + align + scripted judging + split + stats, all via the CLI."""
    out = workdir / "run"
    log = out / "judgments.jsonl"
    cfg = workdir / "pipeline.cfg"
    cfg.write_text(
        f"manifest={lecture5 / 'manifest.tsv'}\n"
        f"out={out}\n"
        "measure=mt-bleu\nprovider=identity\nlang_a=en\nlang_b=en\n"
        f"meta_patterns={lecture5 / 'meta-patterns.txt'}\n"
        "volume_test=12\nvolume_dev=10\nratio=0.5\n"
        f"log={log}\n",
        encoding="utf-8",
    )
    code, stdout = run_cli(capsys, "pipeline", "--config", cfg)
    assert code == 0 and "waiting for judgments" in stdout

    script = (lecture5 / "judgment-script.txt").read_text(encoding="utf-8").split()
    answers = iter(script)
    monkeypatch.setattr("builtins.input", lambda prompt="": next(answers))
    code, _ = run_cli(capsys, "split", "--alignments", out / "aligned",
                      "--volume-test", "12", "--volume-dev", "10",
                      "--ratio", "0.5", "--log", log, "--out", out / "splits",
                      "--interactive", "--annotator", "fixture")
    assert code == 0

    code, stdout = run_cli(capsys, "pipeline", "--config", cfg)
    assert code == 0 and "stats: report written" in stdout
    return out, cfg


def snapshot(root):
    """Everything the run produced, keyed by relative path. Cache stamps and
    the judgment log are compared separately (stamps hash absolute paths,
    the log carries wall-clock timestamps)."""
    files = {}
    for path in sorted(Path(root).rglob("*")):
        if path.is_dir():
            continue
        rel = str(path.relative_to(root))
        if ".stamp." in path.name or rel == "judgments.jsonl":
            continue
        files[rel] = path.read_bytes()
    return files


def test_fixture_pipeline_is_deterministic_and_rerun_is_noop(
        lecture5, tmp_path, capsys, monkeypatch):
    work_a = tmp_path / "a"
    work_b = tmp_path / "b"
    work_a.mkdir()
    work_b.mkdir()
    out_a, cfg_a = full_run(work_a, lecture5, capsys, monkeypatch)
    out_b, _ = full_run(work_b, lecture5, capsys, monkeypatch)

    snap_a, snap_b = snapshot(out_a), snapshot(out_b)
    assert set(snap_a) == set(snap_b)
    for rel in snap_a:
        if rel == "cleaned/report.jsonl":
            a = snap_a[rel].decode("utf-8").replace(str(work_a), "")
            b = snap_b[rel].decode("utf-8").replace(str(work_b), "")
            assert a == b, rel
        else:
            assert snap_a[rel] == snap_b[rel], rel

    def stripped(path):
        records = [json.loads(line) for line in
                   path.read_text(encoding="utf-8").splitlines()]
        for rec in records:
            rec.pop("timestamp")
        return records

    assert stripped(out_a / "judgments.jsonl") == stripped(out_b / "judgments.jsonl")

    # nothing changed, so a rerun touches nothing
    code, stdout = run_cli(capsys, "pipeline", "--config", cfg_a)
    assert code == 0
    for stage in ("clean", "align", "split", "stats"):
        assert f"{stage}: up to date" in stdout
    assert snapshot(out_a) == snap_a
