import math
import subprocess
import sys

import numpy as np
import pytest

from conftest import random_corpus
from plsa.cli import main
from plsa.corpus import Corpus, Vocabulary, load_uci, write_uci
from plsa.model import ModelF1, init_random, load_model, save_model


@pytest.fixture
def files(tmp_path):
    corpus = Corpus.from_entries(2, 2, [(0, 0, 3), (1, 1, 1)])
    write_uci(corpus, tmp_path / "docword.txt", Vocabulary(["apple", "bear"]), tmp_path / "vocab.txt")
    return tmp_path


@pytest.fixture
def bigger(tmp_path):
    corpus = Corpus.from_dense(random_corpus(np.random.default_rng(3), 15, 12, max_count=8))
    write_uci(corpus, tmp_path / "big.txt", None, tmp_path / "bigvocab.txt")
    return corpus, tmp_path / "big.txt", tmp_path / "bigvocab.txt"


def run_train(d, *extra, docword="docword.txt", vocab="vocab.txt", out="m.json"):
    return main(["train", "--input", str(d / docword), "--vocab", str(d / vocab),
                 "--out", str(d / out), *extra])


class TestTrain:
    def test_single_topic_recovers_frequencies(self, files, capsys):
        assert run_train(files, "--topics", "1", "--seed", "0", "--formulation", "f1") == 0
        m = load_model(files / "m.json")
        np.testing.assert_allclose(m.phi, [[0.75, 0.25]], atol=1e-15)
        assert "final log-likelihood" in capsys.readouterr().out

    def test_zero_iterations_is_init(self, files):
        assert run_train(files, "--topics", "2", "--seed", "11", "--max-iters", "0") == 0
        assert load_model(files / "m.json") == init_random(2, 2, 2, 11, "modern")

    def test_byte_identical(self, bigger, tmp_path):
        _, docword, vocab = bigger
        args = ["--topics", "3", "--seed", "4", "--formulation", "bg-f2", "--lambda-b", "0.3"]
        for tag in ("a", "b"):
            assert main(["train", "--input", str(docword), "--vocab", str(vocab), *args,
                         "--out", str(tmp_path / f"{tag}.json"), "--trace", str(tmp_path / f"{tag}.csv")]) == 0
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert (tmp_path / "a.csv").read_text().startswith("iteration,loglik\n")

    def test_background_needs_lambda(self, files, capsys):
        assert run_train(files, "--topics", "1", "--seed", "0", "--formulation", "bg-f1") != 0
        assert "lambda-b" in capsys.readouterr().err

    def test_dead_topic_exit(self, files, capsys):
        rc = run_train(files, "--topics", "2", "--seed", "0", "--formulation", "bg-f1", "--lambda-b", "1")
        assert rc != 0
        assert "dead topic" in capsys.readouterr().err

    def test_parse_error_exit(self, tmp_path, capsys):
        (tmp_path / "bad.txt").write_text("1\n1\n1\n1 2 1\n")
        (tmp_path / "v.txt").write_text("a\n")
        assert run_train(tmp_path, "--topics", "1", "--seed", "0", docword="bad.txt", vocab="v.txt") != 0
        assert "line 4" in capsys.readouterr().err


class TestTopics:
    def save(self, tmp_path, phi):
        phi = np.asarray(phi)
        m = ModelF1(phi, np.full((1, phi.shape[0]), 1 / phi.shape[0]), [1.0])
        save_model(m, tmp_path / "t.json")
        return str(tmp_path / "t.json")

    def parse(self, out):
        rows = []
        for line in out.strip().splitlines():
            rows.append([(int(t.split(":")[0]), float(t.split(":")[1])) for t in line.split(": ", 1)[1].split()])
        return rows

    def test_top_two(self, tmp_path, capsys):
        assert main(["topics", "--model", self.save(tmp_path, [[0.7, 0.2, 0.1]]), "--top", "2"]) == 0
        assert [w for w, _ in self.parse(capsys.readouterr().out)[0]] == [0, 1]

    def test_all_terms_sum_to_one(self, tmp_path, capsys):
        assert main(["topics", "--model", self.save(tmp_path, [[0.1, 0.6, 0.3], [0.3, 0.3, 0.4]]), "--top", "3"]) == 0
        for row in self.parse(capsys.readouterr().out):
            assert abs(sum(p for _, p in row) - 1) < 1e-5  # printed with 6 digits

    def test_ties_by_term_id(self, tmp_path, capsys):
        assert main(["topics", "--model", self.save(tmp_path, [[0.2, 0.4, 0.4]]), "--top", "3"]) == 0
        assert [w for w, _ in self.parse(capsys.readouterr().out)[0]] == [1, 2, 0]

    def test_clamps(self, tmp_path, capsys, caplog):
        assert main(["topics", "--model", self.save(tmp_path, [[0.5, 0.5]]), "--top", "9"]) == 0
        assert len(self.parse(capsys.readouterr().out)[0]) == 2
        assert "clamping" in caplog.text

    def test_vocab_names(self, tmp_path, capsys):
        (tmp_path / "v.txt").write_text("apple\nbear\n")
        path = self.save(tmp_path, [[0.3, 0.7]])
        assert main(["topics", "--model", path, "--top", "1", "--vocab", str(tmp_path / "v.txt")]) == 0
        assert "bear:0.7" in capsys.readouterr().out


class TestPerplexity:
    def test_unigram_entropy(self, tmp_path, capsys):
        corpus = Corpus.from_entries(1, 3, [(0, 0, 5), (0, 1, 3), (0, 2, 2)])
        write_uci(corpus, tmp_path / "d.txt", None, tmp_path / "v.txt")
        assert run_train(tmp_path, "--topics", "1", "--seed", "0", docword="d.txt", vocab="v.txt") == 0
        capsys.readouterr()
        assert main(["perplexity", "--model", str(tmp_path / "m.json"), "--input", str(tmp_path / "d.txt"),
                     "--vocab", str(tmp_path / "v.txt")]) == 0
        p = np.array([0.5, 0.3, 0.2])
        assert float(capsys.readouterr().out) == pytest.approx(math.exp(-(p * np.log(p)).sum()), rel=1e-12)

    def test_single_token_half(self, tmp_path, capsys):
        write_uci(Corpus.from_entries(1, 2, [(0, 0, 1)]), tmp_path / "d.txt", None, tmp_path / "v.txt")
        save_model(ModelF1([[0.5, 0.5]], [[1.0]], [1.0], modern=True), tmp_path / "m.json")
        assert main(["perplexity", "--model", str(tmp_path / "m.json"), "--input", str(tmp_path / "d.txt"),
                     "--vocab", str(tmp_path / "v.txt")]) == 0
        assert float(capsys.readouterr().out) == pytest.approx(2.0, abs=1e-12)

    def test_vocab_mismatch(self, files, tmp_path, capsys):
        save_model(init_random(2, 3, 2, 0, "modern"), tmp_path / "m3.json")
        assert main(["perplexity", "--model", str(tmp_path / "m3.json"), "--input", str(files / "docword.txt"),
                     "--vocab", str(files / "vocab.txt")]) != 0
        assert "mismatch" in capsys.readouterr().err

    @pytest.mark.parametrize("form, extra", [("modern", []), ("f1", ["--include-doc-prior"]),
                                             ("f2", ["--include-doc-prior"]),
                                             ("bg-f1", ["--include-doc-prior"])])
    def test_reproduces_training_likelihood(self, bigger, tmp_path, capsys, form, extra):
        corpus, docword, vocab = bigger
        lam = ["--lambda-b", "0.2"] if form.startswith("bg") else []
        assert main(["train", "--input", str(docword), "--vocab", str(vocab), "--topics", "3", "--seed", "1",
                     "--formulation", form, *lam, "--out", str(tmp_path / "m.json"),
                     "--trace", str(tmp_path / "t.csv")]) == 0
        capsys.readouterr()
        final = float((tmp_path / "t.csv").read_text().strip().splitlines()[-1].split(",")[1])
        assert main(["perplexity", "--model", str(tmp_path / "m.json"), "--input", str(docword),
                     "--vocab", str(vocab), "--no-fold-in", *extra]) == 0
        got = float(capsys.readouterr().out)
        assert got == pytest.approx(math.exp(-final / corpus.total_tokens), rel=1e-9)

    def test_f1_default_excludes_doc_prior(self, bigger, tmp_path, capsys):
        corpus, docword, vocab = bigger
        main(["train", "--input", str(docword), "--vocab", str(vocab), "--topics", "2", "--seed", "1",
              "--formulation", "f1", "--out", str(tmp_path / "m.json")])
        capsys.readouterr()
        args = ["perplexity", "--model", str(tmp_path / "m.json"), "--input", str(docword),
                "--vocab", str(vocab), "--no-fold-in"]
        main(args)
        without = float(capsys.readouterr().out)
        main(args + ["--include-doc-prior"])
        with_prior = float(capsys.readouterr().out)
        assert with_prior > without


class TestGenerate:
    def write_planted(self, tmp_path, phi, theta, lengths):
        np.savetxt(tmp_path / "phi.txt", phi)
        np.savetxt(tmp_path / "theta.txt", theta)
        np.savetxt(tmp_path / "len.txt", lengths, fmt="%d")
        return ["generate", "--phi", str(tmp_path / "phi.txt"), "--theta", str(tmp_path / "theta.txt"),
                "--doc-lengths", str(tmp_path / "len.txt")]

    def test_one_hot(self, tmp_path):
        args = self.write_planted(tmp_path, np.eye(3), np.eye(3)[[2, 0]], [5, 7])
        assert main(args + ["--seed", "1", "--out", str(tmp_path / "o.txt"), "--vocab-out", str(tmp_path / "v.txt")]) == 0
        corpus, _ = load_uci(tmp_path / "o.txt", tmp_path / "v.txt")
        assert corpus.entries == [(0, 2, 5), (1, 0, 7)]

    def test_byte_identical_and_totals(self, tmp_path):
        rng = np.random.default_rng(0)
        phi = rng.dirichlet(np.ones(10), 3)
        theta = rng.dirichlet(np.ones(3), 6)
        lengths = rng.integers(1, 200, 6)
        args = self.write_planted(tmp_path, phi, theta, lengths)
        for tag in ("a", "b"):
            assert main(args + ["--seed", "9", "--out", str(tmp_path / f"{tag}.txt"),
                                "--vocab-out", str(tmp_path / "v.txt")]) == 0
        assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()
        corpus, _ = load_uci(tmp_path / "a.txt", tmp_path / "v.txt")
        assert corpus.total_tokens == lengths.sum()

    def test_dimension_mismatch(self, tmp_path, capsys):
        args = self.write_planted(tmp_path, np.eye(3), np.eye(2), [5, 7])
        assert main(args + ["--seed", "1", "--out", str(tmp_path / "o.txt")]) != 0
        assert "topics" in capsys.readouterr().err


def test_module_entry_point(files):
    proc = subprocess.run([sys.executable, "-m", "plsa", "topics", "--model", "nope.json"],
                          capture_output=True, text=True)
    assert proc.returncode == 1
    assert proc.stderr.startswith("error:")
