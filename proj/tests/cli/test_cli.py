"""Exit-code and report-schema contract of the histk command line.

usage: test_cli.py HISTK_BINARY
"""

import json
import pathlib
import random
import subprocess
import sys
import tempfile
import unittest

try:
    import jsonschema
except ImportError:
    print("jsonschema is not installed; skipping")
    sys.exit(77)

ROOT = pathlib.Path(__file__).resolve().parents[2]
DATA = ROOT / "tests" / "data"
SCHEMAS = ROOT / "schemas"
BINARY = None


def toy_conllu(sentences, seed):
    """Same grammar as the C++ toy treebank: [det] [adj] noun [det] [adj] noun verb ."""
    rng = random.Random(seed)
    nouns = ["ev", "kitap", "adam", "kadın", "şehir", "mektup"]
    out = []
    for s in range(sentences):
        toks = []

        def push(form, upos, rel):
            toks.append([form, upos, 0, rel])
            return len(toks)

        nps = []
        for role in ("nsubj", "obj"):
            mods = []
            if rng.random() < 0.5:
                mods.append(push(rng.choice(["bir", "bu"]), "DET", "det"))
            if rng.random() < 0.5:
                mods.append(push(rng.choice(["büyük", "eski"]), "ADJ", "amod"))
            noun = push(rng.choice(nouns), "NOUN", role)
            for m in mods:
                toks[m - 1][2] = noun
            nps.append(noun)
        verb = push(rng.choice(["gördü", "yazdı", "okudu"]), "VERB", "root")
        for n in nps:
            toks[n - 1][2] = verb
        dot = push(".", "PUNCT", "punct")
        toks[dot - 1][2] = verb
        out.append(f"# sent_id = toy-{s + 1}")
        for i, (form, upos, head, rel) in enumerate(toks, 1):
            out.append(f"{i}\t{form}\t{form}\t{upos}\t_\t_\t{head}\t{rel}\t_\t_")
        out.append("")
    return "\n".join(out) + "\n"


class Cli(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.dir = pathlib.Path(cls.tmp.name)
        cls.toy = cls.dir / "toy.conllu"
        cls.toy.write_text(toy_conllu(10, 42), encoding="utf-8")
        cls.schemas = {p.name.split(".")[0]: json.loads(p.read_text()) for p in SCHEMAS.glob("*.schema.json")}
        for s in cls.schemas.values():
            jsonschema.Draft202012Validator.check_schema(s)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def run_cli(self, *args, expect):
        p = subprocess.run([BINARY, *map(str, args)], capture_output=True, text=True)
        self.assertEqual(p.returncode, expect, f"{args}\nstdout: {p.stdout[-600:]}\nstderr: {p.stderr[-600:]}")
        return p

    def report(self, command, *args, expect=0):
        path = self.dir / f"{command}-{len(list(self.dir.iterdir()))}.json"
        self.run_cli(command, *args, "--report", path, expect=expect)
        rep = json.loads(path.read_text(encoding="utf-8"))
        jsonschema.validate(rep, self.schemas[command])
        return rep

    def train_toy(self, name, expect=0, **overrides):
        model = self.dir / name
        opts = {"lr": "5e-3", "warmup": "20", "batch-size": "2", "max-epochs": "80", "patience": "80", "dim": "32",
                "arc-hidden": "64", "label-hidden": "32"}
        opts.update({k.replace("_", "-"): v for k, v in overrides.items()})
        args = ["--train", self.toy, "--dev", self.toy, "-o", model, "-q"]
        for k, v in opts.items():
            args += [f"--{k}", v]
        if expect == 2:
            return model, self.run_cli("train", *args, expect=expect)
        return model, self.report("train", *args, expect=expect)

    # ---- validate ----

    def test_validate(self):
        rep = self.report("validate", DATA / "dual_script.conllu")
        self.assertTrue(rep["ok"])
        rep = self.report("validate", DATA / "invalid_trees.conllu", expect=1)
        self.assertEqual(rep["total_violations"], 2)
        self.assertEqual(rep["files"][0]["invalid_sentences"][0]["violations"][0]["kind"], "cycle")
        self.run_cli("validate", self.dir / "missing.conllu", expect=2)

    # ---- stats ----

    def test_stats(self):
        rep = self.report("stats", self.toy)
        self.assertEqual(rep["treebanks"][0]["basic"]["num_sentences"], 10)
        rep = self.report("stats", self.toy, DATA / "dual_script.conllu", "--compare", "--metrics", "conj,obj")
        self.assertEqual(len(rep["comparison"]), 2)
        self.assertTrue(rep["comparison"][0]["metrics"][0]["absent"])
        rep = self.report("stats", "--input-format", "conll2003", DATA / "ner_gold.txt")
        self.assertEqual(rep["total"]["sentences"], 2)
        empty = self.dir / "empty"
        empty.mkdir(exist_ok=True)
        self.run_cli("stats", empty, expect=2)

    def test_stats_reference_mismatch_is_reported(self):
        ref = ROOT / "data" / "reference" / "ota_boun.json"
        rep = self.report("stats", self.toy, "--reference", ref)
        self.assertFalse(rep["treebanks"][0]["reference"]["ok"])
        self.report("stats", self.toy, "--reference", ref, "--strict-reference", expect=1)

    # ---- clean ----

    def test_clean_and_idempotence(self):
        once = self.dir / "once.txt"
        rep = self.report("clean", DATA / "ocr_samples.txt", "-o", once)
        self.assertGreater(rep["total_changes"], 0)
        self.assertGreater(rep["total_flags"], 0)
        sidecar = json.loads((self.dir / "once.txt.report.json").read_text(encoding="utf-8"))
        jsonschema.validate(sidecar, self.schemas["clean"])
        twice = self.dir / "twice.txt"
        rep = self.report("clean", once, "-o", twice)
        self.assertEqual(rep["total_changes"], 0)
        self.assertEqual(once.read_bytes(), twice.read_bytes())

    def test_clean_bad_rules(self):
        bad = self.dir / "bad_rules.json"
        bad.write_text('{"version": 2}')
        self.run_cli("clean", DATA / "ocr_samples.txt", "--rules", bad, "-o", self.dir / "x.txt", expect=2)

    def test_rules(self):
        p = self.run_cli("rules", expect=0)
        jsonschema.validate(json.loads(p.stdout), self.schemas["rules"])
        shipped = json.loads((ROOT / "data" / "rules" / "default_rules.json").read_text(encoding="utf-8"))
        self.assertEqual(json.loads(p.stdout), shipped)

    # ---- eval ----

    def test_eval(self):
        rep = self.report("eval", self.toy, self.toy, "--task", "parse")
        self.assertEqual((rep["attachment"]["uas"], rep["attachment"]["las"]), (100.0, 100.0))
        rep = self.report("eval", self.toy, self.toy, "--task", "pos")
        self.assertEqual(rep["tagging"]["accuracy"], 100.0)
        rep = self.report("eval", self.toy, self.toy, "--task", "iaa")
        self.assertEqual(rep["kappa"]["kappa"], 1.0)
        rep = self.report("eval", DATA / "ner_gold.txt", DATA / "ner_pred.txt", "--task", "ner")
        self.assertLess(rep["spans"]["micro"]["f1"], 100.0)
        self.run_cli("eval", self.toy, DATA / "dual_script.conllu", "--task", "parse", expect=1)
        self.run_cli("eval", DATA / "ner_gold.txt", DATA / "ner_gold.txt", "--task", "parse", expect=2)

    # ---- train / parse / tag ----

    def test_train_parse_tag(self):
        model, rep = self.train_toy("parser.model")
        self.assertGreaterEqual(rep["log"]["best_score"], 95.0)
        again, _ = self.train_toy("parser2.model")
        self.assertEqual(model.read_bytes(), again.read_bytes())

        parsed = self.dir / "parsed.conllu"
        rep = self.report("parse", self.toy, "--model", model, "-o", parsed)
        self.assertEqual(rep["sentences"], 10)
        self.report("validate", parsed)
        rep = self.report("eval", self.toy, parsed, "--task", "parse")
        self.assertGreaterEqual(rep["attachment"]["las"], 95.0)

        tagger = self.dir / "tagger.model"
        self.report("train", "--task", "pos", "--train", self.toy, "--dev", self.toy, "-o", tagger,
                    "--max-epochs", "2", "--patience", "2", "--dim", "8", "-q")
        rep = self.report("tag", self.toy, "--model", tagger, "-o", self.dir / "tagged.conllu")
        self.assertEqual(rep["task"], "pos")

    def test_train_errors(self):
        _, p = self.train_toy("bad.model", patience="0", expect=2)
        self.assertIn("patience", p.stderr)
        _, rep = self.train_toy("diverged.model", lr="1e300", expect=1)
        self.assertGreaterEqual(rep["error"]["step"], 1)
        self.run_cli("parse", self.toy, "--model", self.dir / "none.model", expect=2)

    def test_config_file_and_flag_precedence(self):
        cfg = self.dir / "train.toml"
        cfg.write_text("[train]\nmax-epochs = 3\npatience = 3\nseed = 5\n")
        model = self.dir / "cfg.model"
        path = self.dir / "cfg-report.json"
        self.run_cli("--config", cfg, "train", "--train", self.toy, "--dev", self.toy, "-o", model, "--dim", "8",
                     "--arc-hidden", "8", "--label-hidden", "4", "--patience", "2", "-q", "--report", path, expect=0)
        rep = json.loads(path.read_text())
        self.assertEqual(rep["config"]["max_epochs"], 3)
        self.assertEqual(rep["config"]["seed"], 5)
        self.assertEqual(rep["config"]["patience"], 2)

    def test_usage_errors(self):
        self.run_cli(expect=2)
        self.run_cli("nope", expect=2)
        self.run_cli("eval", self.toy, self.toy, expect=2)


if __name__ == "__main__":
    BINARY = sys.argv.pop(1)
    unittest.main(verbosity=2)
