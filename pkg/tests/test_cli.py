import json

import pytest
import yaml

from src.cli.config import RunConfig, load_config
from src.cli.main import (
    SOLVED_FILE, SUMMARY_FILE, TREES_FILE, cmd_decompose, cmd_eval, cmd_index, cmd_ingest, cmd_solve, cmd_stats, main,
)
from src.core.errors import ConfigError, MalformedLine, StageError
from src.evaluation.dataset import file_hash, load_dataset, sample_questions
from src.llm.gateway import LlmGateway, LlmMode
from src.llm.prompts import DECOMPOSE_MULTIPLE

from .conftest import (
    SAMPLE_DATASET, SAMPLE_KG, SAMPLE_QUESTION, SAMPLE_SURFACE_FORMS, KeywordTransport, generic_reply,
)


def _config(tmp_path, work, **overrides):
    settings = {
        "tkg_path": SAMPLE_KG,
        "surface_forms_path": SAMPLE_SURFACE_FORMS,
        "dataset_path": SAMPLE_DATASET,
        "work_dir": tmp_path / work,
        "cache_dir": tmp_path / "cache",
        "parallelism": 2,
    }
    settings.update(overrides)
    return load_config(None, settings)


def _config_file(tmp_path, name, **settings):
    path = tmp_path / f"{name}.yaml"
    path.write_text(yaml.safe_dump({k: str(v) if hasattr(v, "parts") else v for k, v in settings.items()}),
                    encoding="utf-8")
    return path


def _live_gateway(transport, cache_dir=None):
    return LlmGateway(LlmMode.LIVE, transport=transport, cache_dir=cache_dir, sleep=lambda seconds: None)


def _record_run(config, transport):
    gateway = _live_gateway(transport, config.cache_dir / "llm")
    cmd_ingest(config)
    cmd_index(config)
    cmd_decompose(config, gateway=gateway)
    return cmd_solve(config, gateway=gateway), gateway


def _twenty_questions(path):
    with path.open("w", encoding="utf-8") as handle:
        for i in range(20):
            row = {"question_id": f"q{i:02d}", "question": f"Who visited China in 20{i % 10:02d}-{i % 12 + 1:02d}?",
                   "answers": ["China"]}
            handle.write(json.dumps(row) + "\n")
    return path


def test_recorded_run_replays_offline_with_full_score(tmp_path, sample_transport, capsys):
    fixtures = tmp_path / "fixtures.json"
    live = _config(tmp_path, "live", llm_mode="live", record_fixture_path=fixtures)
    result, _ = _record_run(live, sample_transport)
    assert result == {"questions": 1, "llm_calls": 5, "network_calls": 5}
    assert len(json.loads(fixtures.read_text(encoding="utf-8"))) == 5

    config_path = _config_file(tmp_path, "replay", tkg_path=SAMPLE_KG, surface_forms_path=SAMPLE_SURFACE_FORMS,
                               dataset_path=SAMPLE_DATASET, cache_dir=tmp_path / "cache", llm_mode="scripted",
                               fixture_path=fixtures)
    work = tmp_path / "replay"
    for stage in ("ingest", "index", "decompose", "solve", "eval", "stats"):
        assert main([stage, "--config", str(config_path), "--work-dir", str(work)]) == 0

    summary = json.loads((work / SUMMARY_FILE).read_text(encoding="utf-8"))
    assert summary["hits1"] == 1.0
    assert summary["recall"]["recall"]["30"] == 1.0
    assert (work / "recall_curve.png").exists()
    assert "Hits@1" in capsys.readouterr().out

    solved = [json.loads(line) for line in (work / SOLVED_FILE).read_text(encoding="utf-8").splitlines()]
    assert solved[0]["answer"] == "[Stephen W. Bosworth 2009-05-08], [Wen Jiabao 2009-05-08]"
    assert solved[0]["api_calls"] == 5
    assert file_hash(work / SOLVED_FILE) == file_hash(live.work_dir / SOLVED_FILE)

    manifest = json.loads((work / "manifest_solve.json").read_text(encoding="utf-8"))
    assert manifest["fixture_hash"] == file_hash(fixtures)
    assert manifest["outputs"][SOLVED_FILE] == file_hash(work / SOLVED_FILE)


def test_empty_solve_output_fails_eval(tmp_path, capsys):
    work = tmp_path / "empty"
    work.mkdir()
    (work / SOLVED_FILE).write_text("", encoding="utf-8")
    assert main(["eval", "--work-dir", str(work), "--dataset", str(SAMPLE_DATASET)]) == 2
    report = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert report["error"] == "EmptyRecordSet"


def test_scripted_runs_are_byte_identical(tmp_path):
    dataset = _twenty_questions(tmp_path / "questions.jsonl")
    fixtures = tmp_path / "fixtures.json"
    live = _config(tmp_path, "live", dataset_path=dataset, llm_mode="live", record_fixture_path=fixtures)
    _record_run(live, KeywordTransport(default=generic_reply))

    hashes = []
    for work in ("first", "second"):
        config = _config(tmp_path, work, dataset_path=dataset, llm_mode="scripted", fixture_path=fixtures,
                         parallelism=4)
        cmd_ingest(config)
        cmd_index(config)
        cmd_decompose(config)
        result = cmd_solve(config)
        assert result["questions"] == 20
        assert result["network_calls"] == 0
        hashes.append(file_hash(config.work_dir / SOLVED_FILE))
        assert cmd_eval(config)["hits1"] == 1.0
        assert cmd_stats(config)["avg_depth"] == 0.0
    assert hashes[0] == hashes[1] == file_hash(live.work_dir / SOLVED_FILE)


def test_cached_replay_makes_no_network_calls(tmp_path, sample_transport):
    live = _config(tmp_path, "live", llm_mode="live")
    _record_run(live, sample_transport)

    cached = _config(tmp_path, "cached", llm_mode="cached")
    cmd_ingest(cached)
    cmd_index(cached)
    cmd_decompose(cached)
    result = cmd_solve(cached)
    assert result["network_calls"] == 0
    assert result["llm_calls"] == 4
    assert file_hash(cached.work_dir / SOLVED_FILE) == file_hash(live.work_dir / SOLVED_FILE)


def test_fixture_miss_is_reported_with_the_question(tmp_path, capsys):
    fixtures = tmp_path / "empty.json"
    fixtures.write_text("{}", encoding="utf-8")
    work = tmp_path / "miss"
    args = ["--work-dir", str(work), "--dataset", str(SAMPLE_DATASET), "--fixtures", str(fixtures)]
    assert main(["ingest", "--tkg", str(SAMPLE_KG), "--work-dir", str(work)]) == 0
    assert main(["decompose", *args]) == 2
    report = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert report["error"] == "FixtureMiss"
    assert report["question_id"] == "papandreou-china"


def test_solve_needs_the_previous_stage(tmp_path, capsys):
    assert main(["solve", "--work-dir", str(tmp_path / "nothing"), "--fixtures", str(tmp_path / "f.json")]) == 2
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "TkgIoError"


def test_index_detects_a_changed_corpus(tmp_path, sample_transport):
    config = _config(tmp_path, "run", llm_mode="live")
    cmd_ingest(config)
    cmd_index(config)
    index_path = config.work_dir / "index.json"
    description = json.loads(index_path.read_text(encoding="utf-8"))
    index_path.write_text(json.dumps(dict(description, corpus_hash="0" * 64)), encoding="utf-8")
    cmd_decompose(config, gateway=_live_gateway(sample_transport))
    with pytest.raises(ConfigError):
        cmd_solve(config, gateway=_live_gateway(sample_transport))


def test_config_validation(tmp_path):
    assert RunConfig().top_k == 50
    assert RunConfig().temperature == 0.0
    assert load_config(None, {"recall_ns": [30, 10, 10]}).recall_ns == [10, 30]
    with pytest.raises(ConfigError):
        load_config(None, {"top_k": 0})
    with pytest.raises(ConfigError):
        load_config(_config_file(tmp_path, "bad", unknown_setting=1))
    path = _config_file(tmp_path, "good", top_k=20, llm_mode="cached")
    config = load_config(path, {"top_k": None, "seed": 3})
    assert (config.top_k, config.llm_mode, config.seed) == (20, LlmMode.CACHED, 3)
    assert config.config_hash() == load_config(path, {"seed": 3}).config_hash()


def test_dataset_sampling(tmp_path):
    rows = load_dataset(_twenty_questions(tmp_path / "questions.jsonl"))
    assert [r["question_id"] for r in sample_questions(rows, 3)] == ["q00", "q01", "q02"]
    sampled = sample_questions(rows, 5, seed=1)
    assert sampled == sample_questions(rows, 5, seed=1)
    assert [r["question_id"] for r in sampled] == sorted(r["question_id"] for r in sampled)


def _last_error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_corrupt_stage_file_is_reported(tmp_path, capsys):
    work = tmp_path / "corrupt"
    work.mkdir()
    (work / SOLVED_FILE).write_text('{"question_id": "q1"}\n{not json\n', encoding="utf-8")
    assert main(["stats", "--work-dir", str(work)]) == 2
    report = _last_error(capsys)
    assert report["error"] == "MalformedLine"
    assert "line 2" in report["message"]

    (work / SOLVED_FILE).write_bytes(b"\xff\xfe\n")
    assert main(["stats", "--work-dir", str(work)]) == 2
    assert _last_error(capsys)["error"] == "MalformedLine"


def test_undecodable_inputs_fail_cleanly(tmp_path, capsys):
    tkg = tmp_path / "bad.tsv"
    tkg.write_bytes(b"A\tMake a visit\tB\t2009-05-12\nB\tHost a visit\t\xff\t2009-05-12\n")
    assert main(["ingest", "--tkg", str(tkg), "--work-dir", str(tmp_path / "bad")]) == 2
    report = _last_error(capsys)
    assert report["error"] == "MalformedLine"
    assert "UTF-8" in report["message"]

    dataset = tmp_path / "questions.jsonl"
    dataset.write_bytes(b'{"question_id": "q1", "question": "Who visited China?", "answers": ["Iran"]}\n\xff{\n')
    with pytest.raises(MalformedLine) as excinfo:
        load_dataset(dataset)
    assert excinfo.value.line_no == 2


def _forward_reference_transport():
    reply = json.dumps({SAMPLE_QUESTION: [
        "Who visited China before #2?",
        "When did Georgios Papandreou visit China?",
    ]})
    return KeywordTransport([(DECOMPOSE_MULTIPLE, SAMPLE_QUESTION, reply)], default=generic_reply)


def test_bad_decomposition_falls_back_to_a_single_question(tmp_path):
    config = _config(tmp_path, "fallback", llm_mode="live")
    result = cmd_decompose(config, gateway=_live_gateway(_forward_reference_transport()))
    assert result == {"questions": 1, "llm_calls": 1}

    rows = [json.loads(line) for line in (config.work_dir / TREES_FILE).read_text(encoding="utf-8").splitlines()]
    tree = rows[0]["tree"]
    assert len(tree["nodes"]) == 1
    assert tree["decompose_calls"] == 1
    assert tree["nodes"][0]["sons"] == []
    assert tree["nodes"][0]["gold_answer"] == "Wen Jiabao"


def test_strict_decomposition_rejects_forward_references(tmp_path):
    config = _config(tmp_path, "strict", llm_mode="live", strict_decomposition=True)
    with pytest.raises(StageError) as excinfo:
        cmd_decompose(config, gateway=_live_gateway(_forward_reference_transport()))
    assert excinfo.value.question_id == "papandreou-china"
    assert "PlaceholderViolation" in str(excinfo.value)
