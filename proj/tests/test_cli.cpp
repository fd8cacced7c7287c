#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "doctest.h"

#include "arcnet/checkpoint.hpp"
#include "arcnet/data.hpp"

namespace fs = std::filesystem;
using namespace arcnet;

namespace {

const std::string kCli = ARCNET_CLI;

struct Run {
  int code;
  std::string out;
};

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "arcnet_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run run(const std::string& args, const std::string& env = "") {
  const fs::path log = scratch() / "stdout.txt";
  const std::string cmd = "cd " + scratch().string() + " && " + env + " " + kCli + " " + args + " > " +
                          log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

const char* kSmall = "--party-dim 6 --context-dim 6 --emotion-dim 4";

// A small separable corpus shared by the training tests.
void ensure_small_corpus() {
  if (fs::exists(scratch() / "small.jsonl")) return;
  REQUIRE(run("synth --out small.jsonl --conversations 16 --utterances 5 --dims 6,3,3 --classes 3").code == 0);
  REQUIRE(run("synth --out sep.jsonl --pairs 2000 --dims 8,4,4 --rho 0.66 --mu 2 --sigma 0.5").code == 0);
  REQUIRE(run("pretrain-shift --corpus small.jsonl --out pre_small --siamese-hidden 8").code == 0);
}

}  // namespace

TEST_CASE("synth with full persistence has no shifts") {
  REQUIRE(run("synth --out rho1.jsonl --rho 1.0 --conversations 20").code == 0);
  Run r = run("stats --corpus rho1.jsonl");
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(r.out)["shift_percentage"].get<double>() == 0.0);
}

TEST_CASE("synth is reproducible under a seed") {
  REQUIRE(run("synth --out s1.jsonl --seed 42 --conversations 5").code == 0);
  REQUIRE(run("synth --out s2.jsonl --seed 42 --conversations 5").code == 0);
  REQUIRE(run("synth --out s3.jsonl --seed 43 --conversations 5").code == 0);
  CHECK(slurp(scratch() / "s1.jsonl") == slurp(scratch() / "s2.jsonl"));
  CHECK(slurp(scratch() / "s1.jsonl") != slurp(scratch() / "s3.jsonl"));
}

TEST_CASE("synth shift rate at rho 0.66") {
  REQUIRE(run("synth --out r66.jsonl --rho 0.66 --pairs 2000").code == 0);
  Run r = run("stats --corpus r66.jsonl");
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["pairs"].get<std::size_t>() >= 2000);
  CHECK(std::abs(j["shift_percentage"].get<double>() - 34.0) <= 3.0);
}

TEST_CASE("pretrain-shift reaches a high F1 and is reproducible") {
  ensure_small_corpus();
  REQUIRE(run("pretrain-shift --corpus sep.jsonl --out pre_a --siamese-hidden 32").code == 0);
  REQUIRE(run("pretrain-shift --corpus sep.jsonl --out pre_b --siamese-hidden 32").code == 0);
  auto report = nlohmann::json::parse(slurp(scratch() / "pre_a" / "shift_report.json"));
  CHECK(report["shift_f1"].get<double>() >= 0.9);
  CHECK(file_hash(scratch() / "pre_a" / "shift.ckpt") == file_hash(scratch() / "pre_b" / "shift.ckpt"));
}

TEST_CASE("pretrain-shift without a polarity map is a validation error") {
  ensure_small_corpus();
  Corpus c = load_corpus(scratch() / "small.jsonl");
  c.polarity_map.clear();
  save_corpus(c, scratch() / "nomap.jsonl");
  CHECK(run("pretrain-shift --corpus nomap.jsonl --out pre_nomap").code == 2);
}

TEST_CASE("usage and validation exit codes") {
  ensure_small_corpus();
  CHECK(run("").code == 1);
  CHECK(run("train --corpus small.jsonl --out x --no-such-flag").code == 1);
  CHECK(run("train --corpus small.jsonl --out x --epochs 1").code == 1);
  CHECK(run("train --corpus small.jsonl --out x --epochs 1 --shift-checkpoint missing.ckpt").code == 2);
  CHECK(run("stats --corpus does_not_exist.jsonl").code == 2);
  CHECK(run("stats --corpus small.jsonl", "ARCNET_PRECISION=f16").code == 1);
  CHECK(run("--help").code == 0);
}

TEST_CASE("train and eval write every artifact") {
  ensure_small_corpus();
  const std::string args = std::string("train --corpus small.jsonl --shift-checkpoint pre_small/shift.ckpt ") +
                           "--epochs 2 --batch-size 4 --lr 0.01 " + kSmall;
  REQUIRE(run(args + " --out tr_a").code == 0);
  for (const char* f : {"model.ckpt", "metrics.json", "predictions.csv", "history.json", "train.log"}) {
    CHECK(fs::exists(scratch() / "tr_a" / f));
  }
  auto metrics = nlohmann::json::parse(slurp(scratch() / "tr_a" / "metrics.json"));
  for (const char* key : {"accuracy", "weighted_f1", "per_class", "confusion_matrix", "shift_subsets"}) {
    CHECK(metrics.contains(key));
  }

  Run shift = run("eval --corpus small.jsonl --checkpoint tr_a/model.ckpt --subset shift");
  REQUIRE(shift.code == 0);
  CHECK(shift.out.find("positive_to_negative accuracy=") != std::string::npos);
  CHECK(shift.out.find("negative_to_positive accuracy=") != std::string::npos);
  Run all = run("eval --corpus small.jsonl --checkpoint tr_a/model.ckpt --out ev");
  REQUIRE(all.code == 0);
  CHECK(nlohmann::json::parse(all.out).contains("weighted_f1"));
  CHECK(slurp(scratch() / "ev" / "predictions.csv").rfind("conversation_id,t,truth,pred,p_shift\n", 0) == 0);
}

TEST_CASE("same command and seed give byte-identical outputs") {
  ensure_small_corpus();
  const std::string args = std::string("train --corpus small.jsonl --shift-from-scratch --siamese-hidden 5 ") +
                           "--epochs 2 --batch-size 4 --lr 0.01 --threads 2 " + kSmall;
  REQUIRE(run(args + " --out det_a").code == 0);
  REQUIRE(run(args + " --out det_b").code == 0);
  for (const char* f : {"model.ckpt", "metrics.json", "predictions.csv", "history.json"}) {
    CHECK(slurp(scratch() / "det_a" / f) == slurp(scratch() / "det_b" / f));
  }
}

TEST_CASE("modality subset restricts the fusion pairs") {
  ensure_small_corpus();
  REQUIRE(run(std::string("train --corpus small.jsonl --no-shift --epochs 1 --batch-size 8 --modalities l,a ") +
              kSmall + " --out la")
              .code == 0);
  Checkpoint ck = load_checkpoint(scratch() / "la" / "model.ckpt");
  bool has_video = false, has_la = false, has_other_pair = false;
  for (const auto& t : ck.tensors) {
    if (t.name.rfind("v.", 0) == 0) has_video = true;
    if (t.name.rfind("fusion.gate_la", 0) == 0) has_la = true;
    if (t.name.rfind("fusion.gate_lv", 0) == 0 || t.name.rfind("fusion.gate_av", 0) == 0) has_other_pair = true;
  }
  CHECK(!has_video);
  CHECK(has_la);
  CHECK(!has_other_pair);
}

TEST_CASE("config file values yield to command-line flags") {
  ensure_small_corpus();
  {
    std::ofstream cfg(scratch() / "run.toml");
    cfg << "[train]\nepochs = 2\nbatch-size = 8\n";
  }
  const std::string base = std::string("--config run.toml train --corpus small.jsonl --no-shift ") + kSmall;
  REQUIRE(run(base + " --out cfg_a").code == 0);
  REQUIRE(run(base + " --epochs 1 --out cfg_b").code == 0);
  auto a = nlohmann::json::parse(slurp(scratch() / "cfg_a" / "history.json"));
  auto b = nlohmann::json::parse(slurp(scratch() / "cfg_b" / "history.json"));
  CHECK(a["history"].size() == 2);
  CHECK(b["history"].size() == 1);
}

TEST_CASE("single precision runs through the same commands") {
  ensure_small_corpus();
  Run r = run(std::string("train --corpus small.jsonl --no-shift --epochs 1 --batch-size 8 ") + kSmall + " --out f32",
              "ARCNET_PRECISION=f32");
  CHECK(r.code == 0);
  CHECK(fs::exists(scratch() / "f32" / "metrics.json"));
}

TEST_CASE("multilabel task trains one model per emotion") {
  ensure_small_corpus();
  Corpus c = load_corpus(scratch() / "small.jsonl");
  c.task = Task::EmotionMultilabel;
  c.label_set = {"happy", "sad", "anger", "fear", "disgust", "surprise"};
  c.polarity_map.clear();
  std::size_t i = 0;
  for (auto& conv : c.conversations) {
    for (auto& u : conv.utterances) {
      u.emotion_labels = {static_cast<int>(i % 6), static_cast<int>((i + 2) % 6)};
      ++i;
    }
  }
  save_corpus(c, scratch() / "multi.jsonl");
  REQUIRE(run(std::string("train --corpus multi.jsonl --shift-from-scratch --siamese-hidden 4 --epochs 1 ") +
              "--batch-size 8 " + kSmall + " --out multi")
              .code == 0);
  for (const auto& l : c.label_set) CHECK(fs::exists(scratch() / "multi" / ("emotion_" + l) / "metrics.json"));
}

TEST_CASE("gradcheck passes and fails by tolerance") {
  Run ok = run("gradcheck --out gc.json");
  CHECK(ok.code == 0);
  auto j = nlohmann::json::parse(slurp(scratch() / "gc.json"));
  CHECK(j["passed"].get<bool>());
  CHECK(j["shift"]["groups"].contains("shift"));
  CHECK(j["no_shift"]["groups"].contains("l.emotion"));
  CHECK(run("gradcheck --tolerance 1e-30").code == 3);
}

TEST_CASE("gates exports both modes") {
  ensure_small_corpus();
  Run r = run(std::string("gates --corpus small.jsonl --shift-checkpoint pre_small/shift.ckpt --conversation conv2 ") +
              kSmall + " --out gates.csv");
  REQUIRE(r.code == 0);
  std::istringstream in(slurp(scratch() / "gates.csv"));
  std::string line;
  std::getline(in, line);
  CHECK(line == "conversation_id,t,p_shift,one_minus_p_shift,mode");
  std::size_t shift_rows = 0, base_rows = 0;
  while (std::getline(in, line)) {
    CHECK(line.rfind("conv2,", 0) == 0);
    if (line.ends_with(",shift")) ++shift_rows;
    if (line.ends_with(",no_shift")) ++base_rows;
  }
  CHECK(shift_rows == 5);
  CHECK(base_rows == 5);
  CHECK(run("gates --corpus small.jsonl --conversation nope --shift-checkpoint pre_small/shift.ckpt").code == 2);
  CHECK(run("gates --corpus small.jsonl").code == 1);
}
