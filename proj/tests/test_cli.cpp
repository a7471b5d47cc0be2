#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "tpplab/cli.hpp"
#include "tpplab/infer.hpp"
#include "tpplab/io.hpp"
#include "tpplab/models.hpp"

using namespace tpp;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

void write_fixture_csvs(const TempDir& dir) {
  io::write_text_file(
      dir / "annotations.csv",
      "participant_id,session_id,behavior,start,stop\n"
      "p1,s1,SIB,2020-03-02T10:00:01.000,2020-03-02T10:00:01.500\n"
      "p1,s1,ED,2020-03-02T10:00:01.250,2020-03-02T10:00:02.000\n"
      "p1,s1,ATO,2020-03-02T10:00:05.000,2020-03-02T10:00:05.000\n"
      "p1,s2,SIB,2020-03-02T12:05:00.000,2020-03-02T12:05:02.250\n"
      "p2,s3,ED,2020-03-03T09:30:00.000,2020-03-03T09:30:00.000\n"
      "p2,s3,ATO,2020-03-03T09:45:10.500,2020-03-03T09:45:12.000\n");
  io::write_text_file(dir / "sessions.csv",
                      "session_id,participant_id,session_start,session_end\n"
                      "s1,p1,2020-03-02T10:00:00.000,2020-03-02T11:00:00.000\n"
                      "s2,p1,2020-03-02T12:00:00.000,2020-03-02T12:30:00.000\n"
                      "s3,p2,2020-03-03T09:00:00.000,2020-03-03T10:00:00.000\n"
                      "s4,p2,2020-03-03T11:00:00.000,2020-03-03T11:20:00.000\n");
}

std::string slurp(const std::string& p) { return io::read_text_file(p); }

}  // namespace

TEST_CASE("ingest pipeline: counts, determinism, manifest") {
  TempDir dir("tpplab_cli_ingest");
  write_fixture_csvs(dir);
  const auto out1 = dir / "out1";
  const auto out2 = dir / "out2";
  REQUIRE(cli::run({"ingest", "--annotations", dir / "annotations.csv", "--sessions",
                    dir / "sessions.csv", "--out", out1}) == cli::kExitOk);

  const auto ds = io::read_dataset_jsonl(fs::path(out1) / "dataset.jsonl");
  REQUIRE(ds.sequences.size() == 4);
  // Hand-counted: six annotations, one cross-behavior merge in s1.
  CHECK(ds.sequences[0].count() == 2);  // s1
  CHECK(ds.sequences[1].count() == 1);  // s2
  CHECK(ds.sequences[2].count() == 2);  // s3
  CHECK(ds.sequences[3].count() == 0);  // s4: no annotations
  CHECK(ds.sequences[0].onsets()[0] == doctest::Approx(1.0 / 60.0));
  CHECK(ds.sequences[0].onsets()[1] == doctest::Approx(5.0 / 60.0));
  CHECK(ds.metadata.at("time_encoding_annotations") == "iso8601");

  // Identical invocation produces byte-identical artifacts.
  REQUIRE(cli::run({"ingest", "--annotations", dir / "annotations.csv", "--sessions",
                    dir / "sessions.csv", "--out", out2}) == cli::kExitOk);
  for (const char* name : {"dataset.jsonl", "validation.json"})
    CHECK(slurp(fs::path(out1) / name) == slurp(fs::path(out2) / name));

  CHECK(fs::exists(fs::path(out1) / "manifest.json"));
}

TEST_CASE("ingest rejects malformed rows with the row number") {
  TempDir dir("tpplab_cli_badrow");
  io::write_text_file(dir / "annotations.csv",
                      "participant_id,session_id,behavior,start,stop\n"
                      "p1,s1,SIB,2020-03-02T10:00:01.000,2020-03-02T10:00:01.500\n"
                      "p1,s1,WAT,2020-03-02T10:00:01.000,2020-03-02T10:00:01.500\n");
  io::write_text_file(dir / "sessions.csv",
                      "session_id,participant_id,session_start,session_end\n"
                      "s1,p1,2020-03-02T10:00:00.000,2020-03-02T11:00:00.000\n");
  CHECK(cli::run({"ingest", "--annotations", dir / "annotations.csv", "--sessions",
                  dir / "sessions.csv", "--out", dir / "out"}) == cli::kExitInput);
  try {
    io::read_annotations_csv(dir / "annotations.csv", false);
    FAIL("expected InputError");
  } catch (const io::InputError& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
}

TEST_CASE("off-grid timestamps require the tolerance flag") {
  TempDir dir("tpplab_cli_offgrid");
  io::write_text_file(dir / "annotations.csv",
                      "participant_id,session_id,behavior,start,stop\n"
                      "p1,s1,SIB,100.1,100.5\n");
  io::write_text_file(dir / "sessions.csv",
                      "session_id,participant_id,session_start,session_end\n"
                      "s1,p1,0,3600\n");
  CHECK(cli::run({"ingest", "--annotations", dir / "annotations.csv", "--sessions",
                  dir / "sessions.csv", "--out", dir / "out"}) == cli::kExitInput);
  CHECK(cli::run({"ingest", "--annotations", dir / "annotations.csv", "--sessions",
                  dir / "sessions.csv", "--out", dir / "out2", "--tolerate-offgrid"}) ==
        cli::kExitOk);
}

TEST_CASE("simulate writes provenance and flags explosions as exit 3") {
  TempDir dir("tpplab_cli_sim");
  io::write_text_file(dir / "hpp.json", R"({"family":"HPP","params":{"mu":0.3}})");
  REQUIRE(cli::run({"simulate", "--family", "HPP", "--params-file", dir / "hpp.json",
                    "--sessions", "5", "--T", "60", "--seed", "11", "--out",
                    dir / "out"}) == cli::kExitOk);
  const auto ds = io::read_dataset_jsonl(fs::path(dir / "out") / "dataset.jsonl");
  CHECK(ds.sequences.size() == 5);
  CHECK(ds.metadata.at("provenance_family") == "HPP");
  CHECK(ds.metadata.at("provenance_seed") == "11");

  io::write_text_file(dir / "boom.json",
                      R"({"family":"HAWKES_EXP","params":{"mu":0.5,"alpha":1.4,"beta":2.0}})");
  CHECK(cli::run({"simulate", "--family", "HAWKES_EXP", "--params-file", dir / "boom.json",
                  "--sessions", "1", "--T", "1e6", "--seed", "1", "--max-events", "2000",
                  "--out", dir / "boom"}) == cli::kExitModel);

  // Family flag must match the parameter file.
  CHECK(cli::run({"simulate", "--family", "NHPP_PL", "--params-file", dir / "hpp.json",
                  "--sessions", "1", "--T", "10", "--seed", "1", "--out",
                  dir / "bad"}) == cli::kExitInput);
}

TEST_CASE("fit writes a reproducible archive that reloads") {
  TempDir dir("tpplab_cli_fit");
  io::write_text_file(dir / "hpp.json", R"({"family":"HPP","params":{"mu":0.4}})");
  REQUIRE(cli::run({"simulate", "--family", "HPP", "--params-file", dir / "hpp.json",
                    "--sessions", "8", "--T", "50", "--seed", "21", "--out",
                    dir / "data"}) == cli::kExitOk);
  const auto dataset = (fs::path(dir / "data") / "dataset.jsonl").string();

  const std::vector<std::string> fit_args = {
      "fit",     "--dataset", dataset, "--family", "HPP",  "--chains", "2",
      "--warmup", "300",      "--draws", "400",    "--seed", "7",      "--out"};
  auto with_out = [&](const std::string& out) {
    auto args = fit_args;
    args.push_back(out);
    return args;
  };
  REQUIRE(cli::run(with_out(dir / "fit1")) == cli::kExitOk);
  REQUIRE(cli::run(with_out(dir / "fit2")) == cli::kExitOk);
  CHECK(slurp(fs::path(dir / "fit1") / "draws.csv") ==
        slurp(fs::path(dir / "fit2") / "draws.csv"));
  CHECK(slurp(fs::path(dir / "fit1") / "diagnostics.csv") ==
        slurp(fs::path(dir / "fit2") / "diagnostics.csv"));

  const auto samples = io::read_archive(dir / "fit1");
  CHECK(samples.family() == ModelFamily::HPP);
  CHECK(samples.n_chains() == 2);
  CHECK(samples.n_draws() == 400);
  // Reloaded draws match the archive bytes at full precision.
  const auto mean = samples.posterior_mean();
  CHECK(mean.values()[0] > 0.2);
  CHECK(mean.values()[0] < 0.7);

  // Config echoes the chain settings.
  const auto config = slurp(fs::path(dir / "fit1") / "config.json");
  CHECK(config.find("\"target_accept\": 0.99") != std::string::npos);
  CHECK(config.find("\"warmup\": 300") != std::string::npos);
  CHECK(config.find("\"gamma_parameterization\": \"shape_rate\"") != std::string::npos);
}

TEST_CASE("diagnose, evaluate, and forecast run end to end deterministically") {
  TempDir dir("tpplab_cli_pipeline");
  io::write_text_file(dir / "hawkes.json",
                      R"({"family":"HAWKES_EXP","params":{"mu":0.05,"alpha":0.6,"beta":0.8}})");
  REQUIRE(cli::run({"simulate", "--family", "HAWKES_EXP", "--params-file",
                    dir / "hawkes.json", "--sessions", "12", "--T", "60", "--seed", "5",
                    "--out", dir / "data"}) == cli::kExitOk);
  const auto dataset = (fs::path(dir / "data") / "dataset.jsonl").string();
  REQUIRE(cli::run({"fit", "--dataset", dataset, "--family", "HAWKES_EXP", "--chains", "2",
                    "--warmup", "250", "--draws", "150", "--seed", "3", "--out",
                    dir / "fit"}) == cli::kExitOk);

  for (const auto& out : {dir / "diag1", dir / "diag2"}) {
    REQUIRE(cli::run({"diagnose", "--dataset", dataset, "--posterior", dir / "fit",
                      "--trials", "8", "--seed", "9", "--ripley-min", "4", "--out", out}) ==
            cli::kExitOk);
  }
  for (const char* name : {"qq.csv", "residuals.csv", "counts_model.csv",
                           "counts_empirical.csv", "kde.csv", "ripley.csv",
                           "quantile_audit.csv", "report.json"}) {
    CHECK(fs::exists(fs::path(dir / "diag1") / name));
    CHECK(slurp(fs::path(dir / "diag1") / name) == slurp(fs::path(dir / "diag2") / name));
  }
  // The manifest is a pure function of the invocation: rerunning into the
  // same directory reproduces it byte for byte.
  const auto manifest_snapshot = slurp(fs::path(dir / "diag1") / "manifest.json");
  REQUIRE(cli::run({"diagnose", "--dataset", dataset, "--posterior", dir / "fit", "--trials",
                    "8", "--seed", "9", "--ripley-min", "4", "--out", dir / "diag1"}) ==
          cli::kExitOk);
  CHECK(slurp(fs::path(dir / "diag1") / "manifest.json") == manifest_snapshot);

  for (const auto& out : {dir / "eval1", dir / "eval2"}) {
    REQUIRE(cli::run({"evaluate", "--dataset", dataset, "--posterior", dir / "fit",
                      "--dt-list", "1,5", "--starts", "4", "--traj", "20", "--roc-starts",
                      "10", "--seed", "13", "--out", out}) == cli::kExitOk);
  }
  for (const char* name : {"loo.csv", "windows.csv", "metrics.json"})
    CHECK(slurp(fs::path(dir / "eval1") / name) == slurp(fs::path(dir / "eval2") / name));

  const auto ds = io::read_dataset_jsonl(dataset);
  const auto& session = ds.sequences.front().session_id();
  for (const auto& out : {dir / "fc1", dir / "fc2"}) {
    REQUIRE(cli::run({"forecast", "--dataset", dataset, "--posterior", dir / "fit",
                      "--session", session, "--t-start", "20", "--dt", "15", "--traj", "40",
                      "--seed", "17", "--out", out}) == cli::kExitOk);
  }
  CHECK(slurp(fs::path(dir / "fc1") / "forecast.csv") ==
        slurp(fs::path(dir / "fc2") / "forecast.csv"));

  // Band columns are ordered and the grid covers the window.
  const auto forecast = slurp(fs::path(dir / "fc1") / "forecast.csv");
  CHECK(forecast.rfind("time,q5,q25,q50,q75,q95", 0) == 0);

  // Unknown session is an input error.
  CHECK(cli::run({"forecast", "--dataset", dataset, "--posterior", dir / "fit", "--session",
                  "nope", "--t-start", "20", "--dt", "15", "--seed", "1", "--out",
                  dir / "fc3"}) == cli::kExitInput);
}

TEST_CASE("strict fits fail on poor convergence and the fallback sampler runs") {
  TempDir dir("tpplab_cli_strict");
  io::write_text_file(dir / "hawkes.json",
                      R"({"family":"HAWKES_EXP","params":{"mu":0.05,"alpha":0.6,"beta":0.8}})");
  REQUIRE(cli::run({"simulate", "--family", "HAWKES_EXP", "--params-file",
                    dir / "hawkes.json", "--sessions", "12", "--T", "60", "--seed", "880",
                    "--out", dir / "data"}) == cli::kExitOk);
  const auto dataset = (fs::path(dir / "data") / "dataset.jsonl").string();

  // Deliberately undersampled chains do not converge; --strict turns the
  // diagnostic breach into exit 4 (the archive is still written).
  CHECK(cli::run({"fit", "--dataset", dataset, "--family", "HAWKES_EXP", "--chains", "2",
                  "--warmup", "15", "--draws", "30", "--seed", "2", "--strict", "--out",
                  dir / "bad_fit"}) == cli::kExitDiagnostics);
  CHECK(fs::exists(fs::path(dir / "bad_fit") / "draws.csv"));

  CHECK(cli::run({"fit", "--dataset", dataset, "--family", "HAWKES_EXP", "--chains", "2",
                  "--warmup", "400", "--draws", "200", "--seed", "2", "--sampler", "rwm",
                  "--out", dir / "rwm_fit"}) == cli::kExitOk);
  const auto config = slurp(fs::path(dir / "rwm_fit") / "config.json");
  CHECK(config.find("\"sampler\": \"random_walk\"") != std::string::npos);

  // Draw-averaged diagnostics flag.
  REQUIRE(cli::run({"diagnose", "--dataset", dataset, "--posterior", dir / "rwm_fit",
                    "--trials", "4", "--seed", "1", "--theta-draws", "--out",
                    dir / "diag"}) == cli::kExitOk);
  CHECK(fs::exists(fs::path(dir / "diag") / "report.json"));
}

TEST_CASE("help and parse errors") {
  CHECK(cli::run({"--help"}) == cli::kExitOk);
  CHECK(cli::run({"fit"}) == cli::kExitInput);            // missing required options
  CHECK(cli::run({"frobnicate"}) == cli::kExitInput);     // unknown subcommand
  CHECK(cli::run(std::vector<std::string>{}) == cli::kExitInput);
}
